import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true", help="skip the acceptance criteria")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--skip-slow"):
        skip = pytest.mark.skip(reason="--skip-slow given")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Append one summary line per acceptance criterion."""
    def emit(line):
        request.config.acceptance_lines.append(line)
        print(line)
    return emit


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
