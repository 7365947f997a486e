"""Command-line driver.

Every subcommand writes three files into the output directory:
``record.txt`` (the full experiment record), ``series.csv`` and
``summary.csv``. Exit status is 0 on pass, 1 on fail, 2 on a usage error and
3 when the run itself breaks.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback
from dataclasses import dataclass, field

import numpy as np

from . import experiments as ex
from .checks import run_checks
from .propagator import TimeGrid, evolve_field, maximal_field, support_symbol_max
from .spectral_core import l2_norm, lp_ball_norm, make_lattice, unit_ball
from .symbols import parse_symbol

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
SUBCOMMANDS = ("evolve", "maximal", "counterexample", "rate", "transfer", "smoothing",
               "positive", "check")
DEFAULT_OUT = "dispersal-out"

# subcommand -> (default symbol, default parameters)
_DEFAULTS = {
    "evolve": ("elliptic", {}),
    "maximal": ("elliptic", {}),
    "counterexample": ("pm:1.5", {"R": [64.0, 128.0, 256.0, 512.0]}),
    "rate": ("elliptic", {"delta": 1.0, "s": 0.4}),
    "transfer": ("boussinesq", {}),
    "smoothing": ("pm:2", {}),
    "positive": ("pm:2", {}),
    "check": ("elliptic", {}),
}
PARAM_KEYS = ("R", "m", "delta", "s")
OVERRIDE_KEYS = ("h", "cutoff", "ball_spacing", "t_count")
CONFIG_KEYS = {"subcommand", "symbol", "params", "overrides", "out", "seed", "threads"}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    symbol: str
    params: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    out: str = DEFAULT_OUT
    seed: int = 0
    threads: int | None = None

    def to_text(self) -> str:
        data = {k: getattr(self, k) for k in sorted(CONFIG_KEYS)}
        return "\n".join(f"{k} = {json.dumps(v, sort_keys=True)}" for k, v in data.items()) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        data = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, sep, val = line.partition(" = ")
            if not sep:
                raise UsageError(f"malformed config line {line!r}")
            if key not in CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            data[key] = json.loads(val)
        missing = {"subcommand", "symbol"} - set(data)
        if missing:
            raise UsageError(f"config lacks {sorted(missing)}")
        return cls(**data)


def _float_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty number list")
    return vals


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--symbol")
    common.add_argument("--R", type=_float_list, help="comma-separated list")
    common.add_argument("--m", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--s", type=float)
    common.add_argument("--h", type=float, help="lattice spacing")
    common.add_argument("--cutoff", type=float,
                        help="lattice cutoff; caps the largest dyadic scale for smoothing/positive")
    common.add_argument("--ball-spacing", type=float)
    common.add_argument("--t-count", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output directory (default $DISPERSAL_OUT)")
    common.add_argument("--threads", type=int)
    parser = argparse.ArgumentParser(prog="dispersal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def parse_args(argv) -> RunConfig:
    """Turn an argument list into a validated :class:`RunConfig`; raises UsageError."""
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise UsageError(f"bad arguments: {' '.join(argv)}") from exc
    default_symbol, defaults = _DEFAULTS[ns.subcommand]
    symbol = ns.symbol or default_symbol
    try:
        P = parse_symbol(symbol)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = dict(defaults)
    for key in PARAM_KEYS:
        val = getattr(ns, key)
        if val is not None:
            params[key] = val
    overrides = {k: getattr(ns, k) for k in OVERRIDE_KEYS if getattr(ns, k) is not None}
    if ns.subcommand == "rate":
        m = params.get("m", P.growth_exponent)
        if not 0 <= params["delta"] < m:
            raise UsageError(f"rate needs 0 <= delta < m, got delta={params['delta']}, m={m}")
    if ns.subcommand == "counterexample" and symbol.partition(":")[0] not in ("pm", "boussinesq"):
        raise UsageError("counterexample needs --symbol pm:<m> or boussinesq")
    if ns.subcommand in ("smoothing", "positive") and not symbol.startswith("pm:"):
        raise UsageError(f"{ns.subcommand} needs a pm:<m> symbol")
    if ns.threads is not None and ns.threads < 1:
        raise UsageError("--threads must be positive")
    out = ns.out or os.environ.get("DISPERSAL_OUT") or DEFAULT_OUT
    return RunConfig(ns.subcommand, symbol, params, overrides, out, ns.seed, ns.threads)


def _lattice(cfg, default_cutoff=8.0):
    return make_lattice(2, cfg.overrides.get("h", 0.5), cfg.overrides.get("cutoff", default_cutoff))


def _ball(cfg, cutoff):
    return unit_ball(2, cfg.overrides.get("ball_spacing", 2 * math.pi / (10 * cutoff)))


def _time_grid(cfg, f, P):
    if "t_count" in cfg.overrides:
        return TimeGrid(1.0 / cfg.overrides["t_count"], 1.0, cfg.overrides["t_count"], override=True)
    return TimeGrid.resolving(support_symbol_max(f, P))


def _random_f(cfg, lat):
    rng = np.random.default_rng(cfg.seed)
    return ex.random_band_function(lat, (1.0, lat.cutoff), rng)


def _run_evolve(cfg):
    P = parse_symbol(cfg.symbol)
    lat = _lattice(cfg)
    f = _random_f(cfg, lat)
    ball = _ball(cfg, lat.cutoff)
    count = cfg.overrides.get("t_count", 11)
    times = np.linspace(0.0, 1.0, count)
    series = [(t, lp_ball_norm(evolve_field(f, P, ball, t, allow_coarse=True), 2)) for t in times]
    bound = f.l1_mass() * math.sqrt(math.pi)
    rec = ex.ExperimentRecord("evolve", P.name, _params(cfg), series,
                              tolerance="L2(B) norm <= |f_hat|_1 h^n |B|^(1/2)").fit()
    rec.passed = all(v <= bound * (1 + 1e-12) for _, v in series)
    return rec


def _run_maximal(cfg):
    P = parse_symbol(cfg.symbol)
    lat = _lattice(cfg)
    f = _random_f(cfg, lat)
    ball = _ball(cfg, lat.cutoff)
    mf = maximal_field(f, P, ball, _time_grid(cfg, f, P), allow_coarse=True)
    ps = (1.0, 2.0, 3.0, 4.0, 8.0)
    series = [(p, lp_ball_norm(mf, p)) for p in ps]
    ok = all(v <= f.l1_mass() * math.pi ** (1 / p) * (1 + 1e-12) for p, v in series)
    rec = ex.ExperimentRecord("maximal", P.name, _params(cfg), series,
                              tolerance="Lp(B) norm <= |f_hat|_1 h^n |B|^(1/p)",
                              aux={"sup": [(1.0, lp_ball_norm(mf, math.inf))],
                                   "l2": [(1.0, l2_norm(f))]}).fit()
    rec.passed = ok
    return rec


def _scales(cfg, default_max=7):
    cutoff = cfg.overrides.get("cutoff")
    kmax = default_max if cutoff is None else int(math.floor(math.log2(cutoff) + 1e-9))
    return list(range(3, kmax + 1))


def _m_of(symbol):
    return float(symbol.partition(":")[2])


def _params(cfg):
    return {"params": cfg.params, "overrides": cfg.overrides, "seed": cfg.seed}


def _run(cfg):
    kind = cfg.subcommand
    o = cfg.overrides
    if kind == "evolve":
        return _run_evolve(cfg)
    if kind == "maximal":
        return _run_maximal(cfg)
    if kind == "counterexample":
        return ex.growth_experiment(cfg.symbol, cfg.params["R"])
    if kind == "rate":
        times = [2.0 ** -j for j in range(4, 13)]
        return ex.rate_experiment(cfg.symbol, cfg.params["delta"], cfg.params["s"], times,
                                  cutoff=o.get("cutoff", 64.0), spacing=o.get("h", 0.5),
                                  m=cfg.params.get("m"))
    if kind == "transfer":
        return ex.transfer_experiment(cfg.symbol, "elliptic", seed=cfg.seed,
                                      cutoff=o.get("cutoff", 8.0), spacing=o.get("h", 0.5))
    if kind == "smoothing":
        return ex.smoothing_experiment(cfg.params.get("m", _m_of(cfg.symbol)), _scales(cfg),
                                       seed=cfg.seed, spacing=o.get("h", 1.0),
                                       ball_spacing=o.get("ball_spacing", 0.05))
    if kind == "positive":
        return ex.positive_direction_experiment(cfg.params.get("m", _m_of(cfg.symbol)),
                                                _scales(cfg), spacing=o.get("h", 0.5),
                                                ball_spacing=o.get("ball_spacing", 0.05))
    results = run_checks(cfg.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.error:.3g} (tol {r.tolerance:g})")
    rec = ex.ExperimentRecord("check", cfg.symbol, _params(cfg),
                              [(i + 1, r.error) for i, r in enumerate(results)],
                              tolerance="every invariant within its tolerance")
    rec.passed = all(r.passed for r in results)
    return rec


def _write_outputs(rec, out):
    os.makedirs(out, exist_ok=True)
    ex.save_record(rec, os.path.join(out, "record.txt"))
    with open(os.path.join(out, "series.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("abscissa,value\n")
        fh.writelines(f"{a!r},{v!r}\n" for a, v in rec.series)
    with open(os.path.join(out, "summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,slope,residual,pass\n")
        slope = "" if rec.slope is None else repr(rec.slope)
        resid = "" if rec.residual is None else repr(rec.residual)
        fh.write(f"{rec.kind},{slope},{resid},{str(bool(rec.passed)).lower()}\n")


def run(cfg: RunConfig) -> int:
    if cfg.threads is not None:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=cfg.threads):
            rec = _run(cfg)
    else:
        rec = _run(cfg)
    _write_outputs(rec, cfg.out)
    slope = "n/a" if rec.slope is None else f"{rec.slope:.4f}"
    print(f"{rec.kind} {rec.symbol}: slope {slope}, {'pass' if rec.passed else 'fail'} "
          f"({rec.tolerance}); wrote {cfg.out}")
    return EXIT_PASS if rec.passed else EXIT_FAIL


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"dispersal: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
