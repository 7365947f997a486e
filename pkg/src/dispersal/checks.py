"""Fast invariant suite shared by the ``check`` subcommand and the test-suite."""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .continuum import RectangleSet, continuum_evolve
from .decompose import dyadic_split, reassemble, sector_split
from .experiments import ExperimentRecord, load_record, save_record
from .fitting import fit_exponent
from .propagator import evolve_points, field_values, propagate, sweep
from .spectral_core import SpectralFunction, l2_norm, make_lattice, unit_ball
from .symbols import boussinesq, elliptic, finite_type, nonelliptic


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


def _random_function(rng, lattice, modes=64):
    K = lattice.half_width
    idx = rng.integers(-K, K + 1, size=(modes, lattice.dim))
    coef = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
    return SpectralFunction(lattice, idx, coef)


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _canonical(f: SpectralFunction):
    order = np.lexsort(f.indices.T[::-1])
    return f.indices[order], f.coefficients[order]


def _partition_error(whole: SpectralFunction, parts: SpectralFunction) -> float:
    (ia, ca), (ib, cb) = _canonical(whole), _canonical(parts)
    if ia.shape != ib.shape or np.any(ia != ib):
        return math.inf
    return _rel(cb, ca)


def _closed_box(box, x):
    out = 1 + 0j
    for (a, b), xi in zip(box, x):
        out *= (b - a) if xi == 0 else (np.exp(1j * b * xi) - np.exp(1j * a * xi)) / (1j * xi)
    return out


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    lat = make_lattice(2, 0.5, 8.0)
    f = _random_function(rng, lat)
    symbols = [elliptic(), nonelliptic(), boussinesq(), finite_type(2)]
    out = []

    err = 0.0
    for P in symbols:
        for t in (0.1, 0.37, 1.0):
            err = max(err, abs(l2_norm(propagate(f, P, t)) / l2_norm(f) - 1))
    out.append(CheckResult("lattice unitarity", err, 1e-12))

    err = 0.0
    for P in symbols:
        a = propagate(propagate(f, P, 0.3), P, 0.45).coefficients
        err = max(err, _rel(a, propagate(f, P, 0.75).coefficients))
    out.append(CheckResult("group law", err, 1e-12))

    x0 = np.array([0.3, -0.2])
    X = rng.uniform(-1, 1, size=(8, 2))
    err = 0.0
    for P in symbols:
        err = max(err, _rel(evolve_points(f.modulate(x0), P, X, 0.4),
                            evolve_points(f, P, X + x0, 0.4)))
    out.append(CheckResult("translation covariance", err, 1e-12))

    big = SpectralFunction(make_lattice(2, 0.5, 32.0),
                           *_coeffs(rng, make_lattice(2, 0.5, 32.0)))
    pieces = dyadic_split(big)
    err = _partition_error(big, reassemble(pieces))
    sectors = [s for p in pieces if p.k >= 1 for s in sector_split(p, 2.0)]
    outer = big.restrict(big.radii > 1)
    err = max(err, _partition_error(outer, reassemble(sectors)))
    out.append(CheckResult("dyadic and sector partitions", err, 1e-12))

    parts = sum(l2_norm(p.piece) ** 2 for p in pieces)
    out.append(CheckResult("Parseval over dyadic pieces", abs(parts / l2_norm(big) ** 2 - 1), 1e-12))

    ball = unit_ball(2, 2 * math.pi / 80)
    ref = evolve_points(f, elliptic(), ball.nodes, 0.0)
    err = max(_rel(field_values(f, ball, m), ref) for m in ("fft", "separable"))
    times = np.linspace(0.05, 1.0, 40)
    direct = np.concatenate([v for _, _, v in sweep(f, finite_type(2), ball, times, "direct")])
    for method in ("grid", "spectral"):
        blocks = np.zeros_like(direct)
        for nsl, tsl, v in sweep(f, finite_type(2), ball, times, method):
            blocks[nsl, tsl] = v
        err = max(err, _rel(blocks, direct))
    out.append(CheckResult("fast paths against the direct sum", err, 1e-9))

    box = ((0.3, 1.7), (-2.0, 0.5))
    A = RectangleSet((box,))
    err = 0.0
    for x in ((0.0, 0.0), (1.3, -0.4), (-5.0, 7.5)):
        for P in (elliptic(), boussinesq()):
            err = max(err, abs(continuum_evolve(A, P, x, 0.0, tol=1e-12) - _closed_box(box, x))
                      / abs(_closed_box(box, x)))
    out.append(CheckResult("continuum quadrature at t = 0", err, 1e-9))

    a = 2.0 ** np.arange(1, 8)
    err = max(abs(fit_exponent(list(zip(a, 3.0 * a ** p)))[0] - p) for p in (0.0, 1.0, -0.5, 2.25))
    out.append(CheckResult("power-law fit", err, 1e-12))

    rec = ExperimentRecord("check", "elliptic", {"seed": seed, "t": [0.1, 1 / 3]},
                           [(1.0, 0.1), (2.0, 1 / 3), (4.0, math.pi)],
                           aux={"extra": [(1.0, 2.0)]}).fit()
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "record.txt")
        save_record(rec, path)
        same = load_record(path) == rec
    out.append(CheckResult("record round trip", 0.0 if same else 1.0, 0.0))
    return out


def _coeffs(rng, lattice):
    idx = lattice.all_indices()
    return idx, rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
