"""Explicit large-evolution data for the Boussinesq and finite-type symbols.

``BourgainDatum`` is a union of thin strips near ``|xi| ~ R``. Its evolution
under the Laplacian is searched over a ball of points and short times.
``PmDatum`` is one long rectangle whose evolution under ``P_m`` stays large at
a known time ``t(x)``, so no search is needed there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .continuum import RectangleSet, continuum_evolve, continuum_evolve_grid
from .symbols import Symbol, boussinesq, elliptic, finite_type

MIN_R = 64.0
# |int e^{i phi}| >= area * cos(max|phi|); 0.8 of the area keeps the 0.4 R floor
PHASE_LIMIT = math.acos(0.8)


def _strip_count(R: float) -> int:
    return int(math.ceil(float(np.cbrt(R)) - 1e-9))


@dataclass(frozen=True)
class BourgainDatum:
    R: float
    strips: RectangleSet

    @property
    def count(self) -> int:
        return len(self.strips)

    @property
    def area(self) -> float:
        return self.strips.area

    @property
    def l2_norm(self) -> float:
        return math.sqrt(self.area)


def bourgain_datum(R: float) -> BourgainDatum:
    """Strips ``[R - R^(1/2), R + R^(1/2)] x [R^(2/3) l, R^(2/3) l + 1]``, ``l = 1..ceil(R^(1/3))``."""
    R = float(R)
    if not R >= MIN_R:
        raise ValueError(f"R must be at least {MIN_R:g}, got {R}")
    half = math.sqrt(R)
    # cbrt is exact on perfect cubes, unlike R ** (2 / 3)
    step = float(np.cbrt(R)) ** 2
    boxes = [((R - half, R + half), (step * l, step * l + 1.0))
             for l in range(1, _strip_count(R) + 1)]
    return BourgainDatum(R, RectangleSet(tuple(boxes)))


def disk_points(count: int, radius: float = 1.0) -> np.ndarray:
    """First ``count`` points of the base-(2,3) Halton sequence that fall in the disk."""
    sampler = qmc.Halton(d=2, scramble=False)
    pts = np.zeros((0, 2))
    while len(pts) < count:
        raw = sampler.random(2 * count) * 2 - 1
        pts = np.concatenate([pts, raw[np.sum(raw ** 2, axis=1) <= 1.0]])
    return radius * pts[:count]


@dataclass
class SearchResult:
    value: float
    x: np.ndarray
    t: float
    coarse_value: float
    # mean over sampled x of the per-x time max, times the disk area
    l1_proxy: float
    evaluations: int = 0
    history: list = field(default_factory=list)


def _local_search(datum, P, x, t, dx, dt, t_max, rounds):
    best = abs(continuum_evolve_grid(datum.strips, P, x[None, :], [t])[0, 0])
    evals = 1
    offsets = np.array([(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)], dtype=float)
    for _ in range(rounds):
        X = x[None, :] + dx * offsets
        X = X[np.sum(X ** 2, axis=1) <= 1.0]
        T = np.clip(t + dt * np.array([-1.0, 0.0, 1.0]), dt * 1e-3, t_max)
        vals = np.abs(continuum_evolve_grid(datum.strips, P, X, T))
        evals += vals.size
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[i, j] > best * (1 + 1e-12):
            best, x, t = float(vals[i, j]), X[i].copy(), float(T[j])
        else:
            dx, dt = dx / 2, dt / 2
    return best, x, t, evals


def bourgain_search(R: float, x_budget: int = 4096, t_budget: int = 256,
                    refine_rounds: int = 24, starts: int = 4) -> SearchResult:
    """Largest ``|e^{it Lap} f(x)|`` found over the unit disk and ``0 < t <= 1/R``.

    Coarse stage: Halton points in the disk against the uniform times
    ``j / (t_budget R)``. Refinement: a 3x3x3 pattern search around the best
    few coarse points, halving the step whenever no neighbour improves.
    """
    if x_budget < 32 or t_budget < 32:
        raise ValueError("search budgets must be at least 32")
    datum = bourgain_datum(R)
    P = elliptic()
    X = disk_points(x_budget)
    t_max = 1.0 / datum.R
    T = t_max * np.arange(1, t_budget + 1) / t_budget
    vals = np.empty((len(X), len(T)))
    chunk = 1024
    for s in range(0, len(X), chunk):
        vals[s:s + chunk] = np.abs(continuum_evolve_grid(datum.strips, P, X[s:s + chunk], T))
    per_x = vals.max(axis=1)
    l1_proxy = float(per_x.mean() * math.pi)
    coarse = float(vals.max())
    order = np.argsort(per_x)[::-1][:starts]
    best = SearchResult(coarse, X[order[0]], float(T[np.argmax(vals[order[0]])]), coarse,
                        l1_proxy, vals.size)
    dx = math.sqrt(math.pi / x_budget)
    for i in order:
        t0 = float(T[np.argmax(vals[i])])
        v, x, t, n = _local_search(datum, P, X[i].copy(), t0, dx, t_max / t_budget, t_max,
                                   refine_rounds)
        best.evaluations += n
        best.history.append((float(per_x[i]), v))
        if v > best.value:
            best.value, best.x, best.t = v, x, t
    # report the adaptive quadrature value at the winner
    best.value = abs(continuum_evolve(datum.strips, P, best.x, best.t))
    return best


def boussinesq_transfer(R: float, x, t: float, gap: float = 0.5):
    """Compare the datum's evolution under Boussinesq and the Laplacian at one point.

    Returns ``(elliptic_value, boussinesq_value, bound)`` where ``bound`` is
    ``(e^{t gap} - 1) |A_R|``; the moduli can differ by at most that much.
    """
    datum = bourgain_datum(R)
    ve = continuum_evolve(datum.strips, elliptic(), x, t)
    vb = continuum_evolve(datum.strips, boussinesq(), x, t)
    return abs(ve), abs(vb), math.expm1(abs(t) * gap) * datum.area


@dataclass(frozen=True)
class PmDatum:
    R: float
    m: float
    box: RectangleSet
    # ((x1_lo, x1_hi), (x2_lo, x2_hi))
    witness_region: tuple = ((-1e-3, 1e-3), (-1e-3, -5e-4))

    def witness_time(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -x[..., 1] / self.R + 1.0 / self.R ** 2

    @property
    def t_bound(self) -> float:
        """Largest witness time over the region."""
        return -self.witness_region[1][0] / self.R + 1.0 / self.R ** 2

    @property
    def l2_norm(self) -> float:
        return math.sqrt(self.box.area)

    @property
    def symbol(self) -> Symbol:
        return finite_type(self.m)


def pm_datum(R: float, m: float) -> PmDatum:
    R, m = float(R), float(m)
    if not R >= MIN_R:
        raise ValueError(f"R must be at least {MIN_R:g}, got {R}")
    if not 1 < m < 2:
        raise ValueError(f"m must lie in (1, 2), got {m}")
    return PmDatum(R, m, RectangleSet((((R, R + 1.0), (R, 1.5 * R)),)))


def witness_samples(d: PmDatum, count: int) -> np.ndarray:
    """A ``q x q`` tensor grid (``q = ceil(sqrt(count))``) covering the witness region."""
    q = int(math.ceil(math.sqrt(count)))
    (a1, b1), (a2, b2) = d.witness_region
    g1, g2 = np.meshgrid(np.linspace(a1, b1, q), np.linspace(a2, b2, q), indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], axis=1)


def residual_phase(d: PmDatum, x) -> np.ndarray:
    """Upper bound of the rescaled phase over ``(eta1, eta2) in [0,1]^2`` and all ``theta``.

    With ``xi = (R + eta1, R + R eta2 / 2)`` the phase, less a constant, is
    ``A eta1 + B eta2 + C eta1 eta2 + D(theta) eta1^2`` where ``D`` carries the
    Taylor remainder of ``|xi1|^m / m``. The bilinear part peaks at a corner of
    the square; ``|D|`` is bounded by its worst case over ``theta in [0, 1]``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R, m = d.R, d.m
    t = d.witness_time(x)
    A = x[:, 0] + R * t + R ** (m - 1) * t
    B = 0.5 * R * (x[:, 1] + R * t)
    C = 0.5 * t * R
    corners = np.stack([np.zeros_like(A), A, B, A + B + C], axis=1)
    bilinear = np.abs(corners).max(axis=1)
    # |theta eta1 + R|^(m-2) with m < 2 is largest at theta eta1 = 0
    worst = max(R ** (m - 2), (R + 1.0) ** (m - 2))
    return bilinear + 0.5 * np.abs(t) * (m - 1) * worst


@dataclass
class WitnessReport:
    min_modulus: float
    max_residual: float
    samples: int
    moduli: np.ndarray


def pm_witness_check(d: PmDatum, sample_count: int = 64, tol: float = 1e-8) -> WitnessReport:
    """Evaluate ``|e^{it(x) P_m(D)} f(x)|`` on a grid of the witness region."""
    if sample_count < 16:
        raise ValueError("need at least 16 witness samples")
    X = witness_samples(d, sample_count)
    T = d.witness_time(X)
    P = d.symbol
    mods = np.array([abs(continuum_evolve(d.box, P, x, t, tol=tol)) for x, t in zip(X, T)])
    corners = np.array([(a, b) for a in d.witness_region[0] for b in d.witness_region[1]])
    res = float(max(residual_phase(d, X).max(), residual_phase(d, corners).max()))
    return WitnessReport(float(mods.min()), res, len(X), mods)


def sufficient_R(m: float, limit: float = PHASE_LIMIT, R0: float = MIN_R,
                 doublings: int = 24):
    """Smallest ``R0 * 2^j`` whose residual phase bound is at most ``limit``, or None."""
    for j in range(doublings + 1):
        d = pm_datum(R0 * 2 ** j, m)
        corners = np.array([(a, b) for a in d.witness_region[0] for b in d.witness_region[1]])
        if residual_phase(d, corners).max() <= limit:
            return d.R
    return None
