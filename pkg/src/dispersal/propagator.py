"""Evaluation of ``e^{itP(D)}f(x) = sum_xi exp(i x.xi + i t P(xi)) f_hat(xi) h^n``.

Three evaluation paths are provided for fields on a ball grid:

``direct``
    dense exponential sums, the reference path;
``fft``
    an inverse FFT on the dual grid, valid when ``2*pi/(h*dx)`` is an
    integer (frequencies are folded modulo the FFT length, which is exact);
``separable``
    tensor-product matrix sums over each axis of the dense coefficient box.

Time sweeps (maximal and weighted difference fields) additionally have a
``spectral`` path: symbol values are binned, and the time axis is evaluated
with a chirp-z transform. When all symbol values on the support are integer
multiples of a common quantum the binning is exact; otherwise a Taylor
expansion of the in-bin remainder is carried to the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import sparse
from scipy.signal import czt

from .spectral_core import (
    BallQuadrature,
    SampledField,
    SpectralFunction,
    default_ball_spacing,
    synthesize_points,
    unit_ball,
)
from .symbols import Symbol, perturbation_gap

OSCILLATION_SAMPLES = 10
FFT_MAX_POINTS = 1 << 24

# rough per-operation costs in ns, used only to pick an evaluation path
_C_EXP = 45.0
_C_GATHER = 4.0
_C_MAC = 0.2
_C_FFT = 1.5


@dataclass(frozen=True)
class TimeGrid:
    t_min: float
    t_max: float
    count: int
    override: bool = False

    def __post_init__(self):
        if not 0 <= self.t_min < self.t_max <= 1:
            raise ValueError("time grid needs 0 <= t_min < t_max <= 1")
        if self.count < 2:
            raise ValueError("time grid needs at least 2 points")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.count)

    @property
    def step(self) -> float:
        return (self.t_max - self.t_min) / (self.count - 1)

    def resolves(self, max_abs_symbol: float) -> bool:
        if max_abs_symbol <= 0:
            return True
        return self.step <= 2 * math.pi / (OSCILLATION_SAMPLES * max_abs_symbol) * (1 + 1e-12)

    @classmethod
    def resolving(cls, max_abs_symbol: float, t_max: float = 1.0, min_count: int = 2) -> "TimeGrid":
        """Uniform grid ``t_max/N, 2 t_max/N, ..., t_max`` obeying the oscillation rule."""
        if max_abs_symbol > 0:
            rule = 2 * math.pi / (OSCILLATION_SAMPLES * max_abs_symbol)
            count = max(min_count, math.ceil(t_max / rule - 1e-9))
        else:
            count = min_count
        return cls(t_max / count, t_max, count)


def support_symbol_max(f: SpectralFunction, P: Symbol) -> float:
    if len(f) == 0:
        return 0.0
    return float(np.max(np.abs(P.evaluator(f.frequencies))))


def propagate(f: SpectralFunction, P: Symbol, t: float) -> SpectralFunction:
    """Coefficients of ``e^{itP(D)}f``: multiplication by ``exp(itP(xi))``."""
    if len(f) == 0:
        return f
    return f.with_coefficients(f.coefficients * np.exp(1j * t * P.evaluator(f.frequencies)))


def evolve_points(f: SpectralFunction, P: Symbol, points, t: float) -> np.ndarray:
    return synthesize_points(propagate(f, P, t), points)


def evolve_at(f: SpectralFunction, P: Symbol, x, t: float) -> complex:
    return complex(evolve_points(f, P, np.asarray(x, dtype=float)[None, :], t)[0])


# --- grid evaluation -------------------------------------------------------

def _fft_length(f: SpectralFunction, ball: BallQuadrature):
    N = 2 * math.pi / (f.lattice.spacing * ball.spacing)
    Nr = round(N)
    if Nr < 1 or abs(N - Nr) > 1e-9 * N:
        return None
    return Nr


def _box(f: SpectralFunction):
    lo = f.indices.min(axis=0)
    hi = f.indices.max(axis=0)
    return lo, hi


def _axis_tables(f: SpectralFunction, ball: BallQuadrature):
    """Per-axis tables ``exp(i (c_a + j dx) h k)`` over node offsets j and support indices k."""
    lo, hi = _box(f)
    J = int(np.max(np.abs(ball.offsets))) if len(ball) else 0
    j = np.arange(-J, J + 1)
    h = f.lattice.spacing
    tables = []
    for a in range(f.lattice.dim):
        k = np.arange(lo[a], hi[a] + 1)
        x = ball.center[a] + j * ball.spacing
        tables.append(np.exp(1j * np.outer(x, k * h)))
    return tables, lo, J


def _gather_phases(tables, lo, J, ball_offsets, indices):
    """``exp(i x.xi)`` for the given node offsets (rows) and support indices (columns)."""
    out = None
    for a, T in enumerate(tables):
        part = T[(ball_offsets[:, a] + J)[:, None], (indices[:, a] - lo[a])[None, :]]
        out = part if out is None else out * part
    return out


def _field_fft(f: SpectralFunction, ball: BallQuadrature, N: int) -> np.ndarray:
    n = f.lattice.dim
    w = f.coefficients * f.lattice.cell_volume * np.exp(1j * f.frequencies @ np.asarray(ball.center))
    grid = np.zeros((N,) * n, dtype=complex)
    np.add.at(grid, tuple((f.indices % N).T), w)
    vals = sfft.ifftn(grid, norm="forward")
    return vals[tuple((ball.offsets % N).T)]


def _field_separable(f: SpectralFunction, ball: BallQuadrature) -> np.ndarray:
    tables, lo, J = _axis_tables(f, ball)
    hi = f.indices.max(axis=0)
    dense = np.zeros(tuple(hi - lo + 1), dtype=complex)
    dense[tuple((f.indices - lo).T)] = f.coefficients * f.lattice.cell_volume
    out = dense
    # contract each frequency axis against its node table; node axes accumulate at the end
    for T in tables:
        out = np.tensordot(out, T, axes=([0], [1]))
    return out[tuple((ball.offsets + J).T)]


def _field_cost(f: SpectralFunction, ball: BallQuadrature):
    n = f.lattice.dim
    costs = {"direct": len(ball) * len(f) * (_C_EXP + _C_MAC)}
    N = _fft_length(f, ball)
    if N is not None and N ** n <= FFT_MAX_POINTS:
        costs["fft"] = N ** n * max(1.0, n * math.log2(N)) * _C_FFT + len(f) * _C_EXP
    if len(f):
        lo, hi = _box(f)
        K = hi - lo + 1
        J = 2 * int(np.max(np.abs(ball.offsets))) + 1 if len(ball) else 1
        dense = float(np.prod(K))
        sep = 0.0
        size = dense
        for a in range(n):
            sep += size / K[a] * K[a] * J
            size = size / K[a] * J
        costs["separable"] = sep * _C_MAC + J * float(np.sum(K)) * _C_EXP + dense
    return costs


def field_values(f: SpectralFunction, ball: BallQuadrature, method: str = "auto") -> np.ndarray:
    """Synthesize ``f`` at every node of ``ball``."""
    if len(f) == 0:
        return np.zeros(len(ball), dtype=complex)
    if ball.dim != f.lattice.dim:
        raise ValueError("ball and lattice dimensions differ")
    if method == "auto":
        costs = _field_cost(f, ball)
        method = min(costs, key=costs.get)
    if method == "direct":
        return synthesize_points(f, ball.nodes)
    if method == "fft":
        N = _fft_length(f, ball)
        if N is None:
            raise ValueError("ball grid is not commensurate with the dual lattice")
        return _field_fft(f, ball, N)
    if method == "separable":
        return _field_separable(f, ball)
    raise ValueError(f"unknown method {method!r}")


def check_resolution(f: SpectralFunction, ball: BallQuadrature):
    if len(f) == 0:
        return
    rmax = float(np.max(np.abs(f.frequencies)))
    if rmax > 0 and ball.spacing > 2 * math.pi / (OSCILLATION_SAMPLES * rmax) * (1 + 1e-9):
        raise ValueError(
            f"ball spacing {ball.spacing} under-resolves frequency {rmax}; "
            "pass allow_coarse=True to accept")


def evolve_field(f: SpectralFunction, P: Symbol, ball: BallQuadrature, t: float,
                 method: str = "auto", allow_coarse: bool = False) -> SampledField:
    if not allow_coarse:
        check_resolution(f, ball)
    return SampledField(ball, field_values(propagate(f, P, t), ball, method))


# --- time sweeps -----------------------------------------------------------

def detect_quantum(values, spacing: float, max_divisor: int = 64, rtol: float = 1e-9):
    """Largest ``spacing**2 / d`` dividing every value exactly, or None."""
    v = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    if scale == 0:
        return None
    for d in range(1, max_divisor + 1):
        q = spacing * spacing / d
        if scale / q > 2 ** 40:
            return None
        r = v / q
        if np.max(np.abs(r - np.rint(r))) <= rtol * max(1.0, scale / q):
            return q
    return None


def _taylor_terms(bound: float, tol: float) -> int:
    R, term = 1, bound
    while term > tol:
        R += 1
        term = term * bound / R
    return R


class _SpectralPlan:
    def __init__(self, f, P, times, tol):
        pv = P.evaluator(f.frequencies)
        t0 = float(times[0])
        dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
        t_abs = float(np.max(np.abs(times)))
        q = detect_quantum(pv, f.lattice.spacing)
        if q is not None:
            self.dp = q
            b = np.rint(pv / q).astype(np.int64)
            eps = np.zeros_like(pv)
            self.R = 1
        else:
            self.dp = 1.0 / max(t_abs, 1e-300)
            b = np.rint(pv / self.dp).astype(np.int64)
            eps = pv - b * self.dp
            self.R = _taylor_terms(t_abs * self.dp / 2, tol)
        bmin = int(b.min())
        self.B = int(b.max()) - bmin + 1
        self.p0 = bmin * self.dp
        rows = (b - bmin)
        cols = np.arange(len(pv))
        self.bins = [sparse.csr_matrix((eps ** r, (rows, cols)), shape=(self.B, len(pv)))
                     for r in range(self.R)]
        self.times = np.asarray(times, dtype=float)
        self.a = np.exp(-1j * t0 * self.dp)
        self.w = np.exp(1j * dt * self.dp)
        self.L = sfft.next_fast_len(self.B + len(times) - 1)
        fact = np.array([math.factorial(r) for r in range(self.R)], dtype=float)
        self.taylor = (1j * self.times[None, :]) ** np.arange(self.R)[:, None] / fact[:, None]
        self.outer = np.exp(1j * self.times * self.p0)

    def evaluate(self, W):
        """``W`` holds per-node weighted phases (nodes x modes); returns nodes x times."""
        acc = None
        for r, S in enumerate(self.bins):
            A = (S @ W.T).T
            X = czt(A, m=len(self.times), w=self.w, a=self.a, axis=-1)
            X *= self.taylor[r][None, :]
            acc = X if acc is None else acc + X
        return acc * self.outer[None, :]


def _uniform(times) -> bool:
    if len(times) < 3:
        return True
    d = np.diff(times)
    return bool(np.max(np.abs(d - d[0])) <= 1e-9 * max(abs(d[0]), 1e-300))


def sweep_costs(f: SpectralFunction, P: Symbol, ball: BallQuadrature, times) -> dict:
    nodes, modes, T = len(ball), len(f), len(times)
    costs = {
        "direct": nodes * modes * (_C_GATHER + T * _C_MAC) + modes * T * _C_EXP,
        "grid": T * min(_field_cost(f, ball).values()),
    }
    if _uniform(times) and T >= 2:
        pv = P.evaluator(f.frequencies)
        q = detect_quantum(pv, f.lattice.spacing)
        t_abs = float(np.max(np.abs(times)))
        if q is not None:
            B, R = (pv.max() - pv.min()) / q + 1, 1
        else:
            B, R = (pv.max() - pv.min()) * t_abs + 2, _taylor_terms(0.5, 1e-12)
        L = B + T
        costs["spectral"] = nodes * modes * (_C_GATHER + R * 2 * _C_MAC) + \
            nodes * R * 3 * L * math.log2(L) * _C_FFT
    return costs


def sweep(f: SpectralFunction, P: Symbol, ball: BallQuadrature, times,
          method: str = "auto", tol: float = 1e-12, memory: int = 1 << 22):
    """Yield ``(node_slice, time_slice, values)`` blocks covering nodes x times.

    ``values[i, j]`` is ``e^{i t_j P(D)} f`` at node ``i`` of the slice.
    """
    times = np.asarray(times, dtype=float)
    nodes = len(ball)
    if len(f) == 0:
        yield slice(0, nodes), slice(0, len(times)), np.zeros((nodes, len(times)), dtype=complex)
        return
    if method == "auto":
        costs = sweep_costs(f, P, ball, times)
        method = min(costs, key=costs.get)
    if method == "grid":
        for j, t in enumerate(times):
            vals = field_values(propagate(f, P, t), ball)
            yield slice(0, nodes), slice(j, j + 1), vals[:, None]
        return
    tables, lo, J = _axis_tables(f, ball)
    w = f.coefficients * f.lattice.cell_volume
    if method == "direct":
        pv = P.evaluator(f.frequencies)
        tchunk = max(1, memory // max(1, len(f)))
        nchunk = max(1, memory // max(1, len(f)))
        for ts in range(0, len(times), tchunk):
            tsl = slice(ts, min(ts + tchunk, len(times)))
            M = np.exp(1j * np.outer(pv, times[tsl]))
            for ns in range(0, nodes, nchunk):
                nsl = slice(ns, min(ns + nchunk, nodes))
                E = _gather_phases(tables, lo, J, ball.offsets[nsl], f.indices) * w
                yield nsl, tsl, E @ M
        return
    if method == "spectral":
        if not _uniform(times):
            raise ValueError("spectral sweep needs uniformly spaced times")
        plan = _SpectralPlan(f, P, times, tol)
        per_row = max(plan.L * 3, len(f))
        nchunk = max(1, memory // per_row)
        for ns in range(0, nodes, nchunk):
            nsl = slice(ns, min(ns + nchunk, nodes))
            E = _gather_phases(tables, lo, J, ball.offsets[nsl], f.indices) * w
            yield nsl, slice(0, len(times)), plan.evaluate(E)
        return
    raise ValueError(f"unknown sweep method {method!r}")


def _default_ball(f: SpectralFunction) -> BallQuadrature:
    rmax = float(np.max(np.abs(f.frequencies))) if len(f) else 1.0
    return unit_ball(f.lattice.dim, default_ball_spacing(max(rmax, 1e-12)))


def _resolve_grid(f, P, tg):
    bound = support_symbol_max(f, P)
    if tg is None:
        return TimeGrid.resolving(bound)
    if not tg.override and not tg.resolves(bound):
        raise ValueError(
            f"time grid step {tg.step:.3g} does not resolve max|P|={bound:.3g}; "
            "refine it or mark it as an override")
    return tg


def maximal_field(f: SpectralFunction, P: Symbol, ball: BallQuadrature | None = None,
                  tg: TimeGrid | None = None, method: str = "auto",
                  allow_coarse: bool = False) -> SampledField:
    """Per node ``max_t |e^{itP(D)}f|`` over the time grid (a lower bound for the sup)."""
    ball = ball or _default_ball(f)
    if not allow_coarse:
        check_resolution(f, ball)
    tg = _resolve_grid(f, P, tg)
    out = np.zeros(len(ball))
    for nsl, _, vals in sweep(f, P, ball, tg.times, method):
        out[nsl] = np.maximum(out[nsl], np.abs(vals).max(axis=1))
    return SampledField(ball, out)


def weighted_difference_field(f: SpectralFunction, P: Symbol, delta: float, m: float | None = None,
                              ball: BallQuadrature | None = None, tg: TimeGrid | None = None,
                              method: str = "auto", allow_coarse: bool = False) -> SampledField:
    """Per node ``max_t |e^{itP(D)}f - f| / t^(delta/m)``."""
    m = P.growth_exponent if m is None else float(m)
    if delta < 0 or delta >= m:
        raise ValueError(f"need 0 <= delta < m, got delta={delta}, m={m}")
    ball = ball or _default_ball(f)
    if not allow_coarse:
        check_resolution(f, ball)
    tg = _resolve_grid(f, P, tg)
    theta = delta / m
    if theta > 0 and tg.t_min <= 0:
        raise ValueError("weighted differences need t_min > 0")
    times = tg.times
    weights = times ** -theta if theta > 0 else np.ones_like(times)
    f0 = field_values(f, ball)
    out = np.zeros(len(ball))
    for nsl, tsl, vals in sweep(f, P, ball, times, method):
        d = np.abs(vals - f0[nsl, None]) * weights[None, tsl]
        out[nsl] = np.maximum(out[nsl], d.max(axis=1))
    return SampledField(ball, out)


def support_band(f: SpectralFunction):
    r = f.radii
    return (float(r.min()), float(r.max())) if len(r) else (0.0, 0.0)


def perturbation_bound(f: SpectralFunction, P: Symbol, Q: Symbol, t: float,
                       ball: BallQuadrature | None = None, gap: float | None = None):
    """Taylor bound ``(e^{t gap} - 1) sum|f_hat| h^n`` and the measured sup difference.

    Returns ``(bound, measured)``; ``measured`` is the max over ball nodes of
    ``|e^{itP(D)}f - e^{itQ(D)}f|``.
    """
    if len(f) == 0:
        return 0.0, 0.0
    ball = ball or _default_ball(f)
    if gap is None:
        gap = perturbation_gap(P, Q, support_band(f), f.lattice.dim, points=f.frequencies)
    bound = math.expm1(abs(t) * gap) * f.l1_mass()
    diff = f.with_coefficients(
        f.coefficients * (np.exp(1j * t * P.evaluator(f.frequencies))
                          - np.exp(1j * t * Q.evaluator(f.frequencies))))
    measured = float(np.max(np.abs(field_values(diff, ball)))) if t != 0 else 0.0
    return bound, measured
