"""Oscillatory integrals of indicator data over unions of frequency boxes.

``continuum_evolve`` computes ``int_A exp(i x.xi + i t P(xi)) dxi`` with
tensor Gauss-Legendre panels. Panels are sized so the phase changes by at
most pi/4 across each panel, then halved until two successive answers agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral_core import FrequencyLattice, SpectralFunction
from .symbols import Symbol

GL_ORDER = 8
PANEL_PHASE = math.pi / 4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class RectangleSet:
    """Finite union of pairwise-disjoint axis-aligned boxes ``[a_i, b_i]``."""

    boxes: tuple

    def __post_init__(self):
        boxes = tuple(tuple((float(a), float(b)) for a, b in box) for box in self.boxes)
        if not boxes:
            raise ValueError("empty rectangle set")
        n = len(boxes[0])
        for box in boxes:
            if len(box) != n:
                raise ValueError("boxes of mixed dimension")
            if any(not b > a for a, b in box):
                raise ValueError(f"degenerate box {box}")
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                if all(min(b1, b2) > max(a1, a2)
                       for (a1, b1), (a2, b2) in zip(boxes[i], boxes[j])):
                    raise ValueError(f"boxes {i} and {j} overlap")
        object.__setattr__(self, "boxes", boxes)

    @property
    def dim(self) -> int:
        return len(self.boxes[0])

    @property
    def area(self) -> float:
        return float(sum(math.prod(b - a for a, b in box) for box in self.boxes))

    def __len__(self):
        return len(self.boxes)


def _axis_cells(a, b, h, mode):
    if mode == "center":
        k = np.arange(math.ceil(a / h - 1e-9), math.floor(b / h + 1e-9) + 1)
        return k, np.ones(len(k))
    k = np.arange(math.ceil(a / h - 0.5 - 1e-9), math.floor(b / h + 0.5 + 1e-9) + 1)
    c = k * h
    w = np.clip(np.minimum(c + h / 2, b) - np.maximum(c - h / 2, a), 0.0, None) / h
    keep = w > 1e-12
    return k[keep], w[keep]


def rasterize(A: RectangleSet, lattice: FrequencyLattice, mode: str = "fraction") -> SpectralFunction:
    """Lattice version of the indicator of ``A``.

    ``mode="fraction"`` gives each lattice point the fraction of its cell
    ``xi + [-h/2, h/2]^n`` covered by ``A``, so the coefficient mass equals the
    area exactly. ``mode="center"`` puts weight 1 on every point lying in a
    closed box.
    """
    if mode not in ("fraction", "center"):
        raise ValueError(f"unknown rasterization mode {mode!r}")
    h = lattice.spacing
    chunks, weights = [], []
    for box in A.boxes:
        axes = [_axis_cells(a, b, h, mode) for a, b in box]
        if any(len(k) == 0 for k, _ in axes):
            continue
        grid = np.meshgrid(*[k for k, _ in axes], indexing="ij")
        w = axes[0][1]
        for _, wa in axes[1:]:
            w = np.multiply.outer(w, wa)
        chunks.append(np.stack([g.ravel() for g in grid], axis=1))
        weights.append(w.ravel())
    if not chunks:
        return SpectralFunction.zero(lattice)
    return SpectralFunction(lattice, np.concatenate(chunks), np.concatenate(weights))


def panel_rule(a: float, b: float, panels: int):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def panels_for(max_slope: float, length: float) -> int:
    return max(1, math.ceil(max_slope * length / PANEL_PHASE))


def _signs(P: Symbol, n: int):
    return (1.0,) * n if P.axis_signs == () else P.axis_signs


def _axis_integral(x, t, sign, a, b, panels):
    """``int_a^b exp(i x s + i t sign s^2) ds`` for arrays x (N,) and t (M,) -> (N, M)."""
    s, w = panel_rule(a, b, panels)
    left = np.exp(1j * np.outer(x, s)) * w[None, :]
    right = np.exp(1j * sign * np.outer(s * s, t))
    return left @ right


def _axis_panels(x, t, sign, a, b):
    slope = float(np.max(np.abs(x))) + 2 * float(np.max(np.abs(t))) * max(abs(a), abs(b))
    return panels_for(slope, b - a)


def _converged(prev, cur, tol, scale):
    return abs(cur - prev) <= tol * max(abs(cur), 1e-8 * scale)


def _axis_adaptive(x, t, sign, a, b, tol, max_refine):
    n = _axis_panels(np.array([x]), np.array([t]), sign, a, b)
    prev = _axis_integral(np.array([x]), np.array([t]), sign, a, b, n)[0, 0]
    for _ in range(max_refine):
        n *= 2
        cur = _axis_integral(np.array([x]), np.array([t]), sign, a, b, n)[0, 0]
        if _converged(prev, cur, tol, b - a):
            return cur
        prev = cur
    raise QuadratureError(
        f"1-D panel quadrature on [{a}, {b}] did not converge (x={x}, t={t}, panels={n})")


def _box_slopes(P: Symbol, box, x, t, samples=16):
    """Upper estimates of ``|x_i + t dP/dxi_i|`` over the box, by midpoint sampling."""
    axes = [a + (np.arange(samples) + 0.5) * (b - a) / samples for a, b in box]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    if t != 0:
        with np.errstate(all="ignore"):
            g = np.nan_to_num(np.asarray(P.gradient(grid), dtype=float))
    else:
        g = np.zeros_like(grid)
    slope = np.abs(np.asarray(x)[None, :] + t * g).max(axis=0)
    # midpoint sampling misses up to half a sub-cell of variation
    return 1.25 * slope


def _box_tensor(P: Symbol, box, x, t, panels):
    rules = [panel_rule(a, b, n) for (a, b), n in zip(box, panels)]
    nodes = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    weights = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    pts = np.stack([g.ravel() for g in nodes], axis=1)
    w = np.prod(np.stack([g.ravel() for g in weights], axis=1), axis=1)
    phase = pts @ np.asarray(x) + (t * P.evaluator(pts) if t != 0 else 0.0)
    return complex(np.sum(np.exp(1j * phase) * w))


def _box_adaptive(P, box, x, t, tol, max_refine):
    slopes = _box_slopes(P, box, x, t)
    panels = [panels_for(s, b - a) for s, (a, b) in zip(slopes, box)]
    prev = _box_tensor(P, box, x, t, panels)
    scale = math.prod(b - a for a, b in box)
    for _ in range(max_refine):
        panels = [2 * p for p in panels]
        cur = _box_tensor(P, box, x, t, panels)
        if _converged(prev, cur, tol, scale):
            return cur
        prev = cur
    raise QuadratureError(f"panel quadrature on box {box} did not converge "
                          f"(x={tuple(x)}, t={t}, panels={panels})")


def continuum_evolve(A: RectangleSet, P: Symbol, x, t: float, tol: float = 1e-6,
                     max_refine: int = 8, separable: bool | None = None) -> complex:
    """``int_A exp(i x.xi + i t P(xi)) dxi``.

    Separable quadratic symbols factor into per-axis 1-D integrals unless
    ``separable=False`` forces the tensor-product path.
    """
    x = np.asarray(x, dtype=float).reshape(A.dim)
    P.check_dim(A.dim)
    use_sep = P.separable if separable is None else (separable and P.separable)
    total = 0j
    if use_sep:
        signs = _signs(P, A.dim)
        cache = {}
        for box in A.boxes:
            prod = 1 + 0j
            for axis, (a, b) in enumerate(box):
                key = (axis, a, b)
                if key not in cache:
                    cache[key] = _axis_adaptive(x[axis], t, signs[axis], a, b, tol, max_refine)
                prod *= cache[key]
            total += prod
        return total
    for box in A.boxes:
        total += _box_adaptive(P, box, x, t, tol, max_refine)
    return total


def continuum_evolve_grid(A: RectangleSet, P: Symbol, X, T) -> np.ndarray:
    """Batched separable evaluation at every pair of points ``X`` (N, n) and times ``T`` (M,).

    Panels are sized for the worst phase slope over the whole batch. Boxes
    sharing their first-axis interval reuse that factor.
    """
    if not P.separable:
        raise ValueError(f"batched continuum path needs a separable symbol, got {P.name}")
    X = np.asarray(X, dtype=float).reshape(-1, A.dim)
    T = np.asarray(T, dtype=float).reshape(-1)
    signs = _signs(P, A.dim)
    factors = {}

    def factor(axis, a, b):
        key = (axis, a, b)
        if key not in factors:
            n = _axis_panels(X[:, axis], T, signs[axis], a, b)
            factors[key] = _axis_integral(X[:, axis], T, signs[axis], a, b, n)
        return factors[key]

    groups = {}
    for box in A.boxes:
        groups.setdefault(box[0], []).append(box)
    total = np.zeros((X.shape[0], T.shape[0]), dtype=complex)
    for (a0, b0), boxes in groups.items():
        rest = np.zeros_like(total)
        for box in boxes:
            prod = np.ones_like(total)
            for axis in range(1, A.dim):
                prod = prod * factor(axis, *box[axis])
            rest += prod
        total += factor(0, a0, b0) * rest
    return total
