"""Phase functions P(xi) of the propagators e^{itP(D)}.

All evaluators are vectorized: they take an array of shape ``(N, n)`` and
return ``(N,)`` values, or ``(N, n)`` gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fitting import fit_exponent

SCAN_RADIAL = 4096
SCAN_ANGULAR = 4096


class DomainError(ValueError):
    """Gradient requested at a point where the symbol is not differentiable."""


@dataclass(frozen=True)
class Symbol:
    name: str
    growth_exponent: float
    growth_constant: float
    evaluator: Callable
    gradient: Callable
    singular: Optional[Callable] = None
    dim: Optional[int] = None
    # P = sum_i axis_signs[i] * xi_i**2 when set; enables per-axis factorization
    axis_signs: Optional[tuple] = None

    def __call__(self, xi):
        return evaluate(self, xi)

    @property
    def separable(self) -> bool:
        return self.axis_signs is not None

    def check_dim(self, n: int):
        if self.dim is not None and n != self.dim:
            raise ValueError(f"symbol {self.name} is defined for n={self.dim}, got n={n}")
        if self.axis_signs is not None and len(self.axis_signs) not in (0, n):
            raise ValueError(f"symbol {self.name} has {len(self.axis_signs)} axes, got n={n}")


def _points(xi):
    a = np.asarray(xi, dtype=float)
    return a.reshape(-1, a.shape[-1]) if a.ndim else a.reshape(1, 1)


def evaluate(P: Symbol, xi):
    """Value of ``P`` at one point (returns a float) or at rows of an array."""
    a = np.asarray(xi, dtype=float)
    pts = _points(a)
    P.check_dim(pts.shape[1])
    vals = np.asarray(P.evaluator(pts), dtype=float)
    return float(vals[0]) if a.ndim <= 1 else vals.reshape(a.shape[:-1])


def grad(P: Symbol, xi):
    a = np.asarray(xi, dtype=float)
    pts = _points(a)
    P.check_dim(pts.shape[1])
    if P.singular is not None and np.any(P.singular(pts)):
        raise DomainError(f"gradient of {P.name} undefined at {pts[P.singular(pts)][0]}")
    g = np.asarray(P.gradient(pts), dtype=float)
    return g[0] if a.ndim <= 1 else g.reshape(a.shape)


def _r2(x):
    return np.sum(x * x, axis=1)


def _origin(x):
    return _r2(x) == 0


def elliptic() -> Symbol:
    return Symbol(
        "elliptic", 2.0, 1.0,
        evaluator=_r2,
        gradient=lambda x: 2 * x,
        axis_signs=(),
    )


def fractional(alpha: float) -> Symbol:
    alpha = float(alpha)
    if not alpha > 1:
        raise ValueError("fractional symbol needs alpha > 1")

    def g(x):
        r = np.sqrt(_r2(x))
        return alpha * (r ** (alpha - 2))[:, None] * x

    return Symbol(f"fractional:{_fmt(alpha)}", alpha, 1.0,
                  evaluator=lambda x: _r2(x) ** (alpha / 2), gradient=g, singular=_origin)


def nonelliptic(dim: int = 2) -> Symbol:
    signs = tuple(1.0 if i % 2 == 0 else -1.0 for i in range(dim))
    s = np.asarray(signs)
    return Symbol(
        "nonelliptic", 2.0, 1.0,
        evaluator=lambda x: (x * x) @ s[: x.shape[1]],
        gradient=lambda x: 2 * x * s[: x.shape[1]],
        dim=dim,
        axis_signs=signs,
    )


def boussinesq() -> Symbol:
    def g(x):
        r2 = _r2(x)
        r = np.sqrt(r2)
        return ((1 + 2 * r2) / (np.sqrt(1 + r2) * r))[:, None] * x

    return Symbol("boussinesq", 2.0, math.sqrt(2.0),
                  evaluator=lambda x: np.sqrt(_r2(x) * (1 + _r2(x))),
                  gradient=g, singular=_origin)


def beam() -> Symbol:
    def g(x):
        r2 = _r2(x)
        return (2 * r2 / np.sqrt(1 + r2 * r2))[:, None] * x

    return Symbol("beam", 2.0, math.sqrt(2.0),
                  evaluator=lambda x: np.sqrt(1 + _r2(x) ** 2), gradient=g)


def finite_type(m: float) -> Symbol:
    """``xi1*xi2 + h_m(xi1)``; ``h_m = xi1**m/m`` for integer m, ``|xi1|**m/m`` for 1<m<2."""
    m = float(m)
    integer = m >= 1 and m == int(m)
    if not integer and not 1 < m < 2:
        raise ValueError("finite-type symbol needs integer m >= 1 or 1 < m < 2")

    if integer:
        k = int(m)

        def h(s):
            return s ** k / m

        def dh(s):
            return s ** (k - 1) if k > 1 else np.ones_like(s)

        singular = None
    else:
        def h(s):
            return np.abs(s) ** m / m

        def dh(s):
            return np.sign(s) * np.abs(s) ** (m - 1)

        def singular(x):
            return x[:, 0] == 0

    def ev(x):
        return x[:, 0] * x[:, 1] + h(x[:, 0])

    def g(x):
        return np.stack([x[:, 1] + dh(x[:, 0]), x[:, 0]], axis=1)

    return Symbol(f"pm:{_fmt(m)}", max(m, 2.0), 0.5 + 1.0 / m,
                  evaluator=ev, gradient=g, singular=singular, dim=2)


def constant(c: float) -> Symbol:
    c = float(c)
    return Symbol(f"constant:{_fmt(c)}", 0.0, abs(c),
                  evaluator=lambda x: np.full(x.shape[0], c),
                  gradient=lambda x: np.zeros_like(x))


def _fmt(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(v)


def parse_symbol(name: str, dim: int = 2) -> Symbol:
    """Resolve a CLI symbol name such as ``pm:1.5`` or ``boussinesq``."""
    head, _, arg = name.partition(":")
    simple = {"elliptic": elliptic, "boussinesq": boussinesq, "beam": beam}
    if head in simple and not arg:
        return simple[head]()
    if head == "nonelliptic" and not arg:
        return nonelliptic(dim)
    if head in ("fractional", "pm") and arg:
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"malformed symbol parameter in {name!r}") from None
        return fractional(value) if head == "fractional" else finite_type(value)
    raise ValueError(f"unknown symbol {name!r}")


def scan_directions(dim: int, angular: int = SCAN_ANGULAR) -> np.ndarray:
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        th = 2 * np.pi * np.arange(angular) / angular
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    # Fibonacci sphere
    i = np.arange(angular) + 0.5
    z = 1 - 2 * i / angular
    phi = np.pi * (1 + 5 ** 0.5) * i
    rho = np.sqrt(1 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _band_scan(fn, band, dim, radial, angular):
    r_min, r_max = map(float, band)
    if r_min < 0:
        raise ValueError("band radii must be nonnegative")
    if r_max < r_min:
        raise ValueError("empty band")
    radii = np.array([r_min]) if r_max == r_min else np.linspace(r_min, r_max, radial + 1)
    dirs = scan_directions(dim, angular)
    best = 0.0
    chunk = max(1, 2_000_000 // len(dirs))
    for s in range(0, len(radii), chunk):
        pts = (radii[s:s + chunk, None, None] * dirs[None, :, :]).reshape(-1, dim)
        best = max(best, float(np.max(fn(pts))))
    return best


_gap_cache: dict = {}


def perturbation_gap(P: Symbol, Q: Symbol, band, dim: int = 2, points=None,
                     radial: int = SCAN_RADIAL, angular: int = SCAN_ANGULAR) -> float:
    """``sup |P - Q|`` over ``{r_min <= |xi| <= r_max}``.

    The sup is taken over a radial x angular scan plus, when given, the
    lattice ``points`` lying in the band, so the result dominates the gap on
    any lattice function supported there.
    """
    if band[0] < 0 or band[1] < band[0]:
        raise ValueError(f"invalid band {band}")
    if P.name == Q.name:
        return 0.0
    key = (P.name, Q.name, tuple(map(float, band)), dim, radial, angular)
    if key not in _gap_cache:
        _gap_cache[key] = _band_scan(
            lambda x: np.abs(P.evaluator(x) - Q.evaluator(x)), band, dim, radial, angular)
    gap = _gap_cache[key]
    if points is not None:
        pts = np.asarray(points, dtype=float).reshape(-1, dim)
        r = np.sqrt(_r2(pts))
        sel = pts[(r >= band[0]) & (r <= band[1])]
        if len(sel):
            gap = max(gap, float(np.max(np.abs(P.evaluator(sel) - Q.evaluator(sel)))))
    return gap


def band_max(P: Symbol, band, dim: int = 2, radial: int = SCAN_RADIAL,
             angular: int = SCAN_ANGULAR) -> float:
    return _band_scan(lambda x: np.abs(P.evaluator(x)), band, dim, radial, angular)


def growth_check(P: Symbol, cutoffs, dim: int = 2, radial: int = 1024,
                 angular: int = SCAN_ANGULAR) -> float:
    """Fitted exponent of ``max_{1<=|xi|<=X} |P|`` against ``X``."""
    cutoffs = list(cutoffs)
    if len(cutoffs) < 3:
        raise ValueError("growth_check needs at least 3 cutoffs")
    series = [(X, band_max(P, (1.0, X), dim, radial, angular)) for X in cutoffs]
    return fit_exponent(series)[0]
