"""Frequency lattices, band-limited functions and the norms used on them.

Every Fourier integral over R^n is replaced by a Riemann sum over a uniform
lattice ``h * Z^n`` truncated at ``|xi_i| <= cutoff``, with cell weight ``h**n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SPACING = 0.5


@dataclass(frozen=True)
class FrequencyLattice:
    dim: int
    spacing: float
    cutoff: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if not self.spacing > 0 or not self.cutoff > 0:
            raise ValueError("spacing and cutoff must be positive")
        if self.spacing > math.pi / 2:
            raise ValueError(f"spacing {self.spacing} exceeds pi/2")
        ratio = self.cutoff / self.spacing
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError("cutoff must be an integer multiple of spacing")
        if round(ratio) < 1:
            raise ValueError("cutoff must be at least one spacing")

    @property
    def half_width(self) -> int:
        """Largest integer index along an axis."""
        return int(round(self.cutoff / self.spacing))

    @property
    def points_per_axis(self) -> int:
        return 2 * self.half_width + 1

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def all_indices(self) -> np.ndarray:
        K = self.half_width
        axes = [np.arange(-K, K + 1)] * self.dim
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def frequencies(self, indices) -> np.ndarray:
        return np.asarray(indices, dtype=float) * self.spacing

    def contains(self, indices) -> np.ndarray:
        idx = np.atleast_2d(np.asarray(indices))
        return np.all(np.abs(idx) <= self.half_width, axis=1)


def make_lattice(dim: int, spacing: float = DEFAULT_SPACING, cutoff: float = 8.0) -> FrequencyLattice:
    return FrequencyLattice(int(dim), float(spacing), float(cutoff))


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


class SpectralFunction:
    """A finitely supported coefficient map ``xi -> f_hat(xi)`` on a lattice.

    Coefficients are stored sparsely as integer lattice indices plus complex
    amplitudes. Duplicate indices are summed; explicit zeros are kept so that
    a support set can be carried around even where the amplitude vanishes.
    """

    __slots__ = ("lattice", "indices", "coefficients")

    def __init__(self, lattice: FrequencyLattice, indices, coefficients):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, lattice.dim)
        coef = np.asarray(coefficients, dtype=complex).reshape(-1)
        if idx.shape[0] != coef.shape[0]:
            raise ValueError("indices and coefficients differ in length")
        if idx.size and not np.all(lattice.contains(idx)):
            raise ValueError("index outside the lattice")
        if idx.shape[0] > 1:
            uniq, inv = np.unique(idx, axis=0, return_inverse=True)
            if uniq.shape[0] != idx.shape[0]:
                summed = np.zeros(uniq.shape[0], dtype=complex)
                np.add.at(summed, inv.ravel(), coef)
                idx, coef = uniq, summed
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "coefficients", _frozen(coef))

    def __setattr__(self, name, value):
        raise AttributeError("SpectralFunction is immutable")

    def __len__(self):
        return self.indices.shape[0]

    def __repr__(self):
        return f"SpectralFunction(dim={self.lattice.dim}, h={self.lattice.spacing}, modes={len(self)})"

    @classmethod
    def zero(cls, lattice):
        return cls(lattice, np.zeros((0, lattice.dim), dtype=np.int64), [])

    @classmethod
    def from_frequencies(cls, lattice, freqs, coefficients):
        """Build from frequency points, which must sit on the lattice."""
        freqs = np.asarray(freqs, dtype=float).reshape(-1, lattice.dim)
        idx = np.rint(freqs / lattice.spacing)
        if not np.allclose(idx * lattice.spacing, freqs, rtol=0, atol=1e-9 * lattice.spacing):
            raise ValueError("frequency not on the lattice")
        return cls(lattice, idx.astype(np.int64), coefficients)

    @property
    def frequencies(self) -> np.ndarray:
        return self.indices * self.lattice.spacing

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(np.sum(self.frequencies ** 2, axis=1))

    def restrict(self, mask) -> "SpectralFunction":
        mask = np.asarray(mask, dtype=bool)
        return SpectralFunction(self.lattice, self.indices[mask], self.coefficients[mask])

    def with_coefficients(self, coefficients) -> "SpectralFunction":
        return SpectralFunction(self.lattice, self.indices, coefficients)

    def scale(self, alpha) -> "SpectralFunction":
        return self.with_coefficients(alpha * self.coefficients)

    def add(self, other: "SpectralFunction", alpha=1.0, beta=1.0) -> "SpectralFunction":
        if other.lattice != self.lattice:
            raise ValueError("lattices differ")
        idx = np.concatenate([self.indices, other.indices])
        coef = np.concatenate([alpha * self.coefficients, beta * other.coefficients])
        return SpectralFunction(self.lattice, idx, coef)

    def modulate(self, x0) -> "SpectralFunction":
        """Multiply coefficients by ``exp(i x0 . xi)``; translates physical space by ``x0``."""
        x0 = np.asarray(x0, dtype=float).reshape(self.lattice.dim)
        return self.with_coefficients(self.coefficients * np.exp(1j * self.frequencies @ x0))

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in k): complex(c) for k, c in zip(self.indices, self.coefficients)}

    def l1_mass(self) -> float:
        """``sum |f_hat| h^n``, the trivial sup-norm bound of the synthesized function."""
        return float(np.sum(np.abs(self.coefficients)) * self.lattice.cell_volume)


def synthesize_points(f: SpectralFunction, points) -> np.ndarray:
    """Direct sum ``sum_xi exp(i x.xi) f_hat(xi) h^n`` at each row of ``points``."""
    X = np.asarray(points, dtype=float).reshape(-1, f.lattice.dim)
    out = np.empty(X.shape[0], dtype=complex)
    if len(f) == 0:
        out[:] = 0
        return out
    xi = f.frequencies
    w = f.coefficients * f.lattice.cell_volume
    step = max(1, int(4_000_000 // max(1, len(f))))
    for s in range(0, X.shape[0], step):
        out[s:s + step] = np.exp(1j * (X[s:s + step] @ xi.T)) @ w
    return out


def synthesize(f: SpectralFunction, x) -> complex:
    return complex(synthesize_points(f, np.asarray(x, dtype=float)[None, :])[0])


def l2_norm(f: SpectralFunction) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coefficients) ** 2) * f.lattice.cell_volume))


def sobolev_norm(f: SpectralFunction, s: float) -> float:
    weight = (1.0 + np.sum(f.frequencies ** 2, axis=1)) ** s
    return float(np.sqrt(np.sum(weight * np.abs(f.coefficients) ** 2) * f.lattice.cell_volume))


@dataclass(frozen=True)
class BallQuadrature:
    """Midpoint rule on the uniform grid ``center + spacing * Z^n`` clipped to a ball."""

    center: tuple
    radius: float = 1.0
    spacing: float = 0.05
    _nodes: np.ndarray = field(init=False, repr=False, compare=False)
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.spacing > 0 or not self.radius > 0:
            raise ValueError("ball radius and spacing must be positive")
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)
        n = len(c)
        J = int(math.floor(self.radius / self.spacing + 1e-12))
        axes = [np.arange(-J, J + 1)] * n
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        r2 = np.sum((grid * self.spacing) ** 2, axis=1)
        offsets = grid[r2 <= self.radius ** 2 * (1 + 1e-12)]
        offsets.setflags(write=False)
        nodes = np.asarray(c) + offsets * self.spacing
        nodes.setflags(write=False)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_nodes", nodes)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def offsets(self) -> np.ndarray:
        """Integer grid offsets of the nodes relative to the center."""
        return self._offsets

    @property
    def weight(self) -> float:
        return self.spacing ** self.dim

    @property
    def measure(self) -> float:
        return len(self._nodes) * self.weight

    def __len__(self):
        return len(self._nodes)


def default_ball_spacing(cutoff: float) -> float:
    return min(2 * math.pi / (10 * cutoff), 0.05)


def unit_ball(dim: int = 2, spacing: float = 0.05, center=None) -> BallQuadrature:
    if center is None:
        center = (0.0,) * dim
    return BallQuadrature(tuple(center), 1.0, spacing)


@dataclass(frozen=True, eq=False)
class SampledField:
    ball: BallQuadrature
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values)
        if v.shape != (len(self.ball),):
            raise ValueError("one value per node required")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def nodes(self) -> np.ndarray:
        return self.ball.nodes

    def __len__(self):
        return len(self.values)


def lp_ball_norm(field: SampledField, p) -> float:
    v = np.abs(field.values)
    if p == math.inf or p == "inf":
        return float(v.max()) if v.size else 0.0
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((np.sum(v ** p) * field.ball.weight) ** (1.0 / p))
