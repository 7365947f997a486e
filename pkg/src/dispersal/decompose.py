"""Sharp dyadic annuli and the finite-type sector split of each annulus.

Annuli are ``|xi| <= 1`` for ``k = 0`` and ``2^(k-1) < |xi| <= 2^k`` for
``k >= 1``. Membership is decided on squared radii against ``4^k`` so
points on a boundary circle are not moved by square-root rounding.

Within an annulus the sectors compare ``|xi_2|`` with ``|xi_1|^(m-1)`` at a
factor of 4, and the third sector is cut again by the dyadic size of
``|xi_1|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectral_core import SpectralFunction

SECTOR_FACTOR = 4.0


@dataclass(frozen=True)
class DyadicPiece:
    k: int
    piece: SpectralFunction


@dataclass(frozen=True)
class SectorPiece:
    k: int
    j: int
    piece: SpectralFunction
    l: Optional[int] = None


def dyadic_index(r2) -> np.ndarray:
    """Annulus index for squared radii: 0 inside the unit ball, else ceil(log4 r2)."""
    r2 = np.asarray(r2, dtype=float)
    k = np.zeros(r2.shape, dtype=np.int64)
    out = r2 > 1
    if np.any(out):
        kk = np.ceil(np.log2(r2[out]) / 2).astype(np.int64)
        # repair floating error at exact powers of four
        kk = np.where(4.0 ** (kk - 1) >= r2[out], kk - 1, kk)
        kk = np.where(4.0 ** kk < r2[out], kk + 1, kk)
        k[out] = kk
    return k


def dyadic_split(f: SpectralFunction) -> list[DyadicPiece]:
    """Partition ``f`` into annular pieces, ascending in ``k``; empty annuli are skipped."""
    r2 = np.sum(f.frequencies ** 2, axis=1)
    ks = dyadic_index(r2)
    return [DyadicPiece(int(k), f.restrict(ks == k)) for k in np.unique(ks)]


def _sector_labels(xi, k: int, m: float):
    a = np.abs(xi[:, 0])
    b = np.abs(xi[:, 1])
    ref = a ** (m - 1)
    j = np.full(len(xi), 2, dtype=np.int64)
    j[b > SECTOR_FACTOR * ref] = 1
    j[b < ref / SECTOR_FACTOR] = 3
    l = np.zeros(len(xi), dtype=np.int64)
    third = j == 3
    with np.errstate(divide="ignore"):
        raw = np.floor(np.log2(a[third])) + 1
    # |xi_1| < 1 would give l <= 0; those join the lowest bucket
    l[third] = np.clip(np.nan_to_num(raw, neginf=1), 1, k + 1).astype(np.int64)
    return j, l


def classify_sector(xi, k: int, m: float):
    """Return ``(j, l)`` for a single frequency; ``l`` is None unless ``j == 3``."""
    _check_m(m)
    j, l = _sector_labels(np.asarray(xi, dtype=float).reshape(1, 2), int(k), float(m))
    return int(j[0]), (int(l[0]) if j[0] == 3 else None)


def _check_m(m):
    if not m > 1:
        raise ValueError(f"sector split needs m > 1, got m={m}")


def sector_split(piece: DyadicPiece, m: float) -> list[SectorPiece]:
    """Split one annulus into sectors ``j = 1, 2`` and the buckets ``(3, l)``."""
    _check_m(m)
    if piece.k < 1:
        raise ValueError("sector split is defined for annuli with k >= 1")
    f = piece.piece
    if f.lattice.dim != 2:
        raise ValueError("sector split is two-dimensional")
    j, l = _sector_labels(f.frequencies, piece.k, float(m))
    out = []
    for jj in (1, 2):
        mask = j == jj
        if np.any(mask):
            out.append(SectorPiece(piece.k, jj, f.restrict(mask)))
    for ll in range(1, piece.k + 2):
        mask = (j == 3) & (l == ll)
        if np.any(mask):
            out.append(SectorPiece(piece.k, 3, f.restrict(mask), ll))
    return out


def reassemble(pieces) -> SpectralFunction:
    """Sum of pieces, for partition checks."""
    pieces = list(pieces)
    if not pieces:
        raise ValueError("nothing to reassemble")
    fs = [p.piece for p in pieces]
    lat = fs[0].lattice
    idx = np.concatenate([g.indices for g in fs])
    coef = np.concatenate([g.coefficients for g in fs])
    return SpectralFunction(lat, idx, coef)


def annulus_bounds(k: int) -> tuple[float, float]:
    return (0.0, 1.0) if k == 0 else (2.0 ** (k - 1), 2.0 ** k)


def weight_extremes(P, piece: SectorPiece) -> tuple[float, float]:
    """Min and max of ``|grad P|`` over the lattice points of a sector piece."""
    g = np.asarray(P.gradient(piece.piece.frequencies), dtype=float)
    mag = np.sqrt(np.sum(g * g, axis=1))
    return float(mag.min()), float(mag.max())


def sector_weight_shape(k: int, m: float) -> float:
    """The scale ``min(2^(k/2), 2^(k/(2(m-1))))`` expected for the sector ratio test."""
    return min(2 ** (k / 2), 2 ** (k / (2 * (m - 1))))


__all__ = [
    "DyadicPiece", "SectorPiece", "dyadic_index", "dyadic_split", "sector_split",
    "classify_sector", "reassemble", "annulus_bounds", "weight_extremes",
    "sector_weight_shape", "SECTOR_FACTOR",
]
