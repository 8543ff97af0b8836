"""Dyadic cubes of ``[0,1]^d`` at controlled distance from the diagonal."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WhitneyCube:
    """Cube ``2^{-m} [0,1]^d + n + (k, ..., k)`` stored by integer indices.

    ``n_index`` and ``k_index`` are the entries of ``n`` and ``k`` in units of
    ``2^{-m}``; at least one ``n_index`` entry is zero.
    """

    m: int
    n_index: tuple
    k_index: int
    K: int

    @property
    def side(self) -> float:
        return 2.0 ** (-self.m)

    @property
    def n(self) -> np.ndarray:
        return np.array(self.n_index, dtype=float) * self.side

    @property
    def k(self) -> float:
        return self.k_index * self.side

    @property
    def lower(self) -> np.ndarray:
        return self.n + self.k

    @property
    def distance(self) -> float:
        return diagonal_distance(self.lower[None, :], self.side)[0]


def diagonal_distance(lower: np.ndarray, side: float) -> np.ndarray:
    """Max-norm distance from cubes ``lower + side [0,1]^d`` to the line ``R (1, ..., 1)``.

    ``min_{x, t} max_j |x_j - t|`` over the cube equals
    ``max(0, (max_j a_j - min_j b_j) / 2)`` with ``b = a + side``.
    """
    lower = np.atleast_2d(lower)
    gap = lower.max(axis=1) - (lower.min(axis=1) + side)
    return np.maximum(0.0, gap / 2)


def point_diagonal_distance(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return (x.max(axis=1) - x.min(axis=1)) / 2


def whitney_cubes(K: int, m_min: int, m_max: int, d: int) -> list[WhitneyCube]:
    """All level ``m`` dyadic cubes of ``[0,1]^d`` with ``2^{K-m} <= dist <= 2^{2K-m}``."""
    if m_min < K:
        raise ValueError(f"m_min={m_min} must be at least K={K}")
    out = []
    for m in range(m_min, m_max + 1):
        h = 2.0 ** (-m)
        idx = np.array(list(itertools.product(range(2**m), repeat=d)), dtype=np.int64)
        dist = diagonal_distance(idx * h, h)
        keep = (dist >= 2.0 ** (K - m)) & (dist <= 2.0 ** (2 * K - m))
        for row in idx[keep]:
            k = int(row.min())
            out.append(WhitneyCube(m, tuple(int(v) for v in row - k), k, K))
    return out


@dataclass(frozen=True)
class WhitneyAudit:
    cubes: int
    distance_violations: int
    uncovered_samples: int
    samples_checked: int
    max_overlap: int
    inner_band: tuple


def whitney_audit(cubes: list[WhitneyCube], K: int, m_min: int, m_max: int, d: int,
                  samples_per_axis: int = 200) -> WhitneyAudit:
    """Distance bounds, coverage of the distance band, and pointwise overlap counts.

    Coverage is checked for sample points with distance in
    ``[(2^K + 1) 2^{-m_max}, 2^{2K - m_min}]``: below that a point may sit in a
    level-``m_max`` cube that is itself too close to the diagonal.
    """
    bad = 0
    for c in cubes:
        dist = c.distance
        if not (2.0 ** (K - c.m) <= dist <= 2.0 ** (2 * K - c.m)):
            bad += 1
    g = (np.arange(samples_per_axis) + 0.5) / samples_per_axis
    pts = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)
    rho = point_diagonal_distance(pts)
    lo_band = (2.0**K + 1) * 2.0 ** (-m_max)
    hi_band = 2.0 ** (2 * K - m_min)
    counts = np.zeros(len(pts), dtype=np.int64)
    by_level: dict = {}
    for c in cubes:
        by_level.setdefault(c.m, set()).add(tuple(int(v) + c.k_index for v in c.n_index))
    for m, keys in by_level.items():
        cell = np.minimum(np.floor(pts * 2**m).astype(np.int64), 2**m - 1)
        counts += np.fromiter((tuple(r) in keys for r in cell), dtype=bool, count=len(cell))
    band = (rho >= lo_band) & (rho <= hi_band)
    return WhitneyAudit(
        cubes=len(cubes),
        distance_violations=bad,
        uncovered_samples=int(np.sum(band & (counts == 0))),
        samples_checked=int(np.sum(band)),
        max_overlap=int(counts.max()) if counts.size else 0,
        inner_band=(lo_band, hi_band),
    )
