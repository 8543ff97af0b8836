"""Density-comparable intervals, the sum map and the geometric-inequality ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..curves import CurveLike, affine_density, as_polynomial, torsion_polynomial, torsion_scalar
from ..errors import DomainError

COMPARABILITY = 2.0  # lambda in [c/2, 2c] on an interval
INTERVAL_SAMPLES = 17


@dataclass(frozen=True)
class DyadicInterval:
    """Interval ``[a, b]`` on which ``lambda ~ c`` and ``c * (b - a) ~ 2^m``."""

    a: float
    b: float
    m: int
    c: float

    @property
    def length(self) -> float:
        return self.b - self.a

    def contains(self, t) -> np.ndarray:
        """Half-open membership ``a <= t < b`` so that lattice tilings partition nodes."""
        t = np.asarray(t)
        return (t >= self.a) & (t < self.b)


def curve_sum(curve: CurveLike, ts: Sequence[float]) -> np.ndarray:
    """``gamma(t_1) + ... + gamma(t_d)``."""
    poly = as_polynomial(curve)
    return np.sum(poly(np.asarray(ts, dtype=float)), axis=0)


def geom_ineq_ratio(curve: CurveLike, ts: Sequence[float]) -> float:
    """``|det(gamma'(t_j))| / (prod |L(t_j)|^{1/d} prod_{i<j} |t_i - t_j|)``."""
    poly = as_polynomial(curve)
    d = poly.dim
    ts = [float(t) for t in ts]
    if len(ts) != d:
        raise ValueError(f"need {d} parameters, got {len(ts)}")
    vdm = 1.0
    for i in range(d):
        for j in range(i + 1, d):
            if ts[i] == ts[j]:
                raise DomainError(f"coordinates t_{i + 1} and t_{j + 1} coincide at {ts[i]}")
            vdm *= abs(ts[i] - ts[j])
    tors = 1.0
    for j, t in enumerate(ts):
        L = abs(torsion_scalar(poly, t))
        if L == 0:
            raise DomainError(f"torsion vanishes at t_{j + 1} = {t}")
        tors *= L ** (1.0 / d)
    cols = poly.derivative(1)(np.array(ts)).T
    return abs(float(np.linalg.det(cols))) / (tors * vdm)


def monotone_pieces(curve: CurveLike, lo: float, hi: float) -> list[tuple[float, float]]:
    """Split ``[lo, hi]`` at real zeros of ``L`` and critical points of ``L^2``."""
    P = np.polynomial.polynomial
    L = torsion_polynomial(curve)
    cuts = set()
    for poly in (L, P.polyder(P.polymul(L, L))):
        poly = P.polytrim(np.atleast_1d(poly), tol=0)
        if poly.size > 1 and np.any(poly[1:]):
            for r in P.polyroots(poly):
                if abs(r.imag) < 1e-9 and lo < r.real < hi:
                    cuts.add(round(float(r.real), 12) + 0.0)
    pts = [lo, *sorted(cuts), hi]
    return [(a, b) for a, b in zip(pts, pts[1:]) if b > a]


@lru_cache(maxsize=8)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def lambda_mass(curve: CurveLike, a: float, b: float, order: int = 24) -> float:
    """``int_a^b lambda`` by Gauss-Legendre; cusps at torsion zeros only sit at endpoints."""
    x, w = _gauss_legendre(order)
    t = (a + b) / 2 + (b - a) / 2 * x
    return float((b - a) / 2 * np.sum(w * affine_density(curve, t)))


def lambda_masses(curve: CurveLike, a, b, order: int = 24) -> np.ndarray:
    """Vectorised :func:`lambda_mass` over interval endpoint arrays."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    x, w = _gauss_legendre(order)
    t = (a + b)[:, None] / 2 + (b - a)[:, None] / 2 * x[None, :]
    return (b - a) / 2 * (affine_density(curve, t) @ w)


class _LatticeDensity:
    """``lambda`` on a lattice refined ``sub`` times, so interval extrema are nested."""

    def __init__(self, curve: CurveLike, lo: float, hi: float, n: int, sub: int = 8):
        self.grid = lo + (hi - lo) * np.arange(n + 1) / n
        self.grid[-1] = hi
        self.sub = sub
        fine = lo + (hi - lo) * np.arange(n * sub + 1) / (n * sub)
        lam = affine_density(curve, fine)
        self.lam = lam

    def classify(self, i: int, j: int) -> DyadicInterval | None:
        lam = self.lam[i * self.sub : j * self.sub + 1]
        lmin, lmax = float(lam.min()), float(lam.max())
        if lmin <= 0 or lmax > COMPARABILITY**2 * lmin:
            return None
        a, b = float(self.grid[i]), float(self.grid[j])
        c = math.sqrt(lmin * lmax)
        return DyadicInterval(a, b, int(round(math.log2(c * (b - a)))), c)


def classify_interval(curve: CurveLike, a: float, b: float,
                      samples: int = INTERVAL_SAMPLES) -> DyadicInterval | None:
    """Return the interval's class if ``max lambda / min lambda <= 4`` on its samples."""
    lam = affine_density(curve, np.linspace(a, b, samples))
    lmin, lmax = float(lam.min()), float(lam.max())
    if lmin <= 0 or lmax > COMPARABILITY**2 * lmin:
        return None
    c = math.sqrt(lmin * lmax)
    m = int(round(math.log2(c * (b - a))))
    return DyadicInterval(float(a), float(b), m, c)


def _valid_at_level(iv: DyadicInterval | None, m: int) -> bool:
    if iv is None:
        return False
    mass = iv.c * iv.length
    return 2.0 ** (m - 1) <= mass <= 2.0 ** (m + 1)


def _lattice_size(domain, step) -> int:
    lo, hi = domain
    if not hi > lo or not step > 0:
        raise ValueError("need a non-degenerate domain and a positive step")
    return max(1, int(round((hi - lo) / step)))


def enumerate_intervals(curve: CurveLike, domain: tuple[float, float], m: int,
                        step: float) -> list[DyadicInterval]:
    """Left-to-right tiling of ``domain`` by the shortest valid level-``m`` lattice intervals.

    From the current left endpoint the shortest lattice interval satisfying
    both class conditions is taken; if none exists the endpoint advances by
    one lattice step.
    """
    n = _lattice_size(domain, step)
    dens = _LatticeDensity(curve, domain[0], domain[1], n)
    out = []
    i = 0
    while i < n:
        chosen = None
        for j in range(i + 1, n + 1):
            iv = dens.classify(i, j)
            if iv is None:
                break  # comparability only worsens as the interval grows
            if _valid_at_level(iv, m):
                chosen = (j, iv)
                break
        if chosen is None:
            i += 1
            continue
        j, iv = chosen
        out.append(DyadicInterval(iv.a, iv.b, m, iv.c))
        i = j
    return out


def candidate_intervals(curve: CurveLike, domain: tuple[float, float],
                        step: float) -> list[DyadicInterval]:
    """Every lattice interval in ``domain`` whose density is comparable to a constant.

    Each such interval belongs to the class whose level is nearest to
    ``log2(c |I|)``; the lattice replaces the supremum over all intervals.
    """
    n = _lattice_size(domain, step)
    dens = _LatticeDensity(curve, domain[0], domain[1], n)
    out = []
    for i in range(n):
        for j in range(i + 1, n + 1):
            iv = dens.classify(i, j)
            if iv is None:
                break
            out.append(iv)
    return out
