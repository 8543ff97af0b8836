"""Zonotope approximations of sum-map images and their audits.

A body ``Q(m, n, k)`` is ``Gamma(n + k) + sum_j T(n_j + k) P_{2^-m}`` with
``P_s = prod_i [-s^i/i!, s^i/i!]``: a zonotope with centre ``Gamma(n + k)``
and ``d^2`` generators ``(s^i / i!) gamma^{(i)}(n_j + k)``.  Membership and
disjointness use the facet normals of the zonotope, which in ``d = 2`` are
perpendiculars of generators and in ``d = 3`` cross products of generator
pairs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull

from ..curves import CurveLike, as_polynomial, curve_cn_distance, moment_curve, torsion_matrix
from ..errors import DomainError

PARALLEL_TOL = 1e-12


def _facet_normals(gens: np.ndarray) -> np.ndarray:
    """Unit facet normals (one per antipodal pair) of the zonotope spanned by ``gens``."""
    d = gens.shape[-1]
    scale = np.linalg.norm(gens, axis=-1).max()
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        cand = np.stack([-gens[:, 1], gens[:, 0]], axis=-1)
    elif d == 3:
        pairs = list(itertools.combinations(range(len(gens)), 2))
        cand = np.array([np.cross(gens[i], gens[j]) for i, j in pairs])
    else:
        raise DomainError("zonotope facets are implemented for d <= 3")
    norms = np.linalg.norm(cand, axis=-1)
    keep = norms > PARALLEL_TOL * max(scale, 1e-300) ** (d - 1)
    if not np.any(keep):
        raise DomainError("zonotope is degenerate (generators do not span)")
    return cand[keep] / norms[keep, None]


@dataclass(frozen=True, eq=False)
class Zonotope:
    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "generators", np.atleast_2d(np.asarray(self.generators, dtype=float)))

    @property
    def dim(self) -> int:
        return self.center.size

    def support(self, u) -> np.ndarray:
        """``h(u) = c . u + sum_g |g . u|`` for one or many directions."""
        u = np.atleast_2d(u)
        return u @ self.center + np.abs(u @ self.generators.T).sum(axis=1)

    def normals(self) -> np.ndarray:
        return _facet_normals(self.generators)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """``A x <= b`` with both orientations of every facet normal."""
        nrm = self.normals()
        A = np.vstack([nrm, -nrm])
        return A, self.support(A)

    def contains(self, x, rtol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(x)
        A, b = self.halfspaces()
        slack = b[None, :] - x @ A.T
        tol = rtol * (1.0 + np.abs(self.generators).sum())
        return np.all(slack >= -tol, axis=1)

    def excess(self, x) -> np.ndarray:
        """Largest violated facet slack (``<= 0`` inside), in the facets' unit normals."""
        x = np.atleast_2d(x)
        A, b = self.halfspaces()
        return np.max(x @ A.T - b[None, :], axis=1)

    def inradius(self) -> float:
        nrm = self.normals()
        return float(np.min(np.abs(nrm @ self.generators.T).sum(axis=1)))

    def corner_points(self) -> np.ndarray:
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=len(self.generators))))
        return self.center + signs @ self.generators

    def vertices(self) -> np.ndarray:
        """Polygon vertices (d=2, counter-clockwise) or hull vertices (d=3)."""
        if self.dim == 2:
            return _polygon_vertices(self.center, self.generators)
        hull = ConvexHull(self.corner_points())
        return hull.points[hull.vertices]


def _polygon_vertices(center: np.ndarray, gens: np.ndarray) -> np.ndarray:
    """Minkowski sum of segments: walk the edges sorted by angle."""
    g = gens[np.linalg.norm(gens, axis=1) > 0].copy()
    # orient every generator into the upper half plane
    flip = (g[:, 1] < 0) | ((g[:, 1] == 0) & (g[:, 0] < 0))
    g[flip] *= -1
    ang = np.arctan2(g[:, 1], g[:, 0])
    order = np.argsort(ang, kind="stable")
    g = g[order]
    ang = ang[order]
    # merge parallel generators
    merged = []
    for vec, a in zip(g, ang):
        if merged and abs(a - merged[-1][1]) < 1e-12:
            merged[-1][0] = merged[-1][0] + vec
        else:
            merged.append([vec, a])
    edges = [m[0] for m in merged]
    start = center - np.sum(edges, axis=0)  # lowest point
    edges2 = [2 * e for e in edges] + [-2 * e for e in edges]
    pts = [start]
    for e in edges2[:-1]:
        pts.append(pts[-1] + e)
    return np.array(pts)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """``Q(m, n, k)`` together with its index triple."""

    m: int
    n: tuple
    k: float
    zonotope: Zonotope

    @property
    def center(self) -> np.ndarray:
        return self.zonotope.center

    @property
    def generators(self) -> np.ndarray:
        return self.zonotope.generators

    def vertices(self) -> np.ndarray:
        return self.zonotope.vertices()

    def contains(self, x, rtol: float = 1e-12) -> np.ndarray:
        return self.zonotope.contains(x, rtol)


def box_scales(s: float, d: int) -> np.ndarray:
    """Half-widths ``s^i / i!`` of ``P_s``."""
    return np.array([s**i / math.factorial(i) for i in range(1, d + 1)])


def convex_body(curve: CurveLike, m: int, n: Sequence[float], k: float) -> ConvexBody:
    poly = as_polynomial(curve)
    d = poly.dim
    if d > 3:
        raise DomainError("convex bodies are realised for d <= 3")
    n = tuple(float(v) for v in n)
    if len(n) != d:
        raise ValueError(f"n must have {d} entries")
    scales = box_scales(2.0 ** (-m), d)
    gens = []
    for nj in n:
        T = torsion_matrix(poly, nj + k)
        T.inverse()  # rejects singular torsion
        gens.append((T.entries * scales).T)
    center = np.sum(poly(np.array(n) + k), axis=0)
    return ConvexBody(int(m), n, float(k), Zonotope(center, np.vstack(gens)))


def support_membership(z: Zonotope, x, directions: np.ndarray) -> np.ndarray:
    """Necessary-condition membership: ``u . x <= h(u)`` for the supplied directions."""
    x = np.atleast_2d(x)
    h = z.support(directions)
    tol = 1e-12 * (1.0 + np.abs(z.generators).sum())
    return np.all(x @ directions.T <= h[None, :] + tol, axis=1)


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizationCheck:
    ok: bool
    low_order_defect: float
    cn_distance: float
    eps: float


def normalization_check(curve: CurveLike, eps: float = 0.05) -> NormalizationCheck:
    """``gamma = gamma_0 + g`` with ``g^{(j)}(0) = 0`` for ``j <= d`` and ``||g||_{C^N[0,1]} < eps``."""
    poly = as_polynomial(curve)
    d = poly.dim
    g0 = moment_curve(d).to_polynomial()
    n = max(poly.degree_bound, g0.degree_bound)
    diff = poly.padded(n).coefficients - g0.padded(n).coefficients
    low = float(np.max(np.abs(diff[:, : d + 1])))
    # derivative bounds on [0, 1] from coefficient sums (R = 1)
    cn = curve_cn_distance(poly, g0, 1.0, n)
    return NormalizationCheck(low == 0.0 and cn < eps, low, cn, eps)


@dataclass(frozen=True)
class ContainmentReport:
    m: int
    n: tuple
    k: float
    violations: int
    points_checked: int
    max_excess: float
    margin: float
    precondition: NormalizationCheck


def containment_audit(curve: CurveLike, m: int, n: Sequence[float], k: float, K: int,
                      delta_margin: Optional[float] = None, eps: float = 0.05,
                      lattice: int = 20) -> ContainmentReport:
    """Test ``Gamma(R(m+1, n, k)) + T(k) P_{delta 2^-m}`` against ``Q(m, n, k)``.

    ``Gamma`` is sampled on a ``lattice^d`` grid of the half-size cube and
    every sample is shifted by each corner of ``T(k) P_{delta 2^-m}``.
    """
    poly = as_polynomial(curve)
    d = poly.dim
    pre = normalization_check(poly, eps)
    if delta_margin is None:
        delta_margin = eps * 2.0 ** (-(K + 1) * d)
    body = convex_body(poly, m, n, k)
    h = 2.0 ** (-(m + 1))
    g = np.linspace(0.0, h, lattice)
    u = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)
    base = np.array(n, dtype=float) + k
    pts = poly(base[None, :] + u).sum(axis=1)
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=d))) * box_scales(delta_margin * 2.0 ** (-m), d)
    offsets = corners @ torsion_matrix(poly, k).entries.T
    allpts = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, d)
    ex = body.zonotope.excess(allpts)
    tol = 1e-12 * (1.0 + np.abs(body.generators).sum())
    return ContainmentReport(int(m), tuple(float(v) for v in n), float(k),
                             int(np.sum(ex > tol)), int(len(allpts)), float(ex.max()),
                             float(delta_margin), pre)


def admissible_indices(K: int, m: int, d: int, k_span: float = 1.0,
                       inside_unit_cube: bool = True) -> list[tuple[int, tuple, int]]:
    """Index triples ``(m, n_index, k_index)`` with ``0 = n_1 <= ... <= n_d``.

    ``n_index`` entries range over ``[0, 2^{2K}]`` with max entry at least
    ``2^K`` (so ``|n| >= 2^{K-m}`` in the max norm); ``k_index`` covers
    ``[0, k_span 2^m)``.  With ``inside_unit_cube`` only cubes inside
    ``[0,1]^d`` are kept.
    """
    out = []
    top = 2 ** (2 * K)
    kmax = int(round(k_span * 2**m))
    for tail in itertools.combinations_with_replacement(range(top + 1), d - 1):
        n_idx = (0, *tail)
        if max(n_idx) < 2**K:
            continue
        for kk in range(kmax):
            if inside_unit_cube and kk + max(n_idx) + 1 > 2**m:
                break
            out.append((m, n_idx, kk))
    return out


@dataclass(frozen=True)
class BodyBatch:
    indices: list
    centers: np.ndarray
    generators: np.ndarray  # (B, d*d, d)


def build_batch(curve: CurveLike, indices: Sequence[tuple[int, tuple, int]]) -> BodyBatch:
    """Vectorised construction of ``Q(m, n, k)`` for many index triples."""
    poly = as_polynomial(curve)
    d = poly.dim
    if not indices:
        return BodyBatch([], np.zeros((0, d)), np.zeros((0, d * d, d)))
    m = np.array([i[0] for i in indices], dtype=float)
    n_idx = np.array([i[1] for i in indices], dtype=float)
    k_idx = np.array([i[2] for i in indices], dtype=float)
    s = 2.0 ** (-m)
    pts = n_idx * s[:, None] + (k_idx * s)[:, None]  # (B, d) parameters n_j + k
    centers = poly(pts).sum(axis=1)
    scales = np.stack([s**i / math.factorial(i) for i in range(1, d + 1)], axis=1)  # (B, d)
    gens = np.empty((len(indices), d * d, d))
    for i in range(1, d + 1):
        der = poly.derivative(i)(pts)  # (B, d_points, d)
        gens[:, (i - 1) :: d, :] = der * scales[:, i - 1, None, None]
    dets = np.array([np.linalg.det(poly.derivative_columns(float(t), range(1, d + 1)))
                     for t in np.unique(pts)])
    if np.any(np.abs(dets) < 1e-14):
        raise DomainError("singular torsion matrix at some n_j + k")
    return BodyBatch(list(indices), centers, gens)


def _pair_depth(c: np.ndarray, gens: np.ndarray) -> np.ndarray:
    """Depth of the origin inside zonotopes ``c_b + sum |.| gens_b`` (negative: outside)."""
    unit, valid = _batch_halfspaces(gens)
    spread = np.abs(np.einsum("bnd,bgd->bng", unit, gens)).sum(axis=2)
    cu = np.einsum("bnd,bd->bn", unit, c)
    # origin inside iff -h(-u) <= 0 <= h(u) for all u
    slack = np.minimum(cu + spread, spread - cu)
    slack = np.where(valid, slack, np.inf)
    return slack.min(axis=1)


def _inradius_batch(gens: np.ndarray) -> np.ndarray:
    return _pair_depth(np.zeros((gens.shape[0], gens.shape[2])), gens)


@dataclass(frozen=True)
class OverlapReport:
    classes: int
    bodies: int
    pairs_checked: int
    violations: int
    touching: int
    worst_depth: float
    examples: tuple = field(default_factory=tuple)


def class_label(index: tuple[int, tuple, int], L: int) -> tuple:
    """``(m mod L, k_index mod 2^L, n)`` with ``n`` as exact dyadic rationals."""
    m, n_idx, k_idx = index
    n_real = tuple(Fraction(v, 2**m) for v in n_idx)
    return (m % L, k_idx % (2**L), n_real)


def overlap_audit(batch: BodyBatch, L: int, rel_tol: float = 1e-9,
                  chunk: int = 200_000, max_examples: int = 5) -> OverlapReport:
    """Partition bodies into classes and look for intersecting pairs inside each class.

    Two bodies count as intersecting when one contains a ball of radius
    ``rel_tol * min(inradius)`` of the other's points; boundary contact
    is reported separately as ``touching``.
    """
    groups: dict = {}
    seen = set()
    for b, idx in enumerate(batch.indices):
        key = (idx[0], tuple(idx[1]), idx[2])
        if key in seen:
            continue  # a repeated index is the same body, not an intersecting pair
        seen.add(key)
        groups.setdefault(class_label(idx, L), []).append(b)
    inr = _inradius_batch(batch.generators) if batch.indices else np.zeros(0)
    lo = batch.centers - np.abs(batch.generators).sum(axis=1)
    hi = batch.centers + np.abs(batch.generators).sum(axis=1)
    ia, ib = [], []
    for members in groups.values():
        if len(members) < 2:
            continue
        mem = np.array(members)
        a, b = np.triu_indices(len(mem), 1)
        a, b = mem[a], mem[b]
        # bounding-box prefilter
        keep = np.all((lo[a] <= hi[b]) & (lo[b] <= hi[a]), axis=1)
        ia.append(a[keep])
        ib.append(b[keep])
    pairs_a = np.concatenate(ia) if ia else np.zeros(0, dtype=int)
    pairs_b = np.concatenate(ib) if ib else np.zeros(0, dtype=int)
    n_pairs = sum(len(g) * (len(g) - 1) // 2 for g in groups.values())
    violations = touching = 0
    worst = -np.inf
    examples = []
    for s in range(0, len(pairs_a), chunk):
        a, b = pairs_a[s : s + chunk], pairs_b[s : s + chunk]
        c = batch.centers[a] - batch.centers[b]
        gens = np.concatenate([batch.generators[a], batch.generators[b]], axis=1)
        depth = _pair_depth(c, gens)
        tol = rel_tol * np.minimum(inr[a], inr[b])
        hit = depth > tol
        violations += int(hit.sum())
        touching += int(np.sum((depth >= -tol) & ~hit))
        if depth.size:
            worst = max(worst, float((depth / np.minimum(inr[a], inr[b])).max()))
        for j in np.flatnonzero(hit)[: max_examples - len(examples)]:
            examples.append((batch.indices[a[j]], batch.indices[b[j]]))
    return OverlapReport(len(groups), len(seen), int(n_pairs), violations, touching,
                         float(worst) if np.isfinite(worst) else float("nan"), tuple(examples))


@dataclass(frozen=True)
class ContainmentSweep:
    bodies: int
    violations: int
    points_checked: int
    max_excess: float
    margin: float
    precondition: NormalizationCheck
    examples: tuple = field(default_factory=tuple)


def _batch_halfspaces(gens: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit facet normals ``(B, N, d)`` and a validity mask for a batch of zonotopes."""
    B, G, d = gens.shape
    if d == 2:
        nrm = np.stack([-gens[..., 1], gens[..., 0]], axis=-1)
    else:
        ii, jj = np.triu_indices(G, 1)
        nrm = np.cross(gens[:, ii, :], gens[:, jj, :])
    ln = np.linalg.norm(nrm, axis=-1)
    scale = np.linalg.norm(gens, axis=-1).max(axis=1)
    valid = ln > PARALLEL_TOL * scale[:, None] ** (d - 1)
    return nrm / np.where(valid, ln, 1.0)[..., None], valid


def containment_sweep(curve: CurveLike, indices: Sequence[tuple[int, tuple, int]], K: int,
                      delta_margin: Optional[float] = None, eps: float = 0.05,
                      lattice: int = 20, chunk: int = 256, max_examples: int = 5) -> ContainmentSweep:
    """Vectorised :func:`containment_audit` over many index triples."""
    poly = as_polynomial(curve)
    d = poly.dim
    pre = normalization_check(poly, eps)
    if delta_margin is None:
        delta_margin = eps * 2.0 ** (-(K + 1) * d)
    g = np.linspace(0.0, 1.0, lattice)
    unit = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
    violations = checked = 0
    worst = -np.inf
    examples = []
    for s in range(0, len(indices), chunk):
        part = list(indices[s : s + chunk])
        batch = build_batch(poly, part)
        m = np.array([i[0] for i in part], dtype=float)
        h = 2.0 ** (-m)
        base = np.array([i[1] for i in part], dtype=float) * h[:, None] + (np.array([i[2] for i in part]) * h)[:, None]
        u = base[:, None, :] + (h / 2)[:, None, None] * unit[None]  # (B, P, d)
        pts = poly(u).sum(axis=2)
        kk = base[:, 0]  # n_1 = 0 so the first parameter is k
        T = np.stack([poly.derivative(i)(kk) for i in range(1, d + 1)], axis=-1)  # (B, d, d)
        scales = np.stack([(delta_margin * h) ** i / math.factorial(i) for i in range(1, d + 1)], axis=1)
        off = np.einsum("bij,bcj->bci", T, signs[None, :, :] * scales[:, None, :])
        allpts = (pts[:, :, None, :] + off[:, None, :, :]).reshape(len(part), -1, d)
        nrm, valid = _batch_halfspaces(batch.generators)
        spread = np.abs(np.einsum("bnd,bgd->bng", nrm, batch.generators)).sum(axis=2)
        rel = allpts - batch.centers[:, None, :]
        proj = np.abs(np.einsum("bpd,bnd->bpn", rel, nrm))
        ex = np.where(valid[:, None, :], proj - spread[:, None, :], -np.inf).max(axis=2)
        tol = 1e-12 * (1.0 + np.abs(batch.generators).sum(axis=(1, 2)))
        bad = ex > tol[:, None]
        violations += int(bad.sum())
        checked += int(bad.size)
        worst = max(worst, float(ex.max()))
        for b in np.flatnonzero(bad.any(axis=1))[: max_examples - len(examples)]:
            examples.append(part[b])
    return ContainmentSweep(len(indices), violations, checked, float(worst), float(delta_margin), pre,
                            tuple(examples))
