"""Quadrature evaluation of the affine-arclength extension operator.

``extend`` computes, at every point of a tensor grid,

    E f(x) = sum_i w_i exp(i x . gamma(t_i)) f(t_i) lambda(t_i)

which is the composite-rule discretisation of the oscillatory integral.
Fields may live in an affine frame ``x = A y + b`` (``y`` on a uniform
box): the phase then becomes ``y . (A^T gamma(t)) + b . gamma(t)``, and
``Field.jacobian = |det A|`` keeps ``L^q`` integrals in ``x`` coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .curves import (
    CurveLike,
    ScalingPair,
    affine_density,
    as_polynomial,
    moment_dilation,
    pseudo_rescale,
    torsion_matrix,
)
from .errors import DomainError, NonFiniteError, ResourceError

DEFAULT_BUDGET = 20_000_000_000  # grid points x nodes
DEFAULT_TAIL_TOL = 0.1


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights on an arbitrary increasing grid."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size == 1:
        return np.ones(1)
    h = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass(frozen=True, eq=False)
class Profile:
    """Complex samples of a function on a 1-D quadrature grid; zero off ``[t_1, t_M]``."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        v = np.asarray(self.values, dtype=complex).ravel()
        if not (t.size == w.size == v.size) or t.size == 0:
            raise ValueError("nodes, weights and values must be non-empty and equally long")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("profile nodes must be strictly increasing")
        if not np.all(w > 0):
            raise ValueError("quadrature weights must be positive")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise NonFiniteError("Profile", "nodes, weights and values must be finite")
        for name, arr in (("nodes", t), ("weights", w), ("values", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def sample(cls, func: Callable, a: float, b: float, m: int = 1024) -> "Profile":
        """Sample ``func`` on ``m`` uniform nodes over ``[a, b]`` with trapezoid weights."""
        if m < 2 or not b > a:
            raise ValueError("need m >= 2 nodes on a non-degenerate interval")
        t = np.linspace(a, b, m)
        return cls(t, trapezoid_weights(t), np.asarray(func(t), dtype=complex) * np.ones_like(t))

    @classmethod
    def indicator(cls, a: float, b: float, m: int = 1024) -> "Profile":
        return cls.sample(lambda t: np.ones_like(t), a, b, m)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    def with_values(self, values) -> "Profile":
        return Profile(self.nodes, self.weights, values)

    def scaled(self, c: complex) -> "Profile":
        return self.with_values(c * self.values)

    def modulated(self, curve: CurveLike, x0) -> "Profile":
        """``exp(i x0 . gamma(t)) f(t)``."""
        phase = as_polynomial(curve)(self.nodes) @ np.asarray(x0, dtype=float)
        return self.with_values(np.exp(1j * phase) * self.values)

    def dilated(self, delta: float, weight_exponent: float) -> "Profile":
        """``|delta|**(-weight_exponent) f(t / delta)`` sampled at the images ``delta * t_i``."""
        if delta == 0:
            raise DomainError("dilation parameter must be nonzero")
        t = delta * self.nodes
        w = abs(delta) * self.weights
        v = abs(delta) ** (-weight_exponent) * self.values
        if delta < 0:
            t, w, v = t[::-1], w[::-1], v[::-1]
        return Profile(t, w, v)


@dataclass(frozen=True, eq=False)
class Box:
    """Uniform tensor grid over ``prod [lo_j, hi_j]`` with ``resolution[j]`` points per axis."""

    bounds: tuple
    resolution: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        res = tuple(int(n) for n in self.resolution)
        if len(bounds) != len(res) or not bounds:
            raise ValueError("bounds and resolution must have the same non-zero length")
        if any(n < 2 for n in res):
            raise ValueError("box resolution must be at least 2 per axis")
        if any(not hi > lo for lo, hi in bounds):
            raise ValueError("box bounds must satisfy lo < hi")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", res)

    @classmethod
    def cube(cls, half_width: float, n: int, d: int) -> "Box":
        return cls(((-half_width, half_width),) * d, (n,) * d)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.resolution)]

    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.resolution)])

    def weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights with shape ``resolution``."""
        out = np.ones(())
        for ax in self.axes():
            out = np.multiply.outer(out, trapezoid_weights(ax))
        return out

    def points(self) -> np.ndarray:
        """Grid points, shape ``resolution + (d,)``, lexicographic order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def refined(self, factor: int = 2) -> "Box":
        return Box(self.bounds, tuple(factor * (n - 1) + 1 for n in self.resolution))

    def same_grid(self, other: "Box") -> bool:
        return self.bounds == other.bounds and self.resolution == other.resolution


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on ``x = A y + b`` for ``y`` on ``box``; ``jacobian = |det A|``."""

    box: Box
    values: np.ndarray
    jacobian: float = 1.0
    frame: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.box.resolution:
            raise ValueError(f"field shape {v.shape} does not match box {self.box.resolution}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("Field")
        object.__setattr__(self, "values", v)

    def same_grid(self, other: "Field") -> bool:
        if not self.box.same_grid(other.box) or self.jacobian != other.jacobian:
            return False
        fa = np.eye(self.box.dim) if self.frame is None else self.frame
        fb = np.eye(other.box.dim) if other.frame is None else other.frame
        oa = np.zeros(self.box.dim) if self.offset is None else self.offset
        ob = np.zeros(other.box.dim) if other.offset is None else other.offset
        return np.array_equal(fa, fb) and np.array_equal(oa, ob)

    def with_values(self, values) -> "Field":
        return Field(self.box, values, self.jacobian, self.frame, self.offset)

    def physical_points(self) -> np.ndarray:
        y = self.box.points()
        x = y if self.frame is None else y @ np.asarray(self.frame).T
        return x if self.offset is None else x + self.offset


def _check_budget(points: int, nodes: int, budget: int) -> None:
    if points * nodes > budget:
        raise ResourceError(
            f"field evaluation needs {points} x {nodes} = {points * nodes} phase terms, "
            f"over the budget of {budget}"
        )


def density_weights(curve: CurveLike, f: Profile) -> np.ndarray:
    """``w_i f(t_i) lambda(t_i)``: the amplitudes entering every quadrature sum."""
    return f.weights * f.values * affine_density(curve, f.nodes)


def extend_phase(phase_points: np.ndarray, amplitudes: np.ndarray, box: Box,
                 budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """``sum_i amplitudes_i exp(i y . phase_points_i)`` for ``y`` on ``box``.

    Separable in ``y``, so the sum factors into one exponential matrix per axis
    and a chain of matrix products.
    """
    g = np.asarray(phase_points, dtype=float)
    amps = np.asarray(amplitudes, dtype=complex)
    if g.ndim != 2 or g.shape[0] != amps.size or g.shape[1] != box.dim:
        raise ValueError("phase points must be (nodes, d) matching the amplitudes and box")
    _check_budget(box.size, amps.size, budget)
    axes = box.axes()
    mats = [np.exp(1j * np.multiply.outer(ax, g[:, j])) for j, ax in enumerate(axes)]
    d = box.dim
    if d == 1:
        return mats[0] @ amps
    if d == 2:
        return (mats[0] * amps) @ mats[1].T
    if d == 3:
        out = np.empty(box.resolution, dtype=complex)
        right = mats[2].T
        for a in range(box.resolution[0]):
            out[a] = (mats[1] * (mats[0][a] * amps)) @ right
        return out
    raise DomainError("field evaluation supports d <= 3")


def extend(curve: CurveLike, f: Profile, box: Box, *, frame=None, offset=None,
           budget: int = DEFAULT_BUDGET) -> Field:
    """Evaluate ``E f`` at ``x = frame @ y + offset`` for ``y`` on ``box``."""
    poly = as_polynomial(curve)
    if poly.dim != box.dim:
        raise ValueError(f"curve dimension {poly.dim} does not match box dimension {box.dim}")
    gam = poly(f.nodes)
    amps = density_weights(poly, f)
    jac = 1.0
    if frame is not None:
        frame = np.asarray(frame, dtype=float)
        jac = abs(float(np.linalg.det(frame)))
        if jac == 0:
            raise DomainError("frame matrix is singular")
        phase = gam @ frame
    else:
        phase = gam
    if offset is not None:
        offset = np.asarray(offset, dtype=float)
        amps = amps * np.exp(1j * (gam @ offset))
    vals = extend_phase(phase, amps, box, budget)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("extend")
    return Field(box, vals, jac, frame, offset)


def extend_at_points(curve: CurveLike, f: Profile, x: np.ndarray) -> np.ndarray:
    """``E f`` at scattered points ``x`` of shape ``(P, d)``; node order is ascending."""
    poly = as_polynomial(curve)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    phases = x @ poly(f.nodes).T
    return np.exp(1j * phases) @ density_weights(poly, f)


def adjoint_extend(curve: CurveLike, nodes: np.ndarray, F: Field, weights=None,
                   density: bool = True) -> np.ndarray:
    """``E^* G(t) = lambda(t) * sum_x W(x) exp(-i x . gamma(t)) G(x)`` at ``nodes``.

    ``density=False`` omits the ``lambda(t)`` factor.

    ``W`` defaults to the box trapezoid weights times the frame jacobian, so
    ``<E f, G>_{L^2(dx)} = <f, E^* G>_{L^2(w dt)}`` holds for the discrete
    pairing with node weights ``w``.
    """
    poly = as_polynomial(curve)
    gam = poly(np.asarray(nodes, dtype=float))
    if F.frame is not None:
        phase = gam @ np.asarray(F.frame)
    else:
        phase = gam
    W = F.box.weights() * F.jacobian if weights is None else weights
    G = W * F.values
    axes = F.box.axes()
    mats = [np.exp(-1j * np.multiply.outer(phase[:, j], ax)) for j, ax in enumerate(axes)]
    d = F.box.dim
    if d == 1:
        out = mats[0] @ G
    elif d == 2:
        out = np.einsum("ia,ai->i", mats[0], G @ mats[1].T)
    elif d == 3:
        tmp = np.einsum("abc,ic->abi", G, mats[2])
        tmp = np.einsum("abi,ib->ai", tmp, mats[1])
        out = np.einsum("ai,ia->i", tmp, mats[0])
    else:
        raise DomainError("adjoint evaluation supports d <= 3")
    if F.offset is not None:
        out = out * np.exp(-1j * (gam @ np.asarray(F.offset)))
    return out * affine_density(poly, nodes) if density else out


def lp_lambda_norm(curve: CurveLike, f: Profile, p: float) -> float:
    """``(sum_i w_i |f(t_i)|^p lambda(t_i))^(1/p)``."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    lam = affine_density(curve, f.nodes)
    return float(np.sum(f.weights * np.abs(f.values) ** p * lam) ** (1.0 / p))


def lp_plain_norm(f: Profile, p: float) -> float:
    """Unweighted ``L^p(dt)`` norm."""
    return float(np.sum(f.weights * np.abs(f.values) ** p) ** (1.0 / p))


def lq_power(F: Field, q: float) -> float:
    """``integral |F|^q dx`` by the tensor trapezoid rule in the field's frame."""
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    return float(np.sum(F.box.weights() * np.abs(F.values) ** q) * F.jacobian)


def lq_norm(F: Field, q: float) -> float:
    return lq_power(F, q) ** (1.0 / q)


@dataclass(frozen=True)
class TailDiagnostic:
    """Share of the ``q``-mass lying outside the concentric half-size box."""

    outside_fraction: float
    tolerance: float

    @property
    def flagged(self) -> bool:
        return self.outside_fraction > self.tolerance


def tail_diagnostic(F: Field, q: float, tol: float = DEFAULT_TAIL_TOL) -> TailDiagnostic:
    total = lq_power(F, q)
    if total == 0:
        return TailDiagnostic(0.0, tol)
    mask = np.ones(F.box.resolution, dtype=bool)
    for j, ax in enumerate(F.box.axes()):
        lo, hi = F.box.bounds[j]
        c, r = (lo + hi) / 2, (hi - lo) / 4
        inside = np.abs(ax - c) <= r + 1e-12 * (hi - lo)
        shape = [1] * F.box.dim
        shape[j] = -1
        mask &= inside.reshape(shape)
    inner = float(np.sum((F.box.weights() * np.abs(F.values) ** q)[mask]) * F.jacobian)
    return TailDiagnostic(max(0.0, 1.0 - inner / total), tol)


@dataclass(frozen=True)
class RatioReport:
    ratio: float
    extension_norm: float
    input_norm: float
    tail: TailDiagnostic


def rayleigh_report(curve: CurveLike, f: Profile, pair: ScalingPair, box: Box, *,
                    frame=None, offset=None, budget: int = DEFAULT_BUDGET,
                    tail_tol: float = DEFAULT_TAIL_TOL) -> RatioReport:
    den = lp_lambda_norm(curve, f, pair.p)
    if den == 0:
        raise DomainError("Rayleigh ratio is undefined for a zero profile")
    F = extend(curve, f, box, frame=frame, offset=offset, budget=budget)
    num = lq_norm(F, pair.q)
    return RatioReport(num / den, num, den, tail_diagnostic(F, pair.q, tail_tol))


def rayleigh_ratio(curve: CurveLike, f: Profile, pair: ScalingPair, box: Box, **kw) -> float:
    """``||E f||_q / ||f||_{L^p(lambda)}`` on the given box."""
    return rayleigh_report(curve, f, pair, box, **kw).ratio


# ---------------------------------------------------------------------------
# exact symmetries
# ---------------------------------------------------------------------------

def scaling_profile(f: Profile, exponents: Sequence[int], delta: float, p: float) -> Profile:
    """``|delta|^(-2|l|/((d^2+d) p)) f(t/delta)``, sampled at the dilated nodes."""
    d = len(exponents)
    return f.dilated(delta, 2.0 * sum(exponents) / ((d * d + d) * p))


def scaling_frame(exponents: Sequence[int], delta: float) -> np.ndarray:
    """Frame ``D_delta^{-1}``: the box on which the dilated field carries the same mass."""
    return np.diag([float(delta) ** (-int(l)) for l in exponents])


# ---------------------------------------------------------------------------
# blow-up identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupReport:
    pointwise: float
    norm: float
    lhs_norm: float
    rhs_norm: float


def blowup_sides(curve: CurveLike, a: float, delta: float, f: Profile, p: float,
                 x: np.ndarray, q: Optional[float] = None):
    """Both sides of the exact blow-up identity at the points ``x``.

    ``f`` must be supported where the nodes are; the rescaled profile reuses
    the node images ``s_i = (t_i - a)/delta`` with weights ``w_i / delta``.
    """
    poly = as_polynomial(curve)
    d = poly.dim
    if q is None:
        q = (d * d + d) / 2 * p / (p - 1)
    T = torsion_matrix(poly, a)
    T.inverse()  # raises on singular torsion
    lam_a = affine_density(poly, a)
    D = moment_dilation(d, delta)
    resc = pseudo_rescale(poly, a, delta)
    s = (f.nodes - a) / delta
    h = Profile(s, f.weights / delta, (delta * lam_a) ** (1.0 / p) * f.values)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    lhs = extend_at_points(poly, f, x)
    y = x @ T.entries @ D  # rows are (D T^t x)^t
    pref = abs(np.linalg.det(T.entries @ D)) ** (1.0 / q)
    rhs = pref * np.exp(1j * (x @ poly(a))) * extend_at_points(resc, h, y)
    return lhs, rhs, lp_lambda_norm(poly, f, p), lp_lambda_norm(resc, h, p)


def blowup_identity_check(curve: CurveLike, a: float, delta: float, f: Profile,
                          x: np.ndarray, p: float, q: Optional[float] = None) -> BlowupReport:
    """Max relative discrepancies of the pointwise and the ``L^p`` norm identity."""
    lhs, rhs, nl, nr = blowup_sides(curve, a, delta, f, p, x, q)
    scale = float(np.max(np.abs(lhs)))
    pointwise = float(np.max(np.abs(lhs - rhs)) / scale) if scale > 0 else float(np.max(np.abs(rhs)))
    norm = abs(nl - nr) / nl if nl > 0 else abs(nr)
    return BlowupReport(pointwise, norm, nl, nr)
