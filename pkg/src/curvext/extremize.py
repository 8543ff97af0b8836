"""Projected gradient ascent for the discretised Rayleigh ratio.

Profiles are complex vectors on fixed nodes with the real inner product
``<u, v> = Re sum_i w_i lambda_i conj(u_i) v_i``.  In that metric the
gradient of ``log R`` at a normalised ``f`` is

    A / N^q - |f|^{p-2} f,        A(t) = sum_x W(x) |F|^{q-2} F(x) e^{-i x . gamma(t)},

with ``F = E f`` on the box and ``N^q = sum_x W |F|^q``.  Each step moves
along it, renormalises, and backtracks until the ratio increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curves import CurveLike, ScalingPair, affine_density, as_polynomial
from .errors import DomainError, NonFiniteError
from .extension import (
    Box,
    Field,
    Profile,
    adjoint_extend,
    extend,
    lq_power,
    tail_diagnostic,
    trapezoid_weights,
)


@dataclass(frozen=True)
class AscentOptions:
    max_iter: int = 500
    rtol: float = 1e-7
    initial_step: float = 1.0
    max_backtracks: int = 40
    min_step: float = 1e-14
    method: str = "lbfgs"  # or "gradient"
    memory: int = 20


@dataclass(frozen=True, eq=False)
class AscentState:
    profile: Profile
    ratio: float
    iteration: int
    residual: float
    history: tuple = field(default_factory=tuple)
    converged: bool = False
    tail_fraction: float = float("nan")


class _Functional:
    """Caches node-dependent quantities for repeated ratio/gradient evaluations."""

    def __init__(self, curve: CurveLike, pair: ScalingPair, nodes, weights, box: Box):
        self.curve = as_polynomial(curve)
        self.pair = pair
        self.box = box
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.lam = affine_density(self.curve, self.nodes)
        self.mu = self.weights * self.lam

    def profile(self, v) -> Profile:
        return Profile(self.nodes, self.weights, v)

    def inner(self, u, v) -> float:
        return float(np.real(np.sum(self.mu * np.conj(u) * v)))

    def norm(self, u) -> float:
        return float(np.sum(self.mu * np.abs(u) ** self.pair.p) ** (1.0 / self.pair.p))

    def field(self, v) -> Field:
        return extend(self.curve, self.profile(v), self.box)

    def ratio(self, v) -> float:
        return lq_power(self.field(v), self.pair.q) ** (1.0 / self.pair.q) / self.norm(v)

    def first_variation(self, v):
        """Returns ``(A, N^q, F)`` for the profile values ``v``."""
        F = self.field(v)
        q = self.pair.q
        absF = np.abs(F.values)
        G = F.with_values(absF ** (q - 2) * F.values)
        A = adjoint_extend(self.curve, self.nodes, G, density=False)
        if not np.all(np.isfinite(A)):
            raise NonFiniteError("first variation", "adjoint sum overflowed")
        return A, lq_power(F, q), F

    def norm_direction(self, v):
        p = self.pair.p
        a = np.abs(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(a > 0, a ** (p - 2) * v, 0.0)
        return out

    def log_gradient(self, v):
        """Gradient of ``log R`` in the ``mu`` metric (``v`` need not be normalised)."""
        A, Nq, _ = self.first_variation(v)
        Pp = self.norm(v) ** self.pair.p
        return A / Nq - self.norm_direction(v) / Pp


def _normalise(fn: _Functional, v):
    n = fn.norm(v)
    if n == 0:
        raise DomainError("profile vanished during ascent")
    return v / n


def _two_loop(fn: _Functional, g, pairs) -> np.ndarray:
    """Limited-memory inverse-Hessian product with ``g`` in the ``mu`` metric."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * fn.inner(s, q)
        alphas.append(a)
        q = q - a * y
    if pairs:
        s, y, _ = pairs[-1]
        q = q * (fn.inner(s, y) / fn.inner(y, y))
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * fn.inner(y, q)
        q = q + (a - b) * s
    return q


def ascend(curve: CurveLike, pair: ScalingPair, init: Profile, box: Box,
           options: Optional[AscentOptions] = None) -> AscentState:
    """Maximise ``||E f||_q / ||f||_{L^p(lambda)}`` over profiles on ``init``'s nodes.

    ``method="gradient"`` steps along the first variation itself;
    ``method="lbfgs"`` preconditions it with a limited-memory curvature model.
    Either way every accepted step strictly increases the ratio.
    """
    opts = options or AscentOptions()
    if opts.method not in ("gradient", "lbfgs"):
        raise ValueError(f"unknown ascent method {opts.method!r}")
    fn = _Functional(curve, pair, init.nodes, init.weights, box)
    if not np.any(init.values):
        raise DomainError("initial profile is identically zero")
    v = _normalise(fn, np.asarray(init.values, dtype=complex))
    r = fn.ratio(v)
    history = [r]
    step = opts.initial_step
    converged = False
    pairs: list = []
    g = fn.log_gradient(v)
    it = 0
    for it in range(1, opts.max_iter + 1):
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("ascend", f"non-finite gradient at iteration {it}")
        if fn.inner(g, g) == 0:
            converged = True
            break
        if opts.method == "lbfgs":
            direction = _two_loop(fn, g, pairs)
            if fn.inner(direction, g) <= 0:
                pairs.clear()
                direction = g
            s = 1.0 if pairs else step
        else:
            direction = g
            s = 2.0 * step
        accepted = False
        for _ in range(opts.max_backtracks):
            cand = _normalise(fn, v + s * direction)
            rc = fn.ratio(cand)
            if rc > r:
                accepted = True
                break
            s *= 0.5
            if s < opts.min_step:
                break
        if not accepted:
            if pairs:
                pairs.clear()
                continue
            converged = True
            break
        gain = (rc - r) / r
        g_new = fn.log_gradient(cand)
        sv, yv = cand - v, g - g_new
        sy = fn.inner(sv, yv)
        if sy > 1e-300:
            pairs.append((sv, yv, 1.0 / sy))
            if len(pairs) > opts.memory:
                pairs.pop(0)
        v, r, g = cand, rc, g_new
        if opts.method == "gradient":
            step = s
        history.append(r)
        if gain < opts.rtol:
            converged = True
            break
    prof = fn.profile(v)
    res = euler_lagrange_residual(curve, pair, prof, box)
    tail = tail_diagnostic(fn.field(v), pair.q).outside_fraction
    return AscentState(prof, r, it, res.residual, tuple(history), converged, tail)


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    stationary: bool


def euler_lagrange_residual(curve: CurveLike, pair: ScalingPair, f: Profile, box: Box) -> ResidualReport:
    """Share of the first variation not parallel to the norm-constraint normal.

    ``A`` is the first variation of ``||E f||_q^q`` and ``u`` the unit normal
    ``|f|^{p-2} f / || |f|^{p-2} f ||``; the residual is ``|A - <A,u> u| / |A|``.
    """
    fn = _Functional(curve, pair, f.nodes, f.weights, box)
    v = np.asarray(f.values, dtype=complex)
    A, _, _ = fn.first_variation(v)
    nA = np.sqrt(fn.inner(A, A))
    if nA == 0:
        return ResidualReport(0.0, True)
    u = fn.norm_direction(v)
    nu = np.sqrt(fn.inner(u, u))
    if nu == 0:
        raise DomainError("profile is identically zero")
    u = u / nu
    perp = A - fn.inner(u, A) * u
    return ResidualReport(float(np.sqrt(fn.inner(perp, perp)) / nA), False)


@dataclass(frozen=True)
class GradientCheck:
    analytic: np.ndarray
    finite_difference: np.ndarray
    max_relative_error: float


def gradient_check(curve: CurveLike, pair: ScalingPair, f: Profile, box: Box,
                   n_directions: int = 10, rel_step: float = 1e-5,
                   seed: int = 0) -> GradientCheck:
    """Compare ``<grad R, h>`` with central differences along random complex ``h``."""
    rng = np.random.default_rng(seed)
    fn = _Functional(curve, pair, f.nodes, f.weights, box)
    v = np.asarray(f.values, dtype=complex)
    r0 = fn.ratio(v)
    grad = r0 * fn.log_gradient(v)
    scale = np.sqrt(fn.inner(v, v))
    an, fd = [], []
    for _ in range(n_directions):
        h = rng.standard_normal(v.size) + 1j * rng.standard_normal(v.size)
        h *= np.abs(v) / max(np.abs(v).max(), 1e-300) + 1e-3  # keep h where f lives
        h /= np.sqrt(fn.inner(h, h))
        eps = rel_step * scale
        d = (fn.ratio(v + eps * h) - fn.ratio(v - eps * h)) / (2 * eps)
        an.append(fn.inner(grad, h))
        fd.append(d)
    an, fd = np.array(an), np.array(fd)
    denom = np.maximum(np.abs(fd), 1e-300)
    return GradientCheck(an, fd, float(np.max(np.abs(an - fd) / denom)))


@dataclass(frozen=True)
class RefinementReport:
    coarse_ratio: float
    fine_ratio: float
    drift: float


def refinement_pass(curve: CurveLike, pair: ScalingPair, state: AscentState, box: Box) -> RefinementReport:
    """Re-evaluate the final profile on a box with doubled resolution."""
    fine = box.refined(2)
    fn = _Functional(curve, pair, state.profile.nodes, state.profile.weights, fine)
    rf = fn.ratio(np.asarray(state.profile.values))
    return RefinementReport(state.ratio, rf, abs(rf - state.ratio) / state.ratio)


def default_init(nodes_half_width: float = 4.0, m: int = 512, seed: int = 0,
                 imag_scale: float = 1e-2) -> Profile:
    """Real Gaussian with a small random imaginary part."""
    rng = np.random.default_rng(seed)
    t = np.linspace(-nodes_half_width, nodes_half_width, m)
    g = np.exp(-t * t)
    v = g + 1j * imag_scale * g * rng.standard_normal(m)
    return Profile(t, trapezoid_weights(t), v)


@dataclass(frozen=True)
class MultiStart:
    states: tuple
    ratios: np.ndarray
    spread: float  # (max - min) / max of the final ratios
    best: int


def multi_start(curve: CurveLike, pair: ScalingPair, box: Box, seeds: Sequence[int],
                options: Optional[AscentOptions] = None, half_width: float = 4.0, m: int = 512,
                imag_scale: float = 0.3) -> MultiStart:
    """Ascend from several perturbed Gaussians and report how far the end values disagree.

    No uniqueness is assumed; a large spread means the starts found different basins.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    states = tuple(ascend(curve, pair, default_init(half_width, m, s, imag_scale), box, options)
                   for s in seeds)
    ratios = np.array([s.ratio for s in states])
    top = float(ratios.max())
    return MultiStart(states, ratios, (top - float(ratios.min())) / top, int(np.argmax(ratios)))
