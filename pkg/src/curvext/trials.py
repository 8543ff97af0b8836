"""Concentrating trial families and their Rayleigh-ratio scans.

A trial profile places a rescaled copy of a base profile at ``t = 1`` and,
for curves with all-even or all-odd exponents, a mirrored partner at
``t = -1``.  Each scan row evaluates the ratio on the original curve but
samples the field in blow-up coordinates ``y = D_delta T(1)^T x`` so that
one fixed ``y`` box serves every ``delta`` and the moment-curve target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curves import (
    MonomialCurve,
    ScalingPair,
    as_polynomial,
    moment_curve,
    moment_dilation,
    parity_class,
    torsion_matrix,
)
from .errors import ConfigError, DomainError, ResourceError
from .extension import (
    DEFAULT_BUDGET,
    Box,
    Profile,
    extend,
    lp_lambda_norm,
    lp_plain_norm,
    lq_power,
)
from .interaction import psi_max, theta_average

MIN_NODES_PER_BUMP = 64
CUTOFF = 2.0


def truncated_gaussian(m: int = 1024, half_width: float = 4.0) -> Profile:
    """Default base profile ``exp(-t^2)`` on ``[-half_width, half_width]``."""
    return Profile.sample(lambda t: np.exp(-t * t), -half_width, half_width, m)


@dataclass(frozen=True, eq=False)
class TrialSpec:
    base: Profile
    delta: float
    p: float
    partner: Optional[Profile] = None
    alpha: float = 1.0
    truncation: Optional[float] = None

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.truncation is not None and not self.delta * self.truncation < 1:
            raise DomainError("truncated trials need delta * R < 1")

    def with_delta(self, delta: float) -> "TrialSpec":
        return TrialSpec(self.base, delta, self.p, self.partner, self.alpha, self.truncation)


def _restricted(f: Profile, R: Optional[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s, w, v = f.nodes, f.weights, f.values
    if R is not None:
        keep = np.abs(s) <= R
        s, w, v = s[keep], w[keep], v[keep]
    return s, w, v


def build_trial(curve: MonomialCurve, spec: TrialSpec, max_nodes: int = 1 << 20) -> Profile:
    """Parity-dependent concentrating profile at ``delta``.

    The bump at ``+1`` holds ``delta^{-1/p} f((t-1)/delta)`` at nodes
    ``1 + delta s_i``.  The partner at ``-1`` holds ``f`` (even curves) or
    ``alpha * conj(g)`` (odd curves) at the mirrored nodes ``-1 - delta s_i``.
    Nodes with ``|t| > 2`` are dropped.
    """
    parity = parity_class(curve)
    if parity == "odd" and spec.partner is None:
        raise ConfigError("odd curves need a partner profile g")
    delta, p = spec.delta, spec.p
    s, w, v = _restricted(spec.base, spec.truncation)
    if s.size < MIN_NODES_PER_BUMP:
        raise ResourceError(f"base profile has {s.size} nodes; at least {MIN_NODES_PER_BUMP} required")
    if s.size * (1 if parity == "neither" else 2) > max_nodes:
        raise ResourceError(f"trial needs more than the node budget of {max_nodes}")
    if parity != "neither":
        reach = float(np.max(np.abs(s)))
        if spec.partner is not None and parity == "odd":
            reach = max(reach, float(np.max(np.abs(_restricted(spec.partner, spec.truncation)[0]))))
        if not delta * reach < 1:
            raise DomainError(
                f"bumps at +1 and -1 overlap for delta={delta} (profile reach {reach}); need delta * reach < 1"
            )
    spacing = delta * float(np.min(np.diff(s))) if s.size > 1 else delta
    if spacing <= 64 * np.finfo(float).eps * (1 + delta * float(np.max(np.abs(s)))):
        raise ResourceError(f"delta={delta} is too small to resolve the bump nodes in double precision")
    scale = delta ** (-1.0 / p)
    t_parts = [1 + delta * s]
    w_parts = [delta * w]
    v_parts = [scale * v]
    if parity != "neither":
        if parity == "even":
            t2, w2, v2 = s, w, v
        else:
            t2, w2, v2 = _restricted(spec.partner, spec.truncation)
            v2 = spec.alpha * np.conj(v2)
        t_parts.insert(0, (-1 - delta * t2)[::-1])
        w_parts.insert(0, (delta * w2)[::-1])
        v_parts.insert(0, (scale * v2)[::-1])
    t = np.concatenate(t_parts)
    keep = np.abs(t) <= CUTOFF
    return Profile(t[keep], np.concatenate(w_parts)[keep], np.concatenate(v_parts)[keep])


def blowup_frame(curve, delta: float, a: float = 1.0) -> np.ndarray:
    """``A = T(a)^{-T} D_delta^{-1}``, so ``x = A y`` undoes ``y = D_delta T(a)^T x``."""
    poly = as_polynomial(curve)
    tinv = torsion_matrix(poly, a).inverse()
    return tinv.T @ moment_dilation(poly.dim, 1.0 / delta)


def cross_frequency(curve, frame: np.ndarray) -> np.ndarray:
    """Frequency in ``y`` of the relative phase between the bumps at ``+1`` and ``-1``."""
    poly = as_polynomial(curve)
    return frame.T @ (poly(1.0) - poly(-1.0))


def resolve_box(box: Box, freq: np.ndarray, alias_limit: float = np.pi / 4,
                max_points: int = 8_000_000) -> tuple[Box, bool]:
    """Raise per-axis resolution until ``|freq_j| h_j < alias_limit``; flag if over budget."""
    res = []
    for (lo, hi), n, w in zip(box.bounds, box.resolution, np.abs(freq)):
        need = int(np.ceil(w * (hi - lo) / alias_limit)) + 2
        res.append(max(n, need))
    if int(np.prod(res)) > max_points:
        return box, True
    return Box(box.bounds, tuple(res)), False


@dataclass(frozen=True)
class ScanRow:
    delta: float
    ratio: float
    aliased: bool
    input_norm: float
    grid: tuple


@dataclass(frozen=True)
class ScanReport:
    parity: str
    rows: tuple
    extrapolated: float
    fit_residual: float
    target: float
    relative_gap: float
    alpha: float = 1.0
    meta: dict = field(default_factory=dict)


def richardson_linear(deltas: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares ``a + b delta`` on the given points; returns ``(a, rms residual)``."""
    x = np.asarray(deltas, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size == 1:
        return float(y[0]), 0.0
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def _row_ratio(curve, spec: TrialSpec, pair: ScalingPair, box: Box, budget: int,
               max_points: int) -> tuple[float, bool, float, tuple]:
    prof = build_trial(curve, spec)
    frame = blowup_frame(curve, spec.delta)
    aliased = False
    grid = box
    if parity_class(curve) == "odd":
        grid, aliased = resolve_box(box, cross_frequency(curve, frame), max_points=max_points)
    F = extend(curve, prof, grid, frame=frame, budget=budget)
    num = lq_power(F, pair.q)
    den = lp_lambda_norm(curve, prof, pair.p)
    return num ** (1.0 / pair.q) / den, aliased, den, grid.resolution


def scan_target(parity: str, spec: TrialSpec, pair: ScalingPair, box: Box,
                budget: int = DEFAULT_BUDGET) -> float:
    """Moment-curve value the scan should approach as ``delta -> 0``."""
    g0 = moment_curve(pair.d)
    f = spec.base
    F = extend(g0, f, box, budget=budget)
    base = lq_power(F, pair.q) ** (1.0 / pair.q) / lp_plain_norm(f, pair.p)
    if parity == "neither":
        return base
    if parity == "even":
        return 2.0 ** (1.0 / pair.p_conj) * base
    g = spec.partner
    if not np.array_equal(g.nodes, f.nodes):
        raise ConfigError("partner profile must share the base profile nodes")
    G = extend(g0, g, box, budget=budget)
    avg = theta_average(F, G.with_values(spec.alpha * np.conj(G.values)), pair.q)
    den = (lp_plain_norm(f, pair.p) ** pair.p + spec.alpha**pair.p * lp_plain_norm(g, pair.p) ** pair.p) ** (1.0 / pair.p)
    return avg ** (1.0 / pair.q) / den


def lower_bound_scan(curve: MonomialCurve, spec: TrialSpec, deltas: Sequence[float],
                     pair: ScalingPair, box: Box, jitter: int = 4, tail: int = 3,
                     budget: int = DEFAULT_BUDGET, max_points: int = 8_000_000) -> ScanReport:
    """Ratios of the trial family over a decreasing ``delta`` list plus a first-order extrapolation.

    Odd-curve rows average the ratio over ``delta (1 + j/100)``, ``j < jitter``.
    Rows whose cross phase cannot be resolved within ``max_points`` are flagged
    and left out of the extrapolation.
    """
    deltas = [float(x) for x in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("delta list must be strictly decreasing")
    if pair.d != curve.dim:
        raise ConfigError("exponent pair dimension does not match the curve")
    parity = parity_class(curve)
    spec = TrialSpec(spec.base, spec.delta, pair.p, spec.partner, spec.alpha, spec.truncation)
    rows = []
    for dl in deltas:
        reps = [dl * (1 + j / 100) for j in range(jitter)] if parity == "odd" else [dl]
        vals, flags, norms, grid = [], [], [], box.resolution
        for dj in reps:
            r, al, nrm, grid = _row_ratio(curve, spec.with_delta(dj), pair, box, budget, max_points)
            vals.append(r)
            flags.append(al)
            norms.append(nrm)
        rows.append(ScanRow(dl, float(np.mean(vals)), any(flags), float(np.mean(norms)), tuple(grid)))
    good = [r for r in rows if not r.aliased][-tail:]
    if good:
        extrap, resid = richardson_linear([r.delta for r in good], [r.ratio for r in good])
    else:
        extrap, resid = float("nan"), float("nan")
    target = scan_target(parity, spec, pair, box, budget)
    gap = abs(extrap - target) / target
    return ScanReport(parity, tuple(rows), extrap, resid, target, gap, spec.alpha,
                      {"box": [list(b) for b in box.bounds], "resolution": list(box.resolution)})


def default_alpha(pair: ScalingPair) -> float:
    return psi_max(pair.p, pair.q).argmax_alpha
