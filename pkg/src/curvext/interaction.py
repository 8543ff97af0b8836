"""Two-point interaction functional and circle averages.

``psi(p, q, t)`` is the circle mean of ``|1 + e^{i theta} t|^q`` normalised
by ``(1 + t^p)^{q/p}``; its maximum over ``t in [0, 1]`` sets the
antipodal concentration factor for curves whose exponents are all odd.
All theta integrals use the periodic trapezoid rule, which converges
geometrically for these analytic periodic integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curves import ScalingPair
from .errors import ConfigError, DomainError
from .extension import Field, lq_power

GOLDEN = (math.sqrt(5) - 1) / 2


def _check_exponents(p: float, q: float) -> None:
    if not (p > 1 and q > 1 and math.isfinite(p) and math.isfinite(q)):
        raise ConfigError(f"need 1 < p, q < infinity; got p={p}, q={q}")


def circle_mean(fn, n0: int = 32, rtol: float = 1e-14, max_n: int = 1 << 16) -> float:
    """Mean of a smooth 2*pi-periodic ``fn`` over a period, doubling nodes until stable."""
    n = n0
    prev = float(np.mean(fn(2 * np.pi * np.arange(n) / n)))
    while n < max_n:
        n *= 2
        cur = float(np.mean(fn(2 * np.pi * np.arange(n) / n)))
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


def circle_moment(q: float, t: float) -> float:
    """``(1/2pi) int |1 + e^{i theta} t|^q dtheta``."""
    return circle_mean(lambda th: np.abs(1 + np.exp(1j * th) * t) ** q)


def psi(p: float, q: float, t: float) -> float:
    _check_exponents(p, q)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"psi is defined for t in [0, 1]; got t={t}")
    return circle_moment(q, t) * (1.0 + t**p) ** (-q / p)


@dataclass(frozen=True)
class InteractionResult:
    psi_value: float
    argmax_alpha: float
    psi_max: float
    near_maximizers: tuple = field(default_factory=tuple)


def psi_max(p: float, q: float, grid: int = 1001, tol: float = 1e-12,
            near_tol: float = 1e-9) -> InteractionResult:
    """Dense scan on ``[0, 1]`` refined by golden-section search.

    Ties (values within ``tol``) resolve toward the largest ``t``.  Every grid
    point within ``near_tol`` of the maximum is listed in ``near_maximizers``.
    """
    _check_exponents(p, q)
    ts = np.linspace(0.0, 1.0, grid)
    vals = np.array([psi(p, q, float(t)) for t in ts])
    vmax = vals.max()
    idx = int(np.flatnonzero(vals >= vmax - tol)[-1])
    best_t, best_v = float(ts[idx]), float(vals[idx])
    lo = float(ts[max(idx - 1, 0)])
    hi = float(ts[min(idx + 1, grid - 1)])
    if hi > lo:
        a, b = lo, hi
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        fc, fd = psi(p, q, c), psi(p, q, d)
        for _ in range(200):
            if b - a < 1e-13:
                break
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = psi(p, q, c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = psi(p, q, d)
        for cand in (a, (a + b) / 2, b):
            v = psi(p, q, cand)
            if v > best_v + tol or (abs(v - best_v) <= tol and cand > best_t):
                best_t, best_v = cand, v
    near = tuple(float(t) for t, v in zip(ts, vals) if v >= best_v - near_tol)
    return InteractionResult(psi_value=best_v, argmax_alpha=best_t, psi_max=best_v,
                             near_maximizers=near)


def conc_factor(parity: str, p: float, q: float, d: Optional[int] = None) -> float:
    """Ratio of the concentration threshold to the moment-curve norm for a parity class."""
    if d is not None:
        ScalingPair(p, q, d)
    _check_exponents(p, q)
    if parity == "odd":
        return psi_max(p, q).psi_max ** (1.0 / q)
    if parity == "even":
        return 2.0 ** ((p - 1) / p)
    if parity == "neither":
        return 1.0
    raise ValueError(f"unknown parity class {parity!r}")


def _require_same_grid(F: Field, G: Field) -> None:
    if not F.same_grid(G):
        raise DomainError("fields must live on identical grids")


def theta_average(F: Field, G: Field, q: float, n0: int = 32, rtol: float = 1e-10,
                  max_n: int = 4096) -> float:
    """``(1/2pi) int int |F + e^{i theta} G|^q dtheta dx``."""
    _require_same_grid(F, G)
    W = F.box.weights() * F.jacobian
    f, g = F.values, G.values

    def total(n):
        acc = 0.0
        for th in 2 * np.pi * np.arange(n) / n:
            acc += float(np.sum(W * np.abs(f + np.exp(1j * th) * g) ** q))
        return acc / n

    n = n0
    prev = total(n)
    while n < max_n:
        n *= 2
        cur = total(n)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


@dataclass(frozen=True)
class DriftValue:
    lam: float
    value: float
    max_phase_per_cell: float
    aliased: bool


def _drift_phase(F: Field, v, exponents, lam):
    v = np.asarray(v, dtype=float)
    freq = np.array([lam ** int(l) for l in exponents]) * v
    if F.frame is not None:
        freq = np.asarray(F.frame).T @ freq
    y = F.box.points()
    phase = y @ freq
    if F.offset is not None:
        phase = phase + float(np.asarray(F.offset) @ (np.array([lam ** int(l) for l in exponents]) * v))
    per_cell = float(np.max(np.abs(freq) * F.box.spacing()))
    return phase, per_cell


def drifting_norm(F: Field, G: Field, v, exponents: Sequence[int], lam: float, q: float,
                  alias_limit: float = np.pi / 4) -> DriftValue:
    """``|| F + exp(i D_lam^l x . v) G ||_q^q`` on the shared grid.

    ``aliased`` is set when the phase advances by ``alias_limit`` or more per
    grid cell along some axis.
    """
    _require_same_grid(F, G)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise DomainError("drift direction v must be nonzero")
    if lam <= 0:
        raise DomainError("lambda must be positive")
    phase, per_cell = _drift_phase(F, v, exponents, lam)
    val = lq_power(F.with_values(F.values + np.exp(1j * phase) * G.values), q)
    return DriftValue(float(lam), val, per_cell, per_cell >= alias_limit)


@dataclass(frozen=True)
class DriftSchedule:
    rows: tuple
    target: float
    limit: float
    relative_gap: float
    upper_bound: float


def drift_schedule(F: Field, G: Field, v, exponents: Sequence[int], q: float, p: float,
                   lam0: float = 1.0, ratio: float = 2.0, steps: int = 12,
                   tail: int = 3) -> DriftSchedule:
    """Run ``drifting_norm`` over ``lam0 * ratio**k`` and compare with the circle average.

    The reported limit is the mean over the last ``tail`` unaliased rows.
    """
    rows = tuple(drifting_norm(F, G, v, exponents, lam0 * ratio**k, q) for k in range(steps))
    good = [r.value for r in rows if not r.aliased]
    target = theta_average(F, G, q)
    limit = float(np.mean(good[-tail:])) if good else float("nan")
    nf = lq_power(F, q) ** (1.0 / q)
    ng = lq_power(G, q) ** (1.0 / q)
    bound = psi_max(p, q).psi_max * (nf**p + ng**p) ** (q / p)
    gap = abs(limit - target) / target if target > 0 else abs(limit)
    return DriftSchedule(rows, target, limit, gap, bound)


@dataclass(frozen=True)
class EqualityResult:
    proportional: Optional[bool]
    alpha: float
    orientation: str
    max_relative_deviation: float
    indeterminate: bool = False


def equality_case(F: Field, G: Field, alpha_tol: float = 1e-6,
                  floor: float = 1e-9) -> EqualityResult:
    """Decide whether ``|F| = alpha |G|`` or ``|G| = alpha |F|`` with ``alpha`` in ``[0, 1]``."""
    _require_same_grid(F, G)
    a, b = np.abs(F.values).ravel(), np.abs(G.values).ravel()
    ma, mb = a.max(), b.max()
    if ma == 0 and mb == 0:
        return EqualityResult(None, float("nan"), "", float("nan"), indeterminate=True)
    if ma == 0 or mb == 0:
        # one field vanishes: |zero| = 0 * |other|
        orient = "|F| = alpha |G|" if ma == 0 else "|G| = alpha |F|"
        return EqualityResult(True, 0.0, orient, 0.0)
    if ma <= mb:
        small, big, orient = a, b, "|F| = alpha |G|"
    else:
        small, big, orient = b, a, "|G| = alpha |F|"
    # points where either field is visible
    mask = (a > floor * ma) | (b > floor * mb)
    s, g = small[mask], big[mask]
    alpha = float(np.dot(s, g) / np.dot(g, g))
    dev = float(np.max(np.abs(s - alpha * g)) / np.max(g))
    return EqualityResult(dev <= alpha_tol, min(max(alpha, 0.0), 1.0), orient, dev)
