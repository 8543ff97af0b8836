"""Constructive surrogate of a profile decomposition, plus a chip-interaction probe.

Each stage locates the largest value of ``|E r_n|`` for every member of the
sequence, demodulates ``r_n`` at that point, averages over the sequence and
low-pass filters the average.  The filter removes the rapidly oscillating
remains of the other profiles, which average out only slowly in ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import minimize

from ..curves import CurveLike, as_polynomial
from ..errors import ConfigError, DomainError
from ..extension import Box, Profile, extend, extend_at_points, lp_lambda_norm, lq_norm
from .chips import ChipDecomposition

DEFAULT_SMOOTHING = 0.1


@dataclass(frozen=True, eq=False)
class ExtractionStage:
    profile: Profile
    points: np.ndarray  # (N, d): x_n^j
    norms_before: np.ndarray  # ||E r_n^{j-1}||_q
    norms_after: np.ndarray  # ||E r_n^j||_q

    @property
    def decrement(self) -> np.ndarray:
        return self.norms_before - self.norms_after


@dataclass(frozen=True, eq=False)
class Extraction:
    stages: tuple
    residuals: tuple
    bound: float
    terminated_early: bool
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.stages)

    def separations(self) -> np.ndarray:
        """``min_{j != j'} |x_n^j - x_n^{j'}|`` per sequence member (``inf`` with fewer than two stages)."""
        if len(self.stages) < 2:
            n = len(self.residuals)
            return np.full(n, np.inf)
        pts = np.stack([s.points for s in self.stages], axis=1)  # (N, J, d)
        diff = np.linalg.norm(pts[:, :, None, :] - pts[:, None, :, :], axis=-1)
        J = pts.shape[1]
        diff[:, np.arange(J), np.arange(J)] = np.inf
        return diff.min(axis=(1, 2))


def _support_bound(f: Profile) -> float:
    """Smallest ``R`` with ``|f| <= R`` and ``supp f`` inside ``[-R, R]``."""
    mag = np.abs(f.values)
    live = f.nodes[mag > 0]
    reach = float(np.max(np.abs(live))) if live.size else 0.0
    return max(float(mag.max()), reach)


def _smooth(values: np.ndarray, nodes: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return values
    step = np.diff(nodes)
    if not np.allclose(step, step[0], rtol=1e-9, atol=0):
        raise ConfigError("smoothing needs uniformly spaced nodes")
    s = sigma / step[0]
    return gaussian_filter1d(values.real, s, mode="constant") + 1j * gaussian_filter1d(values.imag, s, mode="constant")


def _peak(curve, r: Profile, box: Box) -> tuple[np.ndarray, float]:
    """Grid argmax of ``|E r|`` polished by a local search within one cell."""
    F = extend(curve, r, box)
    mag = np.abs(F.values)
    idx = np.unravel_index(int(np.argmax(mag)), mag.shape)
    x0 = np.array([ax[i] for ax, i in zip(box.axes(), idx)])
    h = box.spacing()
    res = minimize(lambda x: -np.abs(extend_at_points(curve, r, x[None, :])[0]), x0,
                   method="L-BFGS-B", bounds=[(c - hh, c + hh) for c, hh in zip(x0, h)])
    x = res.x if -res.fun >= mag[idx] else x0
    return x, F


def profile_extract(curves: CurveLike | Sequence[CurveLike], profiles: Sequence[Profile], J: int,
                    box: Box, *, p: float, q: float, bound: Optional[float] = None,
                    floor: float = 1e-8, smoothing: float = DEFAULT_SMOOTHING) -> Extraction:
    """Peel up to ``J`` common profiles off the sequence ``profiles``.

    ``curves`` is one curve or one per sequence member.  All profiles share
    their nodes.  A stage stops the loop when every ``||E r_n||_q`` is below
    ``floor``.
    """
    profiles = list(profiles)
    if not profiles:
        raise ConfigError("need at least one profile")
    if isinstance(curves, (list, tuple)):
        curves = [as_polynomial(c) for c in curves]
        if len(curves) != len(profiles):
            raise ConfigError("one curve per profile is required")
    else:
        curves = [as_polynomial(curves)] * len(profiles)
    nodes = profiles[0].nodes
    if any(not np.array_equal(f.nodes, nodes) for f in profiles):
        raise ConfigError("profiles must share their nodes")
    R = max(_support_bound(f) for f in profiles)
    if bound is not None and R > bound:
        raise DomainError(f"profiles exceed the bound R={bound} (need {R})")
    resid = [f for f in profiles]
    stages = []
    early = False
    norms = np.array([lq_norm(extend(c, r, box), q) for c, r in zip(curves, resid)])
    for _ in range(J):
        if np.all(norms < floor):
            early = True
            break
        pts = []
        acc = np.zeros(nodes.size, dtype=complex)
        for c, r in zip(curves, resid):
            x, _ = _peak(c, r, box)
            pts.append(x)
            acc += r.modulated(c, x).values
        phi = profiles[0].with_values(_smooth(acc / len(resid), nodes, smoothing))
        pts = np.array(pts)
        resid = [r.with_values(r.values - phi.modulated(c, -x).values)
                 for c, r, x in zip(curves, resid, pts)]
        after = np.array([lq_norm(extend(c, r, box), q) for c, r in zip(curves, resid)])
        stages.append(ExtractionStage(phi, pts, norms, after))
        norms = after
    return Extraction(tuple(stages), tuple(resid), R, early,
                      {"p": p, "q": q, "smoothing": smoothing, "J": J})


def relative_lp_error(curve: CurveLike, approx: Profile, truth: Profile, p: float) -> float:
    diff = approx.with_values(approx.values - truth.values)
    return lp_lambda_norm(curve, diff, p) / lp_lambda_norm(curve, truth, p)


@dataclass(frozen=True)
class InteractionProbe:
    indices: tuple
    matrix: np.ndarray  # ||E f^j E f^k||_{q/2} / (||E f^j||_q ||E f^k||_q)


def chip_interaction_probe(curve: CurveLike, dec: ChipDecomposition, box: Box, q: float) -> InteractionProbe:
    """Pairwise bilinear overlap of chip extensions (exploratory; no threshold is asserted)."""
    fields = [extend(curve, c.piece, box) for c in dec.chips]
    W = box.weights()
    norms = [lq_norm(F, q) for F in fields]
    n = len(fields)
    M = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(i, n):
            if norms[i] == 0 or norms[j] == 0:
                continue
            prod = np.abs(fields[i].values * fields[j].values)
            val = float(np.sum(W * fields[i].jacobian * prod ** (q / 2)) ** (2 / q)) / (norms[i] * norms[j])
            M[i, j] = M[j, i] = val
    return InteractionProbe(tuple(c.k for c in dec.chips), M)
