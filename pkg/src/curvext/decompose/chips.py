"""Greedy chip decomposition of a profile into capped, interval-localised pieces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..curves import CurveLike, affine_density
from ..extension import Profile
from .intervals import DyadicInterval, candidate_intervals, lambda_mass, lambda_masses


@dataclass(frozen=True, eq=False)
class Chip:
    piece: Profile
    interval: DyadicInterval
    k: int
    height_cap: float
    mass: float  # ||piece||_{L^p(lambda)}^p, with the input normalised


@dataclass(frozen=True, eq=False)
class ChipDecomposition:
    chips: tuple
    residual: Profile
    candidates: tuple
    input_norm: float
    p: float
    # node masks: masks[k-1][i] is True where chip k owns node i
    masks: np.ndarray


class _CandidateTable:
    """Node-membership and cap data for every lattice candidate."""

    def __init__(self, curve: CurveLike, f: Profile, p: float, candidates: Sequence[DyadicInterval]):
        self.candidates = list(candidates)
        t = f.nodes
        a = np.array([iv.a for iv in self.candidates])
        b = np.array([iv.b for iv in self.candidates])
        last = f.nodes[-1]
        # half-open [a, b); the right end of the domain is closed
        self.member = (t[None, :] >= a[:, None]) & ((t[None, :] < b[:, None]) | ((b[:, None] >= last) & (t[None, :] == last)))
        self.lam_mass = lambda_masses(curve, a, b)
        self.length = b - a
        self.a = a
        self.p = p

    def caps(self, k: int) -> np.ndarray:
        return 2.0**k * self.lam_mass ** (-1.0 / self.p)

    def masses(self, node_mass: np.ndarray, absf: np.ndarray, alive: np.ndarray, level: int) -> np.ndarray:
        """``|| r chi_{tau cap {|f| < cap}} ||^p`` for every candidate."""
        below = absf[None, :] < self.caps(level)[:, None]
        sel = self.member & below & alive[None, :]
        return sel.astype(float) @ node_mass

    def select(self, masses: np.ndarray) -> int:
        """Largest mass; ties go to the leftmost, then the shortest interval."""
        top = masses.max()
        tied = np.flatnonzero(masses >= top - 1e-15 * max(top, 1e-300))
        order = np.lexsort((self.length[tied], self.a[tied]))
        return int(tied[order[0]])


def chip_decompose(curve: CurveLike, f: Profile, p: float, k_max: int,
                   step: Optional[float] = None,
                   candidates: Optional[Sequence[DyadicInterval]] = None) -> ChipDecomposition:
    """Peel chips ``f^1, ..., f^{k_max}`` off ``f`` (normalised internally).

    Step ``k`` takes the lattice candidate ``tau`` maximising the ``L^p(lambda)``
    mass of the current residual on ``tau`` where ``|f| < 2^k lambda(tau)^{-1/p}``.
    """
    lam = affine_density(curve, f.nodes)
    norm = float(np.sum(f.weights * np.abs(f.values) ** p * lam) ** (1.0 / p))
    if norm == 0:
        empty = np.zeros((0, f.nodes.size), dtype=bool)
        return ChipDecomposition((), f, (), 0.0, p, empty)
    g = f.values / norm
    absf = np.abs(g)
    node_mass = f.weights * absf**p * lam
    if candidates is None:
        lo, hi = f.support
        step = step if step is not None else (hi - lo) / 64
        candidates = candidate_intervals(curve, (lo, hi), step)
    table = _CandidateTable(curve, f, p, candidates)
    alive = np.ones(f.nodes.size, dtype=bool)
    chips, masks = [], []
    for k in range(1, k_max + 1):
        if not table.candidates:
            break
        masses = table.masses(node_mass, absf, alive, k)
        idx = table.select(masses)
        cap = float(table.caps(k)[idx])
        own = table.member[idx] & (absf < cap) & alive
        alive &= ~own
        masks.append(own)
        piece = f.with_values(np.where(own, g, 0.0))
        chips.append(Chip(piece, table.candidates[idx], k, cap, float(np.sum(node_mass[own]))))
    residual = f.with_values(np.where(alive, g, 0.0))
    mask_arr = np.array(masks) if masks else np.zeros((0, f.nodes.size), dtype=bool)
    return ChipDecomposition(tuple(chips), residual, tuple(table.candidates), norm, p, mask_arr)


def _node_mass(curve, prof: Profile, p: float) -> np.ndarray:
    return prof.weights * np.abs(prof.values) ** p * affine_density(curve, prof.nodes)


def residual_sup(curve: CurveLike, dec: ChipDecomposition, f: Profile, K: int) -> float:
    """``R_K``: largest capped mass of ``f^{>2K}`` over the candidates (cap ``2^K``)."""
    if len(dec.chips) < 2 * K:
        raise ValueError(f"need at least {2 * K} chips to evaluate R_{K}")
    p = dec.p
    g = f.values / dec.input_norm
    absf = np.abs(g)
    alive = ~np.any(dec.masks[: 2 * K], axis=0)
    table = _CandidateTable(curve, f, p, dec.candidates)
    node_mass = f.weights * absf**p * affine_density(curve, f.nodes)
    return float(table.masses(node_mass, absf, alive, K).max() ** (1.0 / p))


def maximality_violations(curve: CurveLike, dec: ChipDecomposition, f: Profile,
                          rtol: float = 1e-12) -> list[int]:
    """Steps ``k`` at which some candidate would have captured more than the chosen chip.

    Recomputed with an explicit loop over candidates, independent of the
    vectorised selection used during the decomposition.
    """
    p = dec.p
    g = f.values / dec.input_norm
    absf = np.abs(g)
    lam = affine_density(curve, f.nodes)
    node_mass = f.weights * absf**p * lam
    last = f.nodes[-1]
    bad = []
    alive = np.ones(f.nodes.size, dtype=bool)
    per_cand = [((f.nodes >= iv.a) & ((f.nodes < iv.b) | ((iv.b >= last) & (f.nodes == last))),
                 lambda_mass(curve, iv.a, iv.b) ** (-1.0 / p)) for iv in dec.candidates]
    for k, chip in enumerate(dec.chips, start=1):
        best = 0.0
        for inside, unit_cap in per_cand:
            best = max(best, float(np.sum(node_mass[inside & alive & (absf < 2.0**k * unit_cap)])))
        if best > chip.mass * (1 + rtol) + 1e-300:
            bad.append(k)
        alive &= ~dec.masks[k - 1]
    return bad


def mass_additivity_error(curve: CurveLike, dec: ChipDecomposition, f: Profile) -> float:
    """``|sum_k ||f^k||^p + ||f^{>k_max}||^p - 1|`` for the normalised input."""
    p = dec.p
    total = sum(float(np.sum(_node_mass(curve, c.piece, p))) for c in dec.chips)
    total += float(np.sum(_node_mass(curve, dec.residual, p)))
    return abs(total - 1.0)


def supports_disjoint(dec: ChipDecomposition) -> bool:
    if dec.masks.size == 0:
        return True
    return bool(np.all(dec.masks.sum(axis=0) <= 1))
