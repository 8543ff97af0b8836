"""Batch front end: ``curvext <command> --config run.json [--out DIR] [--seed N]``.

Every run writes ``data.csv``, ``summary.json`` and ``manifest.json`` (the
resolved config plus a sha256 of each output file).  Errors are reported as
one JSON object on stderr with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .curves import MonomialCurve, ScalingPair, as_polynomial, parse_curve
from .errors import ConfigError, CurvextError, NonFiniteError, ResourceError
from .extension import Box, Profile, blowup_identity_check, blowup_sides, extend
from .extremize import AscentOptions, ascend, default_init, multi_start, refinement_pass
from .interaction import drift_schedule, psi, psi_max
from .reporting import write_csv, write_json, write_manifest
from .trials import TrialSpec, default_alpha, lower_bound_scan, truncated_gaussian

COMMANDS = ("psi-table", "trial-scan", "extremize", "decompose", "audit", "drift", "identity-check")

EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_DOMAIN = 4
EXIT_IO = 5


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def _get(cfg: dict, key: str, default: Any = None, required: bool = False) -> Any:
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"config is missing required key {key!r}")
    cfg[key] = default
    return default


def _infer_dim(p: float, q: float) -> int:
    """The ``d`` for which ``q = (d^2+d)/2 * p'``, if there is one."""
    ratio = q * (p - 1) / p * 2
    d = (math.sqrt(1 + 4 * ratio) - 1) / 2
    if abs(d - round(d)) > 1e-9 or round(d) < 1:
        raise ConfigError(f"no dimension d satisfies q = (d^2+d)/2 * p' for p={p}, q={q}")
    return int(round(d))


def resolve_pair(cfg: dict, dim: int | None) -> ScalingPair:
    p = float(_get(cfg, "p", required=True))
    if p <= 1:
        raise ConfigError(f"p must exceed 1, got {p}")
    if dim is None:
        dim = int(cfg["d"]) if "d" in cfg else None
    q = cfg.get("q")
    if dim is None:
        if q is None:
            raise ConfigError("need a curve, d, or q to fix the exponent pair")
        dim = _infer_dim(p, float(q))
    if q is None:
        pair = ScalingPair.from_p(p, dim)
    else:
        pair = ScalingPair(p, float(q), dim)
    cfg["q"] = pair.q
    cfg["d"] = pair.d
    return pair


def _curve(cfg: dict, default: str | None = None):
    spec = _get(cfg, "curve", default, required=default is None)
    return parse_curve(spec)


def _box(cfg: dict, d: int, default_half: float = 20.0, default_n: int = 128) -> Box:
    spec = _get(cfg, "box", {"half_width": default_half, "n": default_n})
    if "bounds" in spec:
        return Box(tuple(tuple(b) for b in spec["bounds"]), tuple(spec["resolution"]))
    return Box.cube(float(spec.get("half_width", default_half)), int(spec.get("n", default_n)), d)


def _profile(spec: dict, seed: int) -> Profile:
    kind = spec.get("kind", "gaussian")
    m = int(spec.get("m", 1024))
    if kind == "gaussian":
        return truncated_gaussian(m, float(spec.get("half_width", 4.0)))
    if kind == "indicator":
        return Profile.indicator(float(spec.get("a", -1.0)), float(spec.get("b", 1.0)), m)
    if kind == "random":
        rng = np.random.default_rng(seed)
        a, b = float(spec.get("a", 0.0)), float(spec.get("b", 1.0))
        t = np.linspace(a, b, m)
        vals = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return Profile.sample(lambda s: np.interp(s, t, vals.real) + 1j * np.interp(s, t, vals.imag), a, b, m)
    raise ConfigError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# commands: each returns (columns, rows, summary, extra files)
# ---------------------------------------------------------------------------

def cmd_psi_table(cfg: dict, seed: int, out: Path):
    pair = resolve_pair(cfg, None)
    n = int(_get(cfg, "points", 101))
    ts = np.linspace(0.0, 1.0, n)
    rows = [(float(t), psi(pair.p, pair.q, float(t))) for t in ts]
    best = psi_max(pair.p, pair.q)
    return ["t", "psi"], rows, {"psi_max": best.psi_max, "argmax_alpha": best.argmax_alpha}, []


def cmd_trial_scan(cfg: dict, seed: int, out: Path):
    curve = _curve(cfg)
    if not isinstance(curve, MonomialCurve):
        raise ConfigError("trial scans need a monomial curve")
    pair = resolve_pair(cfg, curve.dim)
    box = _box(cfg, curve.dim, 20.0, 128)
    base = _profile(_get(cfg, "profile", {"kind": "gaussian", "m": 1024, "half_width": 4.0}), seed)
    alpha = _get(cfg, "alpha", 1.0)
    if alpha == "auto":
        alpha = default_alpha(pair)
    partner = base if curve.parity == "odd" else None
    deltas = _get(cfg, "deltas", [0.2, 0.15, 0.1])
    spec = TrialSpec(base, float(deltas[0]), pair.p, partner, float(alpha))
    rep = lower_bound_scan(curve, spec, deltas, pair, box, jitter=int(_get(cfg, "jitter", 4)),
                           max_points=int(_get(cfg, "max_points", 8_000_000)))
    rows = [(r.delta, r.ratio, r.aliased) for r in rep.rows]
    summary = {"parity": rep.parity, "target": rep.target, "extrapolated": rep.extrapolated,
               "relative_gap": rep.relative_gap, "fit_residual": rep.fit_residual,
               "alpha": rep.alpha, "aliased_rows": sum(r.aliased for r in rep.rows)}
    return ["delta", "ratio", "aliased"], rows, summary, []


def cmd_extremize(cfg: dict, seed: int, out: Path):
    curve = _curve(cfg, "monomial: [1, 2]")
    pair = resolve_pair(cfg, curve.dim)
    box = _box(cfg, curve.dim, 20.0, 128)
    init_spec = _get(cfg, "init", {"kind": "gaussian"})
    m = int(init_spec.get("m", 512))
    hw = float(init_spec.get("half_width", 4.0))
    if init_spec.get("kind", "gaussian") == "gaussian":
        init = default_init(hw, m, seed)
    else:
        init = _profile({**init_spec, "m": m}, seed)
    opts = AscentOptions(max_iter=int(_get(cfg, "max_iter", 500)), rtol=float(_get(cfg, "rtol", 1e-7)),
                         method=str(_get(cfg, "method", "lbfgs")))
    starts = int(_get(cfg, "starts", 1))
    if starts < 1:
        raise ConfigError("starts must be at least 1")
    state = ascend(curve, pair, init, box, opts)
    spread = {}
    if starts > 1:
        ms = multi_start(curve, pair, box, range(seed + 1, seed + starts), opts, hw, m)
        ratios = [state.ratio, *ms.ratios.tolist()]
        spread = {"start_ratios": ratios, "start_spread": (max(ratios) - min(ratios)) / max(ratios)}
        if ms.ratios[ms.best] > state.ratio:
            state = ms.states[ms.best]
    ref = refinement_pass(curve, pair, state, box)
    prof = state.profile
    rows = [(float(t), float(v.real), float(v.imag)) for t, v in zip(prof.nodes, prof.values)]
    hist = out / "history.csv"
    write_csv(hist, ["iteration", "ratio"], list(enumerate(state.history)), "extremize")
    summary = {"final_ratio": state.ratio, "residual": state.residual, "iterations": state.iteration,
               "converged": state.converged, "tail_diagnostic": state.tail_fraction,
               "refined_ratio": ref.fine_ratio, "refinement_drift": ref.drift,
               "note": "numerical lower estimate of the sharp constant", **spread}
    return ["t", "re", "im"], rows, summary, [hist]


def _decompose_chips(cfg, seed, out):
    from .decompose.chips import chip_decompose, mass_additivity_error, residual_sup, supports_disjoint

    curve = _curve(cfg, "monomial: [1, 2]")
    pair = resolve_pair(cfg, as_polynomial(curve).dim)
    f = _profile(_get(cfg, "profile", {"kind": "random", "a": 0.0, "b": 1.0, "m": 256}), seed)
    k_max = int(_get(cfg, "k_max", 10))
    dec = chip_decompose(curve, f, pair.p, k_max, step=cfg.get("step"))
    rows = [(c.k, c.interval.a, c.interval.b, c.interval.m, c.mass, c.height_cap) for c in dec.chips]
    rk = {}
    for K in range(1, len(dec.chips) // 2 + 1):
        rk[str(K)] = residual_sup(curve, dec, f, K)
    summary = {"chips": len(dec.chips), "candidates": len(dec.candidates),
               "additivity_error": mass_additivity_error(curve, dec, f),
               "supports_disjoint": supports_disjoint(dec), "residual_sup": rk}
    return ["k", "a", "b", "m", "mass", "height_cap"], rows, summary, []


def _decompose_whitney(cfg, seed, out):
    from .decompose.whitney import whitney_audit, whitney_cubes

    K, d = int(_get(cfg, "K", 4)), int(_get(cfg, "d", 2))
    m_min, m_max = int(_get(cfg, "m_min", K)), int(_get(cfg, "m_max", K + 4))
    cubes = whitney_cubes(K, m_min, m_max, d)
    audit = whitney_audit(cubes, K, m_min, m_max, d)
    cols = ["m", *[f"n{j + 1}" for j in range(d)], "k", "distance"]
    rows = [(c.m, *[int(v) for v in c.n_index], c.k_index, c.distance) for c in cubes]
    summary = {"cubes": audit.cubes, "distance_violations": audit.distance_violations,
               "uncovered_samples": audit.uncovered_samples, "samples_checked": audit.samples_checked,
               "overlap_max": audit.max_overlap, "inner_band": list(audit.inner_band)}
    return cols, rows, summary, []


def _decompose_probe(cfg, seed, out):
    from .decompose.chips import chip_decompose
    from .decompose.profiles import chip_interaction_probe

    curve = _curve(cfg, "monomial: [1, 2]")
    pair = resolve_pair(cfg, as_polynomial(curve).dim)
    f = _profile(_get(cfg, "profile", {"kind": "random", "a": 0.0, "b": 1.0, "m": 256}), seed)
    dec = chip_decompose(curve, f, pair.p, int(_get(cfg, "k_max", 6)), step=cfg.get("step"))
    box = _box(cfg, pair.d, 40.0, 128)
    probe = chip_interaction_probe(curve, dec, box, pair.q)
    rows = []
    for i, ki in enumerate(probe.indices):
        for j, kj in enumerate(probe.indices):
            if j > i and np.isfinite(probe.matrix[i, j]):
                rows.append((ki, kj, float(probe.matrix[i, j])))
    return ["k", "k_other", "overlap"], rows, {"chips": len(probe.indices), "exploratory": True}, []


def cmd_audit(cfg: dict, seed: int, out: Path):
    from .decompose.zonotope import admissible_indices, build_batch, containment_sweep, overlap_audit

    curve = _curve(cfg, "monomial: [1, 2]")
    d = as_polynomial(curve).dim
    K, L = int(_get(cfg, "K", 4)), int(_get(cfg, "L", 8))
    eps = float(_get(cfg, "eps", 0.05))
    m_min, m_max = int(_get(cfg, "m_min", K)), int(_get(cfg, "m_max", K + 4))
    k_span = float(_get(cfg, "k_span", 3.0))
    levels = range(m_min, m_max + 1)
    cont_idx = [i for m in levels for i in admissible_indices(K, m, d, inside_unit_cube=False)]
    cont = containment_sweep(curve, cont_idx, K, eps=eps)
    over_idx = [i for m in levels for i in admissible_indices(K, m, d, k_span=k_span, inside_unit_cube=False)]
    over = overlap_audit(build_batch(curve, over_idx), L)
    rows = [("containment", cont.bodies, cont.points_checked, cont.violations),
            ("overlap", over.bodies, over.pairs_checked, over.violations)]
    summary = {"containment_violations": cont.violations, "containment_max_excess": cont.max_excess,
               "normalization_ok": cont.precondition.ok, "margin": cont.margin,
               "violations": over.violations, "touching": over.touching, "classes": over.classes,
               "pairs_checked": over.pairs_checked}
    return ["audit", "bodies", "checks", "violations"], rows, summary, []


def cmd_decompose(cfg: dict, seed: int, out: Path):
    mode = _get(cfg, "mode", "chips")
    table: dict[str, Callable] = {"chips": _decompose_chips, "whitney": _decompose_whitney,
                                  "audit": cmd_audit, "probe": _decompose_probe}
    if mode not in table:
        raise ConfigError(f"unknown decompose mode {mode!r}; choose from {sorted(table)}")
    return table[mode](cfg, seed, out)


def cmd_drift(cfg: dict, seed: int, out: Path):
    curve = _curve(cfg, "monomial: [1, 2]")
    pair = resolve_pair(cfg, as_polynomial(curve).dim)
    box = _box(cfg, pair.d, 10.0, 512)
    f = _profile(_get(cfg, "profile", {"kind": "gaussian", "m": 256}), seed)
    F = extend(curve, f, box)
    shift = np.asarray(_get(cfg, "shift", [0.5] + [0.0] * (pair.d - 1)), dtype=float)
    G = extend(curve, f.modulated(curve, shift), box)
    v = _get(cfg, "v", [1.0] * pair.d)
    exps = _get(cfg, "exponents", list(range(1, pair.d + 1)))
    sched = drift_schedule(F, G, v, exps, pair.q, pair.p, float(_get(cfg, "lam0", 1.0)),
                           float(_get(cfg, "ratio", 1.4)), int(_get(cfg, "steps", 8)))
    rows = [(r.lam, r.value, r.aliased) for r in sched.rows]
    summary = {"target": sched.target, "limit": sched.limit, "relative_gap": sched.relative_gap,
               "upper_bound": sched.upper_bound, "aliased_rows": sum(r.aliased for r in sched.rows)}
    return ["lambda", "value", "aliased"], rows, summary, []


def cmd_identity_check(cfg: dict, seed: int, out: Path):
    curve = _curve(cfg, "monomial: [1, 3]")
    pair = resolve_pair(cfg, as_polynomial(curve).dim)
    a, delta = float(_get(cfg, "a", 1.0)), float(_get(cfg, "delta", 0.25))
    f = _profile(_get(cfg, "profile", {"kind": "gaussian", "m": 512, "half_width": 1.0}), seed)
    f = Profile(f.nodes * delta + a, f.weights * delta, f.values)
    n = int(_get(cfg, "points", 100))
    rng = np.random.default_rng(seed)
    x = rng.uniform(-float(_get(cfg, "radius", 5.0)), float(cfg["radius"]), (n, pair.d))
    lhs, rhs, _, _ = blowup_sides(curve, a, delta, f, pair.p, x, pair.q)
    rep = blowup_identity_check(curve, a, delta, f, x, pair.p, pair.q)
    cols = [*[f"x{j + 1}" for j in range(pair.d)], "lhs_re", "lhs_im", "rhs_re", "rhs_im"]
    rows = [(*xi, l.real, l.imag, r.real, r.imag) for xi, l, r in zip(x, lhs, rhs)]
    summary = {"pointwise": rep.pointwise, "norm": rep.norm, "lhs_norm": rep.lhs_norm, "rhs_norm": rep.rhs_norm}
    return cols, rows, summary, []


HANDLERS: dict[str, Callable] = {
    "psi-table": cmd_psi_table,
    "trial-scan": cmd_trial_scan,
    "extremize": cmd_extremize,
    "decompose": cmd_decompose,
    "audit": cmd_audit,
    "drift": cmd_drift,
    "identity-check": cmd_identity_check,
}


def _validate_pair_first(cfg: dict) -> None:
    """Check any explicit ``(p, q)`` before the command does expensive work."""
    if "p" in cfg and "q" in cfg:
        d = cfg.get("d")
        if d is None and "curve" in cfg:
            d = as_polynomial(parse_curve(cfg["curve"])).dim
        if d is None:
            d = _infer_dim(float(cfg["p"]), float(cfg["q"]))
        ScalingPair(float(cfg["p"]), float(cfg["q"]), int(d))


def run(command: str, config: dict, out: str | Path, seed: int | None = None) -> dict:
    """Execute one command and write its artifacts; returns the summary."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}; choose from {list(COMMANDS)}")
    cfg = json.loads(json.dumps(config))  # private deep copy
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    cfg["command"] = command
    if seed is not None:
        cfg["seed"] = int(seed)
    seed = int(cfg.setdefault("seed", 0))
    _validate_pair_first(cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cols, rows, summary, extra = HANDLERS[command](cfg, seed, out)
    data = write_csv(out / "data.csv", cols, rows, command)
    summ = write_json(out / "summary.json", summary, command)
    write_manifest(out, command, cfg, [data, summ, *extra], _version())
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="curvext", description="Extension-operator experiments on polynomial curves.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return ap


def _fail(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = json.loads(Path(args.config).read_text())
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        run(args.command, config, args.out, args.seed)
    except json.JSONDecodeError as exc:
        return _fail("ConfigError", f"config is not valid JSON: {exc}", EXIT_CONFIG)
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), EXIT_CONFIG)
    except ResourceError as exc:
        return _fail("ResourceError", str(exc), EXIT_RESOURCE)
    except NonFiniteError as exc:
        return _fail("NonFiniteError", str(exc), EXIT_DOMAIN, producer=exc.producer)
    except CurvextError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_DOMAIN)
    except OSError as exc:
        return _fail("OSError", str(exc), EXIT_IO)
    return 0


if __name__ == "__main__":
    sys.exit(main())
