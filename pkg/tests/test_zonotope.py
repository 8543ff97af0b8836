
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from curvext.curves import MonomialCurve, PolynomialCurve, moment_curve
from curvext.decompose.zonotope import (
    admissible_indices,
    build_batch,
    class_label,
    containment_audit,
    containment_sweep,
    convex_body,
    normalization_check,
    overlap_audit,
    support_membership,
)
from curvext.errors import SingularTorsionError


def lp_member(z, x):
    """x in c + sum_i [-1,1] g_i, decided by a feasibility linear program."""
    G = z.generators.T
    res = linprog(np.zeros(G.shape[1]), A_eq=G, b_eq=x - z.center, bounds=[(-1, 1)] * G.shape[1], method="highs")
    return res.status == 0


def lp_intersect(z1, z2):
    G = np.hstack([z1.generators.T, -z2.generators.T])
    res = linprog(np.zeros(G.shape[1]), A_eq=G, b_eq=z2.center - z1.center, bounds=[(-1, 1)] * G.shape[1], method="highs")
    return res.status == 0


bodies_2d = st.tuples(st.integers(4, 7), st.integers(16, 64), st.integers(0, 40)).map(
    lambda a: convex_body(moment_curve(2), a[0], (0.0, a[1] * 2.0 ** -a[0]), a[2] * 2.0 ** -a[0]))


def test_center_inside_and_symmetric():
    b = convex_body(moment_curve(2), 5, (0.0, 0.5), 0.25)
    assert b.contains(b.center)[0]
    v = b.vertices()
    mirrored = 2 * b.center - v
    for p in mirrored:
        assert np.min(np.linalg.norm(v - p, axis=1)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(bodies_2d)
def test_polygon_vertices_match_convex_hull(b):
    v = b.vertices()
    assert len(v) <= 8
    hull = ConvexHull(b.zonotope.corner_points())
    assert len(v) == len(hull.vertices)
    ref = hull.points[hull.vertices]
    for p in v:
        assert np.min(np.linalg.norm(ref - p, axis=1)) < 1e-12


@settings(max_examples=10, deadline=None)
@given(bodies_2d, st.integers(0, 2**31))
def test_halfspace_membership_matches_linear_program(b, seed):
    rng = np.random.default_rng(seed)
    spread = np.abs(b.generators).sum(axis=0)
    x = b.center + rng.uniform(-1.1, 1.1, (60, 2)) * spread
    got = b.contains(x)
    ref = np.array([lp_member(b.zonotope, p) for p in x])
    assert np.array_equal(got, ref)


def test_halfspace_membership_matches_support_function_on_probes():
    rng = np.random.default_rng(7)
    dirs = rng.standard_normal((20000, 2))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    for m, n2, k in ((5, 20, 3), (6, 40, 11), (7, 100, 0)):
        b = convex_body(moment_curve(2), m, (0.0, n2 * 2.0**-m), k * 2.0**-m)
        x = b.center + rng.uniform(-1.2, 1.2, (1000, 2)) * np.abs(b.generators).sum(axis=0)
        agree = np.mean(b.contains(x) == support_membership(b.zonotope, x, dirs))
        assert agree >= 0.995
        # with the facet normals included the support test is exact
        full = np.vstack([dirs, b.zonotope.normals(), -b.zonotope.normals()])
        assert np.array_equal(b.contains(x), support_membership(b.zonotope, x, full))


def test_three_dimensional_body():
    b = convex_body(moment_curve(3), 4, (0.0, 0.5, 1.0), 0.125)
    assert b.generators.shape == (9, 3)
    v = b.vertices()
    assert np.all(b.contains(v, rtol=1e-9))
    rng = np.random.default_rng(1)
    x = b.center + rng.uniform(-1, 1, (40, 3)) * np.abs(b.generators).sum(axis=0)
    assert np.array_equal(b.contains(x), [lp_member(b.zonotope, p) for p in x])


def test_singular_torsion_is_rejected():
    with pytest.raises(SingularTorsionError):
        convex_body(MonomialCurve((1, 3)), 4, (0.0, 0.5), 0.0)


def test_normalization_check():
    assert normalization_check(moment_curve(2)).ok
    tweak = PolynomialCurve(np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.5, 0.004]]))
    chk = normalization_check(tweak, eps=0.05)
    assert chk.ok and chk.low_order_defect == 0 and chk.cn_distance == pytest.approx(0.024)
    shifted = PolynomialCurve(np.array([[0.0, 1.0, 0.01], [0.0, 0.0, 0.5]]))
    assert not normalization_check(shifted).ok


def test_containment_for_admissible_indices_at_level_k():
    K = 4
    idx = admissible_indices(K, K, 2, inside_unit_cube=False)
    rep = containment_sweep(moment_curve(2), idx, K, eps=0.05)
    assert rep.violations == 0 and rep.bodies == len(idx) and rep.precondition.ok
    assert rep.margin == pytest.approx(0.05 * 2.0**-10)
    zero = containment_sweep(moment_curve(2), idx, K, delta_margin=0.0)
    assert zero.violations == 0 and zero.max_excess <= rep.max_excess


def test_sweep_agrees_with_single_body_audit():
    g = moment_curve(2)
    idx = admissible_indices(2, 3, 2, inside_unit_cube=False)[:40]
    for margin in (0.01, 0.9):
        sweep = containment_sweep(g, idx, 2, delta_margin=margin, lattice=8)
        single = sum(containment_audit(g, m, np.array(n) * 2.0**-m, k * 2.0**-m, 2, delta_margin=margin,
                                       lattice=8).violations for m, n, k in idx)
        assert sweep.violations == single
    assert single > 0  # an oversized margin escapes the body


def test_containment_holds_on_a_perturbed_curve():
    curve = PolynomialCurve(np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.5, 0.004]]))
    idx = admissible_indices(4, 4, 2, inside_unit_cube=False)[::17]
    assert containment_sweep(curve, idx, 4).violations == 0


@settings(max_examples=25, deadline=None)
@given(bodies_2d, bodies_2d)
def test_pair_depth_sign_matches_linear_program(b1, b2):
    from curvext.decompose.zonotope import _pair_depth

    depth = _pair_depth((b1.center - b2.center)[None], np.concatenate([b1.generators, b2.generators])[None])[0]
    if abs(depth) > 1e-12:
        assert (depth > 0) == lp_intersect(b1.zonotope, b2.zonotope)


def test_class_label_separates_k_within_a_level():
    assert class_label((5, (0, 16), 3), 2) == class_label((5, (0, 16), 7), 2)
    assert class_label((5, (0, 16), 3), 2) != class_label((5, (0, 16), 4), 2)
    # n is compared as a point, so the same n at another level shares the label
    assert class_label((5, (0, 16), 0), 1) == class_label((6, (0, 32), 0), 1)


def test_overlap_audit_small_case():
    g = moment_curve(2)
    idx = [i for m in range(2, 6) for i in admissible_indices(2, m, 2, k_span=3, inside_unit_cube=False)]
    batch = build_batch(g, idx)
    assert overlap_audit(batch, 6).violations == 0
    neg = overlap_audit(batch, 1)
    assert neg.violations > 0 and len(neg.examples) > 0
    (a, b) = neg.examples[0]
    za = convex_body(g, a[0], np.array(a[1]) * 2.0 ** -a[0], a[2] * 2.0 ** -a[0]).zonotope
    zb = convex_body(g, b[0], np.array(b[1]) * 2.0 ** -b[0], b[2] * 2.0 ** -b[0]).zonotope
    assert lp_intersect(za, zb)


def test_repeated_indices_are_not_compared():
    g = moment_curve(2)
    idx = admissible_indices(2, 3, 2, inside_unit_cube=False)[:5]
    rep = overlap_audit(build_batch(g, idx + idx), 1)
    assert rep.bodies == 5


def test_batch_matches_single_bodies():
    g = moment_curve(2)
    idx = admissible_indices(2, 4, 2, inside_unit_cube=False)[::9]
    batch = build_batch(g, idx)
    for j, (m, n, k) in enumerate(idx):
        b = convex_body(g, m, np.array(n) * 2.0**-m, k * 2.0**-m)
        np.testing.assert_allclose(batch.centers[j], b.center)
        np.testing.assert_allclose(np.sort(batch.generators[j], axis=0), np.sort(b.generators, axis=0))
