import numpy as np
import pytest

from curvext.curves import MonomialCurve, ScalingPair, affine_density, moment_curve
from curvext.errors import ConfigError, DomainError, ResourceError
from curvext.extension import Box, Profile, lp_lambda_norm, lp_plain_norm, rayleigh_ratio
from curvext.trials import (
    TrialSpec,
    blowup_frame,
    build_trial,
    cross_frequency,
    default_alpha,
    lower_bound_scan,
    resolve_box,
    richardson_linear,
    scan_target,
    truncated_gaussian,
)


@pytest.fixture(scope="module")
def base():
    return truncated_gaussian(256, 4.0)


def test_richardson_recovers_linear_intercept():
    a, resid = richardson_linear([0.3, 0.2, 0.1], [5 + 2 * 0.3, 5 + 2 * 0.2, 5 + 2 * 0.1])
    assert a == pytest.approx(5.0) and resid == pytest.approx(0.0, abs=1e-12)
    assert richardson_linear([0.1], [4.0]) == (4.0, 0.0)


@pytest.mark.parametrize("ls,expected", [((1, 2), 1), ((2, 4), 2), ((1, 3), 2)])
def test_trial_node_count_follows_parity(base, ls, expected):
    curve = MonomialCurve(ls)
    spec = TrialSpec(base, 0.1, 2.0, partner=base if ls == (1, 3) else None)
    prof = build_trial(curve, spec)
    assert prof.nodes.size == expected * base.nodes.size
    assert np.all(np.abs(prof.nodes) <= 2.0)


@pytest.mark.parametrize("ls", [(1, 4), (2, 4), (1, 3)])
def test_trial_norm_tends_to_concentrated_value(ls):
    # an off-centre bump makes the first-order term in delta visible
    bump = Profile.sample(lambda s: np.exp(-((s - 0.5) ** 2)), -3.5, 3.5, 512)
    curve = MonomialCurve(ls)
    copies = 1 if ls == (1, 4) else 2
    limit = affine_density(curve, 1.0) ** 0.5 * (copies * lp_plain_norm(bump, 2) ** 2) ** 0.5
    errs = []
    for delta in (0.1, 0.05, 0.025):
        spec = TrialSpec(bump, delta, 2.0, partner=bump if ls == (1, 3) else None)
        errs.append(abs(lp_lambda_norm(curve, build_trial(curve, spec), 2.0) - limit))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.2)


def test_trial_norm_is_exact_on_the_moment_curve(base):
    g = moment_curve(2)
    for delta in (0.2, 0.05):
        prof = build_trial(g, TrialSpec(base, delta, 2.0))
        assert lp_lambda_norm(g, prof, 2.0) == pytest.approx(lp_plain_norm(base, 2), rel=1e-12)


def test_trial_errors(base):
    with pytest.raises(ConfigError):
        build_trial(MonomialCurve((1, 3)), TrialSpec(base, 0.1, 2.0))
    with pytest.raises(DomainError):
        build_trial(MonomialCurve((2, 4)), TrialSpec(base, 0.3, 2.0))
    with pytest.raises(ResourceError):
        build_trial(moment_curve(2), TrialSpec(truncated_gaussian(32), 0.1, 2.0))
    with pytest.raises(DomainError):
        TrialSpec(base, 0.0, 2.0)
    with pytest.raises(DomainError):
        TrialSpec(base, 0.1, 2.0, alpha=1.5)


def test_blowup_frame_inverts_rescaling():
    curve = MonomialCurve((1, 3))
    A = blowup_frame(curve, 0.25)
    # y = D_delta T(1)^T x
    T = np.array([[1.0, 0.0], [0.5, 1.0]])
    forward = np.diag([0.25, 0.0625]) @ T.T
    np.testing.assert_allclose(A @ forward, np.eye(2), atol=1e-12)


def test_resolve_box_raises_resolution_or_flags():
    box = Box.cube(10, 64, 2)
    fine, flagged = resolve_box(box, np.array([5.0, 0.0]))
    assert not flagged and fine.resolution[0] > 64 and fine.resolution[1] == 64
    h = fine.spacing()[0]
    assert 5.0 * h < np.pi / 4
    same, flagged = resolve_box(box, np.array([5e4, 5e4]), max_points=10_000)
    assert flagged and same is box


def test_cross_frequency_grows_as_delta_shrinks():
    curve = MonomialCurve((1, 3))
    w1 = np.abs(cross_frequency(curve, blowup_frame(curve, 0.2))).max()
    w2 = np.abs(cross_frequency(curve, blowup_frame(curve, 0.1)))
    assert w2.max() > w1


def test_moment_curve_scan_is_flat(base, box20):
    g = moment_curve(2)
    pair = ScalingPair(2, 6, 2)
    rep = lower_bound_scan(g, TrialSpec(base, 0.2, 2.0), [0.2, 0.1, 0.05], pair, box20)
    ref = rayleigh_ratio(g, base, pair, box20)
    for row in rep.rows:
        assert row.ratio == pytest.approx(ref, rel=1e-3)
    assert rep.relative_gap < 1e-3


def test_scan_requires_decreasing_deltas(base, box20):
    with pytest.raises(ConfigError):
        lower_bound_scan(moment_curve(2), TrialSpec(base, 0.1, 2.0), [0.1, 0.2], ScalingPair(2, 6, 2), box20)


def test_even_target_is_sqrt_two_times_neither(base, box20):
    pair = ScalingPair(2, 6, 2)
    spec = TrialSpec(base, 0.1, 2.0)
    assert scan_target("even", spec, pair, box20) == pytest.approx(np.sqrt(2) * scan_target("neither", spec, pair, box20))


def test_odd_target_bounded_by_interaction_maximum(base, box20):
    pair = ScalingPair(2, 6, 2)
    neither = scan_target("neither", TrialSpec(base, 0.1, 2.0), pair, box20)
    odd = scan_target("odd", TrialSpec(base, 0.1, 2.0, partner=base, alpha=1.0), pair, box20)
    # the theta average of |F + conj F|^6 cannot beat 2.5 (||F||^2 + ||F||^2)^3
    assert neither <= odd <= 2.5 ** (1 / 6) * neither * (1 + 1e-9)


def test_default_alpha_for_two_six():
    assert default_alpha(ScalingPair(2, 6, 2)) == pytest.approx(1.0)


def test_even_scan_limit(base, box40):
    pair = ScalingPair(2, 6, 2)
    rep = lower_bound_scan(MonomialCurve((2, 4)), TrialSpec(base, 0.2, 2.0), [0.2, 0.1, 0.05, 0.025], pair, box40)
    assert rep.parity == "even"
    assert rep.relative_gap < 1e-3
    neither = rayleigh_ratio(moment_curve(2), base, pair, box40) * lp_lambda_norm(moment_curve(2), base, 2) / lp_plain_norm(base, 2)
    # consistency: the neither-case value stays below the even-case target
    assert neither <= rep.target
