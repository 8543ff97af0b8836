import numpy as np
import pytest

from curvext.errors import DomainError
from curvext.extension import Box, Profile, lp_lambda_norm, rayleigh_ratio, trapezoid_weights
from curvext.extremize import (
    AscentOptions,
    ascend,
    default_init,
    euler_lagrange_residual,
    gradient_check,
    refinement_pass,
)


@pytest.fixture(scope="module")
def converged(parabola, pair26, box20):
    return ascend(parabola, pair26, default_init(4.0, 512, seed=0), box20, AscentOptions(rtol=1e-10))


def test_history_is_monotone_and_normalised(converged, parabola, pair26):
    hist = np.array(converged.history)
    assert np.all(np.diff(hist) > 0)
    assert converged.ratio == hist[-1]
    assert lp_lambda_norm(parabola, converged.profile, pair26.p) == pytest.approx(1.0, rel=1e-12)


def test_converged_profile_is_stationary(converged):
    assert converged.converged
    assert converged.residual < 1e-4


def test_ascent_beats_gaussian_start(converged, parabola, pair26, box20, gaussian):
    assert converged.ratio >= rayleigh_ratio(parabola, gaussian, pair26, box20)


def test_gradient_matches_finite_differences(parabola, pair26, box20):
    check = gradient_check(parabola, pair26, default_init(4.0, 256, seed=1), box20)
    assert check.max_relative_error < 1e-4


def test_random_profiles_are_not_stationary(parabola, pair26, box20):
    t = np.linspace(-2, 2, 128)
    vals = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        f = Profile(t, trapezoid_weights(t), rng.standard_normal(128) + 1j * rng.standard_normal(128))
        vals.append(euler_lagrange_residual(parabola, pair26, f, box20).residual)
    assert np.median(vals) > 0.1


def test_zero_first_variation_is_flagged(parabola, pair26):
    f = Profile.sample(lambda t: np.exp(-t * t), -1, 1, 32)
    # a box far from the origin still sees a nonzero field; a zero profile has none
    res = euler_lagrange_residual(parabola, pair26, f.with_values(0 * f.values), Box.cube(1, 5, 2))
    assert res.stationary and res.residual == 0.0


def test_indicator_start_reaches_the_same_basin(converged, parabola, pair26, box20):
    window = default_init(4.0, 512)
    init = window.with_values((np.abs(window.nodes) <= 1.0).astype(float))
    other = ascend(parabola, pair26, init, box20, AscentOptions(rtol=1e-10))
    assert other.ratio >= converged.ratio - 1e-3


def test_modulated_start_is_equivalent(converged, parabola, pair26, box20):
    init = default_init(4.0, 512, seed=0).modulated(parabola, [3.0, -2.0])
    # the modulated field is the translate by (3, -2); shift the box with it
    shifted = Box(((-23.0, 17.0), (-18.0, 22.0)), box20.resolution)
    other = ascend(parabola, pair26, init, shifted, AscentOptions(rtol=1e-10))
    assert other.ratio == pytest.approx(converged.ratio, abs=1e-3)


def test_converged_profile_is_dilation_invariant(converged, parabola, pair26, box20):
    from curvext.extension import scaling_frame, scaling_profile

    base = rayleigh_ratio(parabola, converged.profile, pair26, box20)
    for delta in (0.5, 2.0):
        fd = scaling_profile(converged.profile, (1, 2), delta, pair26.p)
        r = rayleigh_ratio(parabola, fd, pair26, box20, frame=scaling_frame((1, 2), delta))
        assert r == pytest.approx(base, rel=1e-3)


def test_refinement_drift_is_small(converged, parabola, pair26, box20):
    assert refinement_pass(parabola, pair26, converged, box20).drift < 1e-3


def test_plain_gradient_method_also_ascends(parabola, pair26, box20):
    st = ascend(parabola, pair26, default_init(4.0, 256), box20, AscentOptions(method="gradient", max_iter=15))
    assert np.all(np.diff(st.history) > 0)


def test_bad_inputs(parabola, pair26, box20):
    f = Profile.sample(lambda t: 0 * t, -1, 1, 32)
    with pytest.raises(DomainError):
        ascend(parabola, pair26, f, box20)
    with pytest.raises(ValueError):
        ascend(parabola, pair26, default_init(m=64), box20, AscentOptions(method="newton"))


def test_multi_start_spread_is_small_on_the_parabola(parabola, pair26, box20):
    from curvext.extremize import multi_start

    ms = multi_start(parabola, pair26, box20, [1, 2, 3], AscentOptions(rtol=1e-10), m=256)
    assert len(ms.states) == 3 and ms.ratios[ms.best] == ms.ratios.max()
    assert ms.spread < 1e-3
