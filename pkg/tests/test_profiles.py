import numpy as np
import pytest

from curvext.curves import moment_curve
from curvext.decompose.chips import chip_decompose
from curvext.decompose.profiles import chip_interaction_probe, profile_extract, relative_lp_error
from curvext.errors import ConfigError, DomainError
from curvext.extension import Box, Profile, trapezoid_weights

NODES = np.linspace(-4, 4, 257)
WEIGHTS = trapezoid_weights(NODES)
BOX = Box(((-60.0, 60.0), (-20.0, 20.0)), (241, 81))


def prof(values):
    return Profile(NODES, WEIGHTS, values)


def synthetic(points, phi):
    g = moment_curve(2)
    return [prof(sum(p.modulated(g, -x).values for p, x in zip(phi, xs))) for xs in points]


def test_single_profile_recovery():
    g = moment_curve(2)
    phi = prof(np.exp(-NODES**2))
    xs = [[np.array([-10.0 - 3 * n + 0.2, 0.5 * n - 1.0])] for n in range(6)]
    ex = profile_extract(g, synthetic(xs, [phi]), 1, BOX, p=2, q=6)
    assert ex.count == 1
    assert relative_lp_error(g, ex.stages[0].profile, phi, 2) < 0.05
    h = BOX.spacing()
    assert np.all(np.abs(ex.stages[0].points - np.array([x[0] for x in xs])) <= h)
    assert np.all(ex.stages[0].decrement > 0)


def test_two_profiles_and_growing_separation():
    g = moment_curve(2)
    phi = [prof(np.exp(-NODES**2)), prof(0.8 * np.exp(-2 * NODES**2))]
    xs = [[np.array([-(22 + 2 * n) + 0.13, 0.4 * n - 1.1]), np.array([22 + 2 * n + 0.31, 0.7 - 0.3 * n])]
          for n in range(8)]
    ex = profile_extract(g, synthetic(xs, phi), 2, BOX, p=2, q=6)
    assert ex.count == 2
    for stage, truth, k in zip(ex.stages, phi, (0, 1)):
        assert relative_lp_error(g, stage.profile, truth, 2) < 0.05
        assert np.all(np.abs(stage.points - np.array([x[k] for x in xs])) <= BOX.spacing())
    sep = ex.separations()
    assert np.all(np.diff(sep) > 0)
    assert sep.min() >= 80 * BOX.spacing()[0]


def test_zero_sequence_has_no_stages():
    ex = profile_extract(moment_curve(2), [prof(np.zeros(257))], 3, BOX, p=2, q=6)
    assert ex.count == 0 and ex.terminated_early
    assert np.all(np.isinf(ex.separations()))


def test_input_checks():
    g = moment_curve(2)
    f = prof(10 * np.exp(-NODES**2))
    with pytest.raises(DomainError):
        profile_extract(g, [f], 1, BOX, p=2, q=6, bound=5.0)
    other = Profile.sample(lambda t: np.exp(-t * t), -3, 3, 64)
    with pytest.raises(ConfigError):
        profile_extract(g, [f, other], 1, BOX, p=2, q=6)
    with pytest.raises(ConfigError):
        profile_extract(g, [], 1, BOX, p=2, q=6)


def test_chip_probe_is_symmetric_and_bounded():
    g = moment_curve(2)
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 128)
    f = Profile(t, trapezoid_weights(t), np.exp(3 * rng.standard_normal(128)))
    dec = chip_decompose(g, f, 2.0, 4)
    probe = chip_interaction_probe(g, dec, Box.cube(30, 96, 2), 6)
    M = probe.matrix
    ok = np.isfinite(M)
    assert np.allclose(M[ok], M.T[ok])
    # Hoelder: ||FG||_{3} <= ||F||_6 ||G||_6
    assert np.all(M[ok] <= 1 + 1e-12)
