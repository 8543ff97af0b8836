import numpy as np
import pytest

from curvext.curves import ScalingPair, moment_curve
from curvext.extension import Box
from curvext.trials import truncated_gaussian


@pytest.fixture(scope="session")
def parabola():
    return moment_curve(2)


@pytest.fixture(scope="session")
def pair26():
    return ScalingPair(2.0, 6.0, 2)


@pytest.fixture(scope="session")
def gaussian():
    return truncated_gaussian(512, 4.0)


@pytest.fixture(scope="session")
def box40():
    return Box.cube(40.0, 256, 2)


@pytest.fixture(scope="session")
def box20():
    return Box.cube(20.0, 128, 2)


def gaussian_extension_parabola(x):
    """Closed form of the parabola extension of exp(-t^2) over the whole line."""
    x = np.atleast_2d(x)
    c = 1.0 - 0.5j * x[:, 1]
    return np.sqrt(np.pi / c) * np.exp(-x[:, 0] ** 2 / (4 * c))


# sqrt branch: Re(c) = 1 > 0 keeps the principal root continuous
GAUSSIAN_RATIO_PARABOLA = (np.pi**4 * 2 * np.sqrt(2 * np.pi / 3)) ** (1 / 6) / (np.pi / 2) ** (1 / 4)


def singular_profile(seed, domain=(0.0, 1.0), n_sing=3):
    """Sum of |t - c|^{-a} spikes (a < 1/2, so in L^2) on meshes graded toward each c."""
    from curvext.extension import Profile, trapezoid_weights

    rng = np.random.default_rng(seed)
    lo, hi = domain
    cent = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), n_sing)
    expo = rng.uniform(0.2, 0.45, n_sing)
    amp = rng.uniform(0.5, 2, n_sing) * np.exp(2j * np.pi * rng.uniform(size=n_sing))
    pts = [np.linspace(lo, hi, 129)]
    for c in cent:
        g = 2.0 ** -np.arange(2, 30)
        pts += [c - g, c + g]
    t = np.unique(np.clip(np.concatenate(pts), lo, hi))
    v = np.zeros(t.size, complex)
    for c, e, a in zip(cent, expo, amp):
        v += a * np.maximum(np.abs(t - c), 2.0**-31) ** -e
    return Profile(t, trapezoid_weights(t), v)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
