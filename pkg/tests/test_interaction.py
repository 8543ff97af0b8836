import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvext.curves import moment_curve
from curvext.errors import ConfigError, DomainError
from curvext.extension import Box, Field, extend, lq_power
from curvext.interaction import (
    circle_moment,
    conc_factor,
    drift_schedule,
    drifting_norm,
    equality_case,
    psi,
    psi_max,
    theta_average,
)
from curvext.trials import truncated_gaussian


def binomial_circle_moment(n, t):
    """Mean of |1 + t e^{i theta}|^{2n} for integer n: sum_k C(n,k)^2 t^{2k}."""
    return sum(math.comb(n, k) ** 2 * t ** (2 * k) for k in range(n + 1))


@given(st.floats(0, 1), st.integers(1, 4))
def test_circle_moment_matches_binomial_expansion(t, n):
    assert circle_moment(2 * n, t) == pytest.approx(binomial_circle_moment(n, t), rel=1e-13)


def test_psi_closed_form_on_grid():
    ts = np.linspace(0, 1, 101)
    got = np.array([psi(2, 6, t) for t in ts])
    np.testing.assert_allclose(got, 1 + 6 * ts**2 / (1 + ts**2) ** 2, atol=1e-12, rtol=0)


def test_psi_max_for_two_six():
    res = psi_max(2, 6)
    assert res.psi_max == pytest.approx(2.5, abs=1e-12)
    assert res.argmax_alpha == pytest.approx(1.0, abs=1e-8)


def test_psi_domain_and_exponent_errors():
    with pytest.raises(DomainError):
        psi(2, 6, 1.5)
    with pytest.raises(ConfigError):
        psi(1, 6, 0.5)


@given(st.floats(1.1, 4.0), st.floats(2.0, 12.0), st.floats(0, 1))
def test_psi_dominates_the_second_moment_bound(p, q, t):
    # Jensen for q >= 2: mean |1 + t e^{i theta}|^q >= (1 + t^2)^{q/2}
    lower = (1 + t * t) ** (q / 2) / (1 + t**p) ** (q / p)
    assert psi(p, q, t) >= lower * (1 - 1e-12)


def test_conc_factors():
    assert conc_factor("neither", 2, 6) == 1.0
    assert conc_factor("even", 2, 6) == pytest.approx(math.sqrt(2))
    assert conc_factor("odd", 2, 6) == pytest.approx(2.5 ** (1 / 6))
    with pytest.raises(ConfigError):
        conc_factor("odd", 2, 5, d=2)


def _random_fields(seed=0, shape=(9, 11)):
    rng = np.random.default_rng(seed)
    box = Box(((0, 1), (0, 2)), shape)
    F = Field(box, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    G = Field(box, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return F, G


def test_theta_average_quadratic_and_quartic_oracles():
    F, G = _random_fields()
    W = F.box.weights()
    a, b = np.abs(F.values), np.abs(G.values)
    assert theta_average(F, G, 2) == pytest.approx(np.sum(W * (a**2 + b**2)), rel=1e-12)
    quartic = np.sum(W * (a**4 + 4 * a**2 * b**2 + b**4))
    assert theta_average(F, G, 4) == pytest.approx(quartic, rel=1e-12)


def test_theta_average_requires_same_grid():
    F, _ = _random_fields()
    G = Field(Box(((0, 1), (0, 2)), (9, 12)), np.ones((9, 12)))
    with pytest.raises(DomainError):
        theta_average(F, G, 4)


@pytest.fixture(scope="module")
def smooth_fields():
    g = moment_curve(2)
    f = truncated_gaussian(256)
    box = Box.cube(10, 512, 2)
    return extend(g, f, box), extend(g, f.modulated(g, [0.5, 0.0]), box)


def test_drift_converges_to_theta_average(smooth_fields):
    F, G = smooth_fields
    sched = drift_schedule(F, G, [1.0, 1.0], [1, 2], 6, 2, lam0=1.0, ratio=1.4, steps=8)
    assert any(r.aliased for r in sched.rows)
    assert sum(not r.aliased for r in sched.rows) >= 3
    assert sched.relative_gap < 1e-2
    assert sched.limit <= sched.upper_bound * 1.01
    assert sched.target <= sched.upper_bound * 1.01


def test_drifting_norm_validation(smooth_fields):
    F, G = smooth_fields
    with pytest.raises(DomainError):
        drifting_norm(F, G, [0.0, 0.0], [1, 2], 1.0, 6)
    with pytest.raises(DomainError):
        drifting_norm(F, G, [1.0, 0.0], [1, 2], -1.0, 6)


def test_drift_at_tiny_lambda_is_the_plain_sum(smooth_fields):
    F, G = smooth_fields
    val = drifting_norm(F, G, [1.0, 1.0], [1, 2], 1e-9, 6).value
    assert val == pytest.approx(lq_power(F.with_values(F.values + G.values), 6), rel=1e-6)


def test_equality_case_detects_proportional_moduli():
    F, _ = _random_fields(2)
    G = F.with_values(0.4 * F.values * np.exp(1j * np.angle(F.values) * 3))
    res = equality_case(F, G)
    assert res.proportional and res.alpha == pytest.approx(0.4)
    assert res.orientation == "|G| = alpha |F|"
    res = equality_case(G, F)
    assert res.proportional and res.orientation == "|F| = alpha |G|"


def test_equality_case_rejects_generic_fields():
    F, G = _random_fields(3)
    assert equality_case(F, G).proportional is False


def test_equality_case_degenerate_inputs():
    F, _ = _random_fields()
    Z = F.with_values(np.zeros(F.box.resolution))
    assert equality_case(Z, Z).indeterminate
    res = equality_case(Z, F)
    assert res.proportional and res.alpha == 0.0
