import logging
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncvar import bm_analytics
from truncvar import settings as bm_settings
from truncvar.bm_analytics import (
    BmParams,
    analytics_report,
    correlation_smallc_report,
    covariance_exp,
    covariance_fixed_time,
    cross_moment_exp,
    cross_moment_fixed_time,
    mean_dtv,
    mean_dtv_fixed_time,
    mean_tv,
    mean_tv_fixed_time,
    mean_utv,
    mean_utv_fixed_time,
    mgf_denominator_roots,
    mgf_pole,
    mgf_tv,
    second_moment_dtv,
    second_moment_tv,
    second_moment_utv,
    special_functions,
    theta,
    v_factor,
)
from truncvar.exceptions import DomainError, NonConvergenceError, ParameterDomainError, SingularDenominatorError
from truncvar.monte_carlo import McConfig, Quantity, closed_form, compare, refine_estimates

drifts = st.floats(min_value=-1.0, max_value=1.0)
rates = st.floats(min_value=0.5, max_value=2.0)
truncations = st.floats(min_value=0.2, max_value=2.0)


def test_special_functions_at_unit_argument():
    # μ = 0, ν = 1/2 gives s = 1
    assert v_factor(0.0, 0.5, 1.0) == pytest.approx(1.0 / math.sinh(1.0), rel=1e-15)
    assert theta(0.0, 0.5, 1.0) == pytest.approx(1.0 / math.tanh(1.0), rel=1e-14)


@given(drifts, rates, truncations)
def test_theta_product_identity(mu, nu, c):
    product = theta(mu, nu, c) * theta(-mu, nu, c)
    assert product == pytest.approx(2 * nu + v_factor(mu, nu, c) ** 2, rel=1e-10)


@given(drifts, rates, truncations)
def test_v_is_even_in_the_drift(mu, nu, c):
    assert v_factor(mu, nu, c) == v_factor(-mu, nu, c)


@pytest.mark.parametrize("c", [1e-3, 1e-5, 1e-7])
def test_v_blows_up_like_one_over_c(c):
    assert v_factor(0.3, 1.0, c) * c == pytest.approx(1.0, rel=1e-5)


def test_large_argument_limits():
    # s = 2, c·s = 50
    assert theta(1.0, 1.5, 25.0) == pytest.approx(1.0, rel=1e-14)
    assert theta(-1.0, 1.5, 25.0) == pytest.approx(3.0, rel=1e-14)
    assert v_factor(1.0, 1.5, 25.0) == pytest.approx(4.0 * math.exp(-50.0), rel=1e-12)


def test_large_positive_drift_has_no_cancellation():
    # θ_μ ≈ ν/μ for μ ≫ √ν
    assert theta(1e8, 1.0, 1.0) == pytest.approx(1e-8, rel=1e-6)


def test_continuity_across_the_stable_argument():
    below = theta(0.0, 0.5, 40.0 - 1e-9)
    above = theta(0.0, 0.5, 40.0 + 1e-9)
    assert below == pytest.approx(above, rel=1e-14)


def test_underflow_is_flagged(caplog):
    with caplog.at_level(logging.WARNING, logger="truncvar"):
        sf = special_functions(BmParams(0.0, 0.5, 2000.0))
    assert sf.v == 0.0
    assert sf.underflow
    assert "underflowed" in caplog.text


@pytest.mark.parametrize(
    "mu, nu, c",
    [
        (0.0, 0.0, 1.0),
        (0.0, -1.0, 1.0),
        (0.0, 1.0, 0.0),
        (math.nan, 1.0, 1.0),
        (0.0, 1.0, math.inf),
    ],
)
def test_parameter_domain(mu, nu, c):
    with pytest.raises(ParameterDomainError):
        BmParams(mu, nu, c)
    with pytest.raises(ParameterDomainError):
        theta(mu, nu, c)


def test_mgf_at_zero_is_one():
    assert mgf_tv(BmParams(0.3, 1.0, 0.7), 0.0) == 1.0


@given(drifts, rates, truncations)
@settings(max_examples=100)
def test_mgf_derivatives_are_the_moments(mu, nu, c):
    params = BmParams(mu, nu, c)
    h = 1e-4
    up, down = mgf_tv(params, h), mgf_tv(params, -h)
    assert (up - down) / (2 * h) == pytest.approx(mean_tv(params), rel=1e-4)
    assert (up - 2.0 + down) / (h * h) == pytest.approx(second_moment_tv(params), rel=1e-4)


@given(drifts, rates, truncations, st.floats(min_value=-3.0, max_value=0.0))
def test_mgf_is_even_in_the_drift(mu, nu, c, lam):
    assert mgf_tv(BmParams(mu, nu, c), lam) == pytest.approx(mgf_tv(BmParams(-mu, nu, c), lam), rel=1e-12)


@given(drifts, rates, truncations)
def test_pole_lies_below_the_abscissa(mu, nu, c):
    params = BmParams(mu, nu, c)
    small, large = mgf_denominator_roots(params)
    assert 0 < small < large
    assert mgf_pole(params) == small
    assert small < min(theta(mu, nu, c), theta(-mu, nu, c))


def test_mgf_domain_and_singularity():
    params = BmParams(0.2, 1.0, 0.5)
    abscissa = min(theta(0.2, 1.0, 0.5), theta(-0.2, 1.0, 0.5))
    with pytest.raises(DomainError):
        mgf_tv(params, abscissa)
    with pytest.raises(DomainError):
        mgf_tv(params, math.inf)
    with pytest.raises(SingularDenominatorError) as e:
        mgf_tv(params, mgf_pole(params))
    assert e.value.root == mgf_pole(params)


def test_mgf_is_infinite_from_the_pole_on():
    params = BmParams(0.0, 1.0, 1.0)
    pole = mgf_pole(params)
    for lam in ((pole + theta(0.0, 1.0, 1.0)) / 2, pole * 1.01):
        with pytest.raises(DomainError, match="pole"):
            mgf_tv(params, lam)
    # The expectation grows without bound as λ approaches the pole from below
    below = [mgf_tv(params, pole * f) for f in (0.5, 0.9, 0.99)]
    assert 1.0 < below[0] < below[1] < below[2]
    assert below[2] > 10.0


@given(drifts, rates, truncations)
def test_moment_identities(mu, nu, c):
    params = BmParams(mu, nu, c)
    assert mean_tv(params) == pytest.approx(mean_utv(params) + mean_dtv(params), rel=1e-12)
    combined = second_moment_utv(params) + second_moment_dtv(params) + 2 * cross_moment_exp(params)
    assert second_moment_tv(params) == pytest.approx(combined, rel=1e-10)
    assert covariance_exp(params) == pytest.approx(cross_moment_exp(params) - mean_utv(params) * mean_dtv(params), rel=1e-10)
    assert covariance_exp(params) > 0


@given(drifts, rates, truncations)
def test_reflection_swaps_up_and_down_moments(mu, nu, c):
    assert mean_utv(BmParams(mu, nu, c)) == pytest.approx(mean_dtv(BmParams(-mu, nu, c)), rel=1e-14)
    assert second_moment_utv(BmParams(mu, nu, c)) == pytest.approx(second_moment_dtv(BmParams(-mu, nu, c)), rel=1e-12)
    assert second_moment_tv(BmParams(mu, nu, c)) == pytest.approx(second_moment_tv(BmParams(-mu, nu, c)), rel=1e-10)


def test_driftless_means():
    # μ = 0, ν = 1/2: E TV = 2/sinh(c), E UTV = E DTV = 1/sinh(c)
    params = BmParams(0.0, 0.5, 1.0)
    assert mean_tv(params) == pytest.approx(2.0 / math.sinh(1.0))
    assert mean_utv(params) == mean_dtv(params) == pytest.approx(1.0 / math.sinh(1.0))


@pytest.mark.parametrize("c", [0.1, 0.25])
def test_fixed_time_mean_small_c(c):
    # Residue at 0 of the Laplace transform: E TV^c(W,T) = T/c − c/3 up to terms of order e^{−π²T/(2c²)}
    params = BmParams(0.0, 1.0, c)
    assert mean_tv_fixed_time(params, 1.0) == pytest.approx(1.0 / c - c / 3.0, rel=1e-6)
    assert mean_utv_fixed_time(params, 1.0) == pytest.approx(0.5 / c - c / 6.0, rel=1e-6)


@pytest.mark.parametrize("c", [0.1, 0.25])
def test_fixed_time_cross_moment_small_c(c):
    # E UTV·DTV = T²/(4c²) − T/3 + 2c²/15, covariance −T/6 + 19c²/180, same residue argument
    params = BmParams(0.0, 1.0, c)
    assert cross_moment_fixed_time(params, 1.0) == pytest.approx(0.25 / c**2 - 1.0 / 3.0 + 2.0 * c**2 / 15.0, rel=1e-6)
    assert covariance_fixed_time(params, 1.0) == pytest.approx(-1.0 / 6.0 + 19.0 * c**2 / 180.0, abs=1e-6)


def test_fixed_time_with_drift_is_reflection_symmetric():
    assert mean_utv_fixed_time(BmParams(0.4, 1.0, 0.5), 2.0) == pytest.approx(mean_dtv_fixed_time(BmParams(-0.4, 1.0, 0.5), 2.0), rel=1e-12)
    up = mean_utv_fixed_time(BmParams(0.4, 1.0, 0.5), 2.0)
    down = mean_dtv_fixed_time(BmParams(0.4, 1.0, 0.5), 2.0)
    assert up / down == pytest.approx(math.exp(2 * 0.4 * 0.5), rel=1e-12)


def test_fixed_time_negligible_when_c_dwarfs_the_horizon():
    params = BmParams(0.0, 1.0, 10.0)
    assert mean_tv_fixed_time(params, 1e-4) < 1e-12
    assert abs(cross_moment_fixed_time(params, 1e-4)) < 1e-12


def test_fixed_time_argument_errors():
    params = BmParams(0.0, 1.0, 0.5)
    with pytest.raises(ParameterDomainError):
        mean_tv_fixed_time(params, 0.0)
    with pytest.raises(ParameterDomainError):
        mean_tv_fixed_time(params, 1.0, k_max=0)
    with pytest.raises(ParameterDomainError):
        cross_moment_fixed_time(params, 1.0, quad_tol=0.0)


def test_series_truncation_error():
    with pytest.raises(NonConvergenceError) as e:
        mean_tv_fixed_time(BmParams(0.0, 1.0, 0.05), 1.0, k_max=1)
    assert e.value.partial_sum > 0


def test_auto_k_max_grows_as_c_shrinks():
    assert bm_analytics.auto_k_max(0.05, 1.0, 1e-10) > bm_analytics.auto_k_max(0.5, 1.0, 1e-10) >= 3


def test_analytics_report_keys():
    report = analytics_report(BmParams(0.1, 1.0, 0.5), lam=0.1, T=1.0)
    for key in ("theta_mu", "theta_minus_mu", "v", "mgf_pole", "mean_tv", "second_moment_tv", "covariance_exp"):
        assert math.isfinite(report[key])
    assert report["mgf_tv"]["lam"] == 0.1
    assert report["fixed_time"]["T"] == 1.0
    assert report["fixed_time"]["mean_utv"] > report["fixed_time"]["mean_dtv"]
    assert report["tolerances"]["k_max_auto"] >= 3
    assert "mgf_tv" not in analytics_report(BmParams(0.1, 1.0, 0.5))


def test_correlation_report_needs_a_decreasing_grid():
    cfg = McConfig(n_paths=100, dt=1e-3, seed=1)
    with pytest.raises(ParameterDomainError):
        correlation_smallc_report(BmParams(0.0, 1.0, 1.0), [0.1, 0.2], 1.0, cfg)


@pytest.mark.parametrize("mu", [0.0, 0.3])
def test_fixed_time_series_are_stable_under_tighter_tolerances(mu):
    params = BmParams(mu, 1.0, 0.5)
    for formula in (cross_moment_fixed_time, covariance_fixed_time):
        reference = formula(params, 1.0)
        tighter = formula(params, 1.0, k_max=2 * bm_settings.K_MAX, quad_tol=bm_settings.QUAD_TOL / 2)
        assert tighter == pytest.approx(reference, rel=1e-8)


ACCEPTANCE_QUANTITIES = [
    Quantity.MEAN_TV,
    Quantity.MEAN_UTV,
    Quantity.MEAN_DTV,
    Quantity.SECOND_TV,
    Quantity.SECOND_UTV,
    Quantity.CROSS_EXP,
    Quantity.COV_EXP,
    Quantity.MGF_TV,
]


@pytest.mark.slow
@pytest.mark.parametrize(
    "params",
    [BmParams(0.0, 1.0, 1.0), BmParams(1.0, 1.0, 0.5), BmParams(-1.0, 2.0, 0.5)],
    ids=lambda p: f"mu={p.mu},nu={p.nu},c={p.c}",
)
def test_exponential_time_closed_forms_against_simulation(params):
    cfg = McConfig(n_paths=100_000, dt=1e-3, seed=2024)
    refinements = refine_estimates(ACCEPTANCE_QUANTITIES, params, cfg, lam=-0.5)
    for quantity, refinement in refinements.items():
        report = compare(refinement.fine, closed_form(quantity, params, lam=-0.5), refinement.margin)
        assert report["within_3se"], report


@pytest.mark.slow
def test_mgf_against_simulation():
    params = BmParams(0.0, 1.0, 1.0)
    cfg = McConfig(n_paths=20_000, dt=1e-3, seed=7)
    refinement = refine_estimates([Quantity.MGF_TV], params, cfg, lam=0.3)[Quantity.MGF_TV]
    assert compare(refinement.fine, mgf_tv(params, 0.3), refinement.margin)["within_3se"]


@pytest.mark.slow
def test_small_c_correlation_trend():
    cfg = McConfig(n_paths=10_000, dt=1e-5, seed=99)
    report = correlation_smallc_report(BmParams(0.0, 1.0, 1.0), [0.4, 0.2, 0.1, 0.05], 1.0, cfg)
    correlations = [r for _, r in report]
    assert correlations[-1] == pytest.approx(-0.5, abs=0.1)
    assert correlations[-1] < correlations[0]
