import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from truncvar.bm_analytics import BmParams, mean_tv
from truncvar.crossing_engine import variation_profile
from truncvar.exceptions import ConfigError
from truncvar.monte_carlo import (
    McConfig,
    McEstimate,
    Quantity,
    _correlation,
    adaptedness_test,
    closed_form,
    compare,
    estimate,
    estimate_many,
    killed_path,
    mirrored_killing_time,
    path_rng,
    prefix_discrepancy,
    refine_estimates,
    refine_path,
    richardson_bias,
    simulate_bm_path,
    simulate_variations,
)
from truncvar.path_core import total_variation

PARAMS = BmParams(0.3, 1.0, 0.5)


def config(**kwargs):
    defaults = {"n_paths": 200, "dt": 1e-3, "seed": 12}
    defaults.update(kwargs)
    return McConfig(**defaults)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_paths": 99},
        {"dt": 0.0},
        {"dt": math.nan},
        {"horizon": -1.0},
        {"seed": -1},
        {"antithetic": True, "n_paths": 201},
        {"threads": 0},
        {"chunk_size": 0},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        config(**kwargs)


def test_quantity_properties():
    assert Quantity("MeanTV") is Quantity.MEAN_TV
    assert Quantity.COV_FIXED.fixed_time and not Quantity.COV_EXP.fixed_time
    assert Quantity.MGF_TV.needs_lambda and not Quantity.MEAN_TV.needs_lambda


def test_streams_are_reproducible_and_distinct():
    assert path_rng(5, 3).standard_normal(4).tolist() == path_rng(5, 3).standard_normal(4).tolist()
    assert path_rng(5, 3).standard_normal(4).tolist() != path_rng(5, 4).standard_normal(4).tolist()
    assert path_rng(5, 3).standard_normal(4).tolist() != path_rng(5, 3, level=1).standard_normal(4).tolist()


def test_bm_path_grid_and_statistics():
    rng = np.random.default_rng(0)
    endpoints = [simulate_bm_path(0.5, 0.01, 100, rng).values[-1] for _ in range(4000)]
    path = simulate_bm_path(0.5, 0.01, 100, rng)
    assert len(path) == 101
    assert path.values[0] == 0.0
    assert path.b == pytest.approx(1.0)
    # W_1 ~ N(0.5, 1): 5 standard errors on mean and variance
    assert np.mean(endpoints) == pytest.approx(0.5, abs=5 / math.sqrt(4000))
    assert np.var(endpoints) == pytest.approx(1.0, abs=5 * math.sqrt(2 / 4000))


def test_killed_path_ends_at_the_killing_time():
    rng = path_rng(3, 0)
    killing_time = path_rng(3, 0).exponential(1.0 / 2.0)
    path = killed_path(0.0, 2.0, 0.01, rng)
    assert path.b == killing_time
    assert path.a == 0.0
    assert np.all(np.diff(path.times) <= 0.01 + 1e-15)


def test_killing_times_are_exponential():
    times = [killed_path(0.0, 2.0, 0.05, path_rng(8, i)).b for i in range(4000)]
    assert np.mean(times) == pytest.approx(0.5, abs=5 * 0.5 / math.sqrt(4000))


def test_refinement_keeps_the_coarse_samples():
    path = simulate_bm_path(0.0, 0.1, 10, np.random.default_rng(1))
    refined = refine_path(path, np.random.default_rng(2))
    assert len(refined) == 21
    assert refined.values[0::2].tolist() == path.values.tolist()
    assert refined.times[1::2].tolist() == pytest.approx((path.times[:-1] + 0.05).tolist())
    # A finer sample of the same path never has less truncated variation
    for c in (0.1, 0.3):
        assert variation_profile(refined, c).final[2] >= variation_profile(path, c).final[2] - 1e-12
    assert total_variation(refined) >= total_variation(path) - 1e-12


def test_simulation_is_deterministic_and_thread_independent():
    utv, dtv = simulate_variations(PARAMS, config(chunk_size=64))
    for cfg in (config(chunk_size=1000), config(chunk_size=7, threads=4)):
        other_utv, other_dtv = simulate_variations(PARAMS, cfg)
        assert other_utv.tolist() == utv.tolist()
        assert other_dtv.tolist() == dtv.tolist()
    assert not np.array_equal(utv, simulate_variations(PARAMS, config(seed=13))[0])


def test_batch_results_match_single_paths():
    cfg = config()
    utv, dtv = simulate_variations(PARAMS, cfg, T=0.5)
    for i in (0, 57, 199):
        path = simulate_bm_path(PARAMS.mu, 1e-3, 500, path_rng(cfg.seed, i))
        assert (utv[i], dtv[i]) == pytest.approx(variation_profile(path, PARAMS.c).final[:2], abs=1e-12)


@given(st.floats(min_value=1e-3, max_value=5.0), st.floats(min_value=0.5, max_value=2.0))
def test_mirrored_killing_time_sits_at_the_opposite_quantile(s, nu):
    mirrored = mirrored_killing_time(s, nu)
    assert math.exp(-nu * s) + math.exp(-nu * mirrored) == pytest.approx(1.0, abs=1e-12)
    assert mirrored_killing_time(mirrored, nu) == pytest.approx(s, rel=1e-9)


def test_antithetic_pair_shares_increments():
    first = killed_path(0.2, 1.0, 0.01, path_rng(4, 0), antithetic=True)
    second = killed_path(0.2, 1.0, 0.01, path_rng(4, 0), antithetic=True, mirror=True)
    assert first.b == path_rng(4, 0).exponential(1.0)
    assert second.b == pytest.approx(mirrored_killing_time(first.b, 1.0), rel=1e-12)
    # Both members walk the same grid increments up to the earlier killing time
    shared = min(len(first), len(second)) - 1
    assert first.values[:shared].tolist() == second.values[:shared].tolist()


def test_mirrored_killing_times_are_exponential():
    times = [killed_path(0.0, 2.0, 0.05, path_rng(8, i), antithetic=True, mirror=True).b for i in range(4000)]
    assert np.mean(times) == pytest.approx(0.5, abs=5 * 0.5 / math.sqrt(4000))


def test_antithetic_lowers_the_standard_error():
    params = BmParams(0.0, 1.0, 0.5)
    plain = estimate(Quantity.MEAN_TV, params, config(n_paths=2000, dt=2e-3, seed=21))
    paired = estimate(Quantity.MEAN_TV, params, config(n_paths=2000, dt=2e-3, seed=21, antithetic=True))
    assert paired.std_error < 0.85 * plain.std_error
    assert abs(paired.mean - plain.mean) <= 3 * math.hypot(paired.std_error, plain.std_error)


def test_antithetic_needs_a_killing_time():
    with pytest.raises(ConfigError):
        estimate(Quantity.COV_FIXED, PARAMS, config(antithetic=True), T=0.5)


def test_correlation_error_counts_pairs_as_units():
    rng = np.random.default_rng(6)
    u = rng.standard_normal(2000)
    d = -0.5 * u + math.sqrt(0.75) * rng.standard_normal(2000)
    r, se = _correlation(u, d, antithetic=False)
    # Bivariate normal: the delta method reduces to (1 − r²)/√n
    assert se == pytest.approx((1 - r * r) / math.sqrt(2000), rel=0.1)
    # Duplicated paths add no information once they are counted as pairs
    twins_u, twins_d = np.repeat(u, 2), np.repeat(d, 2)
    twin_r, paired_se = _correlation(twins_u, twins_d, antithetic=True)
    _, unpaired_se = _correlation(twins_u, twins_d, antithetic=False)
    assert twin_r == pytest.approx(r, rel=1e-12)
    assert paired_se == pytest.approx(se, rel=1e-9)
    assert unpaired_se == pytest.approx(se / math.sqrt(2), rel=0.01)


def test_standard_error_shrinks_with_more_paths():
    small = estimate(Quantity.MEAN_TV, PARAMS, config(n_paths=1000, dt=2e-3))
    large = estimate(Quantity.MEAN_TV, PARAMS, config(n_paths=4000, dt=2e-3))
    assert large.std_error < small.std_error
    assert small.std_error / large.std_error == pytest.approx(2.0, rel=0.2)


def test_tv_estimate_is_the_sum_of_up_and_down():
    cfg = config(dt=2e-3)
    tv = estimate(Quantity.MEAN_TV, PARAMS, cfg).mean
    up = estimate(Quantity.MEAN_UTV, PARAMS, cfg).mean
    down = estimate(Quantity.MEAN_DTV, PARAMS, cfg).mean
    assert tv == pytest.approx(up + down, rel=1e-12)


def test_estimate_many_shares_one_simulation():
    cfg = config(dt=2e-3)
    many = estimate_many([Quantity.MEAN_TV, Quantity.CROSS_EXP], PARAMS, cfg)
    assert many[Quantity.MEAN_TV] == estimate(Quantity.MEAN_TV, PARAMS, cfg)
    assert many[Quantity.CROSS_EXP] == estimate(Quantity.CROSS_EXP, PARAMS, cfg)
    with pytest.raises(ConfigError):
        estimate_many([Quantity.MEAN_TV, Quantity.COV_FIXED], PARAMS, cfg)
    with pytest.raises(ConfigError):
        estimate_many([], PARAMS, cfg)


def test_coarse_step_warns_or_fails(caplog):
    with pytest.raises(ConfigError):
        estimate(Quantity.MEAN_TV, PARAMS, config(dt=0.05, strict=True))
    with caplog.at_level(logging.WARNING, logger="truncvar"):
        result = estimate(Quantity.MEAN_TV, PARAMS, config(dt=0.05))
    assert "discretization bias" in caplog.text
    assert result.dt == 0.05


def test_mgf_needs_lambda():
    with pytest.raises(ConfigError):
        estimate(Quantity.MGF_TV, PARAMS, config())


def test_fixed_time_quantities_use_the_horizon():
    result = estimate(Quantity.MEAN_UTV_FIXED, PARAMS, config(horizon=0.25, dt=2e-3))
    assert result.T == 0.25
    assert result.lam is None
    assert estimate(Quantity.MEAN_TV, PARAMS, config(dt=2e-3)).T is None


def test_correlation_of_vanishing_variations_is_nan():
    result = estimate(Quantity.COR_FIXED, BmParams(0.0, 1.0, 50.0), config(), T=0.1)
    assert math.isnan(result.mean)
    assert compare(result, None)["z_score"] is None


def test_closed_forms():
    assert closed_form(Quantity.MEAN_TV, PARAMS) == mean_tv(PARAMS)
    assert closed_form(Quantity.COR_FIXED, PARAMS, T=1.0) is None
    assert closed_form(Quantity.MGF_TV, PARAMS, lam=0.0) == 1.0


def test_compare():
    mc = McEstimate(quantity="MeanTV", mean=1.1, std_error=0.05, n=100, dt=1e-3)
    report = compare(mc, 1.0)
    assert report["z_score"] == pytest.approx(2.0)
    assert report["within_3se"]
    assert compare(mc, 1.0, bias=0.1)["z_score"] == pytest.approx(0.0, abs=1e-9)
    assert not compare(mc, 1.3)["within_3se"]
    assert compare(mc, 1.3)["z_score"] == pytest.approx(-4.0)


def test_mean_tv_matches_the_closed_form():
    params = BmParams(0.0, 1.0, 1.0)
    cfg = config(n_paths=2000, dt=2e-3, seed=31)
    refinement = refine_estimates([Quantity.MEAN_TV], params, cfg)[Quantity.MEAN_TV]
    assert refinement.margin > 0
    assert refinement.margin == richardson_bias(Quantity.MEAN_TV, params, cfg)
    assert compare(refinement.fine, mean_tv(params), refinement.margin)["within_3se"]


def test_prefix_discrepancy_is_zero(ramp):
    assert prefix_discrepancy(ramp, 0.3) == (0.0, 0.0)
    with pytest.raises(ConfigError):
        prefix_discrepancy(ramp, 0.3, stride=0)


def test_adaptedness():
    report = adaptedness_test(BmParams(0.1, 1.0, 0.3), config(n_paths=100, dt=0.01, horizon=0.5), stride=3)
    assert report.paths == 100
    assert report.samples == 51
    assert report.passed
    assert report.to_dict()["passed"] is True


@pytest.mark.slow
def test_fixed_time_moments_against_simulation():
    params = BmParams(0.0, 1.0, 0.5)
    cfg = McConfig(n_paths=100_000, dt=1e-4, seed=5)
    refinements = refine_estimates([Quantity.CROSS_FIXED, Quantity.COV_FIXED], params, cfg, T=1.0)
    for quantity, refinement in refinements.items():
        report = compare(refinement.fine, closed_form(quantity, params, T=1.0), refinement.margin)
        assert report["within_3se"], report


@pytest.mark.slow
def test_antithetic_mean_tv_against_the_closed_form():
    params = BmParams(0.0, 1.0, 1.0)
    plain = estimate(Quantity.MEAN_TV, params, McConfig(n_paths=20_000, dt=1e-3, seed=8))
    cfg = McConfig(n_paths=20_000, dt=1e-3, seed=8, antithetic=True)
    refinement = refine_estimates([Quantity.MEAN_TV], params, cfg)[Quantity.MEAN_TV]
    assert refinement.coarse.std_error < plain.std_error
    assert compare(refinement.fine, mean_tv(params), refinement.margin)["within_3se"]
