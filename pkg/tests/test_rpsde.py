import numpy as np
import pytest
from scipy import stats as sps

from stochpend import (
    NoiseChannelConfig,
    PathGrid,
    PeriodicDriftSpec,
    SampleLengthError,
    drift_eval,
    estimate_ergodic_stats,
    grid_for_periods,
    ks_critical_value,
    ks_statistic,
    law_periodicity_check,
    simulate_ensemble,
    simulate_pair,
    simulate_path,
)
from stochpend.rng import ensemble_seeds


# ---------------------------------------------------------------------------
# drift


def test_drift_pure_relaxation():
    spec = PeriodicDriftSpec(tau=1.0, alpha=1.0, forcing_amp=0.0)
    assert drift_eval(spec, 0.5, 2.0) == -2.0


def test_drift_forced_substitution():
    spec = PeriodicDriftSpec(tau=1.0, alpha=2.0, forcing_amp=1.0, forcing_phase=0.0)
    assert drift_eval(spec, 0.25, 0.0) == pytest.approx(2.0, abs=1e-15)


def test_drift_periodicity(rng):
    spec = PeriodicDriftSpec(tau=0.7, alpha=1.3, forcing_amp=2.0, forcing_phase=0.4)
    t = rng.uniform(-5, 5, 200)
    x = rng.uniform(-3, 3, 200)
    np.testing.assert_allclose(drift_eval(spec, t + spec.tau, x),
                               drift_eval(spec, t, x), rtol=0, atol=1e-12)


def test_drift_lipschitz_bound(rng):
    spec = PeriodicDriftSpec(tau=1.0, alpha=1.7, forcing_amp=1.0, forcing_phase=0.1)
    t = rng.uniform(0, 10, 500)
    x = rng.uniform(-5, 5, 500)
    y = rng.uniform(-5, 5, 500)
    lhs = np.abs(drift_eval(spec, t, x) - drift_eval(spec, t, y))
    # equality holds exactly in real arithmetic; allow rounding of the
    # two separately evaluated drift values
    assert np.all(lhs <= spec.alpha * np.abs(x - y) + 1e-13)


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        PeriodicDriftSpec(tau=-1.0, alpha=1.0)
    with pytest.raises(ValueError):
        PeriodicDriftSpec(tau=1.0, alpha=0.0)
    with pytest.raises(ValueError):
        NoiseChannelConfig(drift=PeriodicDriftSpec(tau=1.0, alpha=1.0), beta=0.0)
    with pytest.raises(ValueError):
        NoiseChannelConfig(drift=PeriodicDriftSpec(tau=1.0, alpha=1.0), beta=1.0,
                           driver="other")
    with pytest.raises(ValueError):
        PathGrid(t0=0.0, h=-0.1, n=10)


# ---------------------------------------------------------------------------
# simulation


def test_deterministic_replay(ou_config):
    grid = PathGrid(0.0, 0.001, 2000)
    a = simulate_path(ou_config, grid, seed=5)
    b = simulate_path(ou_config, grid, seed=5)
    assert np.array_equal(a.values, b.values)
    assert a.values[0] == ou_config.z0


def test_shared_channels_identical(ou_config):
    grid = PathGrid(0.0, 0.001, 2000)
    p1, p2 = simulate_pair(ou_config, ou_config, grid, seed=9)
    assert np.array_equal(p1.values, p2.values)


def test_pair_marginals_match_single(pair_config):
    cfg1, cfg2 = pair_config
    grid = PathGrid(0.0, 0.001, 1500)
    p1, p2 = simulate_pair(cfg1, cfg2, grid, seed=3)
    assert np.array_equal(p1.values, simulate_path(cfg1, grid, 3, channel=1).values)
    assert np.array_equal(p2.values, simulate_path(cfg2, grid, 3, channel=2).values)


def test_independent_channels_differ():
    cfg = NoiseChannelConfig(drift=PeriodicDriftSpec(tau=1.0, alpha=1.0),
                             beta=1.0, driver="independent")
    grid = PathGrid(0.0, 0.001, 1000)
    p1, p2 = simulate_pair(cfg, cfg, grid, seed=4)
    assert not np.array_equal(p1.values, p2.values)


def test_independent_increments_uncorrelated():
    cfg = NoiseChannelConfig(drift=PeriodicDriftSpec(tau=1.0, alpha=1.0),
                             beta=1.0, driver="independent")
    n = 100000
    grid = PathGrid(0.0, 0.001, n)
    p1, p2 = simulate_pair(cfg, cfg, grid, seed=12)
    d1 = np.diff(p1.values)
    d2 = np.diff(p2.values)
    corr = np.corrcoef(d1, d2)[0, 1]
    assert abs(corr) < 3.0 / np.sqrt(n)


def test_shared_driver_paths_converge():
    # same relaxation driven by one Wiener stream from different starts
    drift = PeriodicDriftSpec(tau=1.0, alpha=1.0)
    cfg_a = NoiseChannelConfig(drift=drift, beta=1.0, z0=2.0, driver="shared")
    cfg_b = NoiseChannelConfig(drift=drift, beta=1.0, z0=-2.0, driver="shared")
    grid = grid_for_periods(1.0, 40, 500)
    p1, p2 = simulate_pair(cfg_a, cfg_b, grid, seed=2)
    tail1 = p1.values[-5000:]
    tail2 = p2.values[-5000:]
    assert np.corrcoef(tail1, tail2)[0, 1] > 0.999999
    assert np.abs(tail1 - tail2).max() < 1e-10


def test_decay_oracle_matches_ode():
    # negligible diffusion: Euler relaxation toward 0 from z0 = 1
    cfg = NoiseChannelConfig(drift=PeriodicDriftSpec(tau=1.0, alpha=1.0),
                             beta=1e-300, z0=1.0)
    h = 1e-3
    grid = PathGrid(0.0, h, 1000)
    path = simulate_path(cfg, grid, seed=1)
    assert path.values[-1] == pytest.approx(np.exp(-1.0), abs=2 * h)


def test_strong_order_monitor(ou_config):
    # Refine one Brownian path (coarse increments = sums of fine ones) and
    # compare Euler endpoints across step sizes.  Monitored as a band, not
    # a sharp constant.
    from stochpend.rng import wiener_increments

    alpha, beta = ou_config.drift.alpha, ou_config.beta
    horizon = 2.0
    n_fine = 2048

    def em_endpoint(dw, h):
        x = 0.0
        for w in dw:
            x = (1.0 - alpha * h) * x + beta * w
        return x

    gaps = {1: [], 2: [], 4: []}
    for seed in range(20):
        dw = wiener_increments(seed, 0, n_fine, horizon / n_fine)
        ends = {}
        for factor in (1, 2, 4):
            dw_c = dw.reshape(-1, factor).sum(axis=1)
            ends[factor] = em_endpoint(dw_c, factor * horizon / n_fine)
        gaps[2].append(abs(ends[2] - ends[1]))
        gaps[4].append(abs(ends[4] - ends[1]))
    mean2 = np.mean(gaps[2])
    mean4 = np.mean(gaps[4])
    # additive noise: strong order 1.0, so tripling the removed step error
    assert mean4 > mean2
    assert mean4 < 0.05


# ---------------------------------------------------------------------------
# ergodic statistics


def test_ou_stationary_variance_oracle(ou_config):
    grid = grid_for_periods(1.0, 1200, 1000)
    pair = simulate_pair(ou_config, ou_config, grid, seed=21)
    st = estimate_ergodic_stats(pair, tau=1.0, burn_in_periods=100, batches=16)
    assert abs(st.c1 - 1.0) <= 3.0 * st.se_c1
    assert abs(st.mean1) <= 3.0 * st.se_mean1
    assert abs(st.mean2) <= 3.0 * st.se_mean2


def test_forced_channel_second_moment_oracle():
    cfg = NoiseChannelConfig(
        drift=PeriodicDriftSpec(tau=1.0, alpha=1.0, forcing_amp=2.0),
        beta=1.0)
    grid = grid_for_periods(1.0, 2100, 500)
    pair = simulate_pair(cfg, cfg, grid, seed=8)
    st = estimate_ergodic_stats(pair, tau=1.0, burn_in_periods=100, batches=16)
    assert abs(st.c1 - cfg.stationary_second_moment()) <= 4.0 * st.se_c1


def test_identical_channels_c12_equals_c1(ou_config):
    grid = grid_for_periods(1.0, 150, 200)
    pair = simulate_pair(ou_config, ou_config, grid, seed=30)
    st = estimate_ergodic_stats(pair, tau=1.0, burn_in_periods=100, batches=16)
    assert st.c12 == st.c1


def test_cauchy_schwarz_on_estimates(pair_config):
    cfg1, cfg2 = pair_config
    for seed in range(5):
        grid = grid_for_periods(1.0, 130, 200)
        pair = simulate_pair(cfg1, cfg2, grid, seed=seed)
        st = estimate_ergodic_stats(pair, tau=1.0, burn_in_periods=100,
                                    batches=16)
        assert st.c12**2 <= st.c1 * st.c2 * (1 + 1e-12)


def test_insufficient_length_error(ou_config):
    grid = grid_for_periods(1.0, 50, 100)
    pair = simulate_pair(ou_config, ou_config, grid, seed=1)
    with pytest.raises(SampleLengthError):
        estimate_ergodic_stats(pair, tau=1.0, burn_in_periods=100, batches=16)
    with pytest.raises(ValueError):
        estimate_ergodic_stats(pair, tau=1.0, burn_in_periods=0, batches=4)


# ---------------------------------------------------------------------------
# law periodicity


def test_ks_statistic_matches_scipy(rng):
    a = rng.normal(size=300)
    b = rng.normal(loc=0.3, size=300)
    ours = ks_statistic(a, b)
    ref = sps.ks_2samp(a, b, method="asymp").statistic
    assert ours == pytest.approx(ref, abs=1e-12)


def test_ks_critical_value_equal_samples():
    n = 2000
    assert ks_critical_value(n, n) == pytest.approx(
        np.sqrt(-np.log(0.025) / n), rel=1e-12)


def test_law_periodic_at_full_period():
    cfg = NoiseChannelConfig(
        drift=PeriodicDriftSpec(tau=1.0, alpha=1.0, forcing_amp=1.0),
        beta=0.5)
    grid = grid_for_periods(1.0, 21, 200)
    seeds = ensemble_seeds(500, 600)
    rep = law_periodicity_check(cfg, grid, seeds, s=20.0, lag=1.0)
    assert rep.passed
    assert rep.statistic < rep.critical_value


def test_law_self_comparison_zero():
    cfg = NoiseChannelConfig(drift=PeriodicDriftSpec(tau=1.0, alpha=1.0), beta=1.0)
    grid = grid_for_periods(1.0, 5, 100)
    seeds = ensemble_seeds(0, 50)
    rep = law_periodicity_check(cfg, grid, seeds, s=4.0, lag=0.0)
    assert rep.statistic == 0.0


def test_law_differs_at_half_period():
    # strong forcing, light noise: the mid-period law is far from the
    # law at the forcing peak
    alpha, tau = 2.0, 1.0
    omega = 2 * np.pi / tau
    cfg = NoiseChannelConfig(
        drift=PeriodicDriftSpec(tau=tau, alpha=alpha, forcing_amp=5.0),
        beta=0.1)
    grid = grid_for_periods(tau, 31, 200)
    # settled response peaks where sin(omega s - atan(omega/alpha)) = 1
    s_peak = (np.pi / 2 + np.arctan(omega / alpha)) / omega
    s = 25.0 + round(s_peak / grid.h) * grid.h
    seeds = ensemble_seeds(100, 600)
    rep = law_periodicity_check(cfg, grid, seeds, s=s, lag=0.5)
    assert not rep.passed
    assert rep.statistic > rep.critical_value


def test_law_check_needs_two_members(ou_config):
    grid = grid_for_periods(1.0, 3, 100)
    with pytest.raises(ValueError):
        law_periodicity_check(ou_config, grid, ensemble_seeds(0, 1), s=1.0)


def test_ensemble_rows_match_single(ou_config):
    grid = PathGrid(0.0, 0.01, 300)
    seeds = ensemble_seeds(40, 5)
    values = simulate_ensemble(ou_config, grid, seeds)
    for k, seed in enumerate(seeds):
        assert np.array_equal(values[k],
                              simulate_path(ou_config, grid, int(seed)).values)
