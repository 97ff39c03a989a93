import json
import warnings

import numpy as np
import pytest

from stochsis import (EnsembleConfig, Histogram, ModelParams, SimConfig, crossing_count,
                      empirical_stationary, ks_distance, limsup_liminf_probe, mean_hitting_time,
                      run_ensemble, simulate_sde, solve_xi)
from stochsis.cli import _clean
from stochsis.errors import CensoringWarning, ConfigError, DomainError, RegimeWarning

N = 1000.0


def pers_cfg(n=20, t_end=100.0, **kw):
    return EnsembleConfig(SimConfig(x0=1.0, t_end=t_end, dt=0.05), n, **kw)


def test_singleton_matches_simulate_sde(h1, h1_persistence):
    sim = SimConfig(x0=1.0, t_end=50.0, dt=0.05, seed=17)
    summ = run_ensemble(h1_persistence, h1, EnsembleConfig(sim, 1, master_seed=17))
    tr = simulate_sde(h1_persistence, h1, sim, stream=0)
    assert summ.terminal[0] == tr.values[-1]
    assert summ.martingale_final[0] == tr.martingale_values[-1]
    assert summ.post_burn_in_max[0] == tr.values.max()
    assert summ.post_burn_in_min[0] == tr.values.min()
    assert summ.crossing_counts[0] == crossing_count(tr, summ.crossing_level)
    assert summ.clamp_counts[0] == tr.clamp_count


def test_trajectory_i_uses_stream_i(h1, h1_persistence):
    sim = SimConfig(x0=1.0, t_end=20.0, dt=0.05)
    summ = run_ensemble(h1_persistence, h1, EnsembleConfig(sim, 5, master_seed=3))
    for i in range(5):
        tr = simulate_sde(h1_persistence, h1, SimConfig(x0=1.0, t_end=20.0, dt=0.05, seed=3), stream=i)
        assert summ.terminal[i] == tr.values[-1]


def test_histogram_matches_recorded_values(h1, h1_persistence):
    sim = SimConfig(x0=1.0, t_end=40.0, dt=0.05, seed=5, record_every=4)
    cfg = EnsembleConfig(sim, 3, master_seed=5, burn_in=10.0, histogram_bins=20)
    summ = run_ensemble(h1_persistence, h1, cfg)
    samples = []
    for i in range(3):
        tr = simulate_sde(h1_persistence, h1, sim, stream=i)
        samples.append(tr.values[tr.times >= 10.0])
    counts, _ = np.histogram(np.concatenate(samples), bins=20, range=(0.0, N))
    assert summ.histogram.sample_count == counts.sum()
    np.testing.assert_array_equal(np.rint(summ.histogram.masses * counts.sum()), counts)
    assert abs(summ.histogram.masses.sum() - 1.0) <= 1e-12


def test_worker_count_does_not_change_summary(h1, h1_persistence):
    cfg = pers_cfg(n=70, master_seed=2, burn_in=20.0, hit_interval=(314.0, 414.0))
    a = run_ensemble(h1_persistence, h1, cfg, workers=1)
    b = run_ensemble(h1_persistence, h1, cfg, workers=4, block_size=5)
    assert json.dumps(_clean(a.to_dict())) == json.dumps(_clean(b.to_dict()))


def test_summary_invariants(h1, h1_persistence):
    s = run_ensemble(h1_persistence, h1, pers_cfg(n=30, burn_in=10.0))
    assert 0.0 <= s.extinction_fraction <= 1.0
    assert np.all(np.diff(s.histogram.edges) > 0)
    assert np.all(s.histogram.masses >= 0)
    assert s.crossing_level == pytest.approx(solve_xi(h1_persistence, h1))
    assert s.hitting_times is None and s.censored_fraction is None
    assert "wall_time_s" in s.metrics and "metrics" not in s.to_dict()


def test_extinction_regime_has_no_level(h1, h1_extinction):
    s = run_ensemble(h1_extinction, h1, pers_cfg(n=4))
    assert s.crossing_level is None
    assert np.all(s.crossing_counts == 0)


def test_ks_examples():
    e = np.linspace(0, N, 11)
    a = Histogram(e, np.eye(10)[0], 1)
    b = Histogram(e, np.eye(10)[9], 1)
    assert ks_distance(a, a) == 0.0
    assert ks_distance(a, b) == 1.0
    with pytest.raises(ConfigError):
        ks_distance(a, Histogram(np.linspace(0, N, 12), np.eye(11)[0], 1))


def test_histogram_requires_samples():
    with pytest.raises(ConfigError):
        Histogram.from_counts(np.zeros(10), N)


def test_crossing_count_constant_and_alternating(h1, h1_persistence):
    from stochsis import Trajectory, Scheme
    t = np.arange(6.0)
    z = np.zeros(6)
    flat = Trajectory(t, np.full(6, 5.0), z, z.astype(np.int8), Scheme.EULER_MARUYAMA)
    assert crossing_count(flat, 10.0) == 0
    zig = Trajectory(t, np.array([1.0, 20, 1, 20, 10, 1]), z, z.astype(np.int8), Scheme.EULER_MARUYAMA)
    assert crossing_count(zig, 10.0) == 4
    assert crossing_count(zig, 10.0, t_min=2.0) == 2


def test_empirical_stationary(h1, h1_persistence, h1_extinction):
    with pytest.raises(ConfigError):
        empirical_stationary(h1_persistence, h1, pers_cfg(n=2))
    h = empirical_stationary(h1_persistence, h1, pers_cfg(n=20, t_end=400.0, burn_in=100.0))
    xi = solve_xi(h1_persistence, h1)
    assert abs(h.mode() - xi) <= 0.1 * N
    with pytest.warns(RegimeWarning):
        empirical_stationary(h1_extinction, h1, pers_cfg(n=2, burn_in=10.0))


def test_hitting_time_immediate_and_errors(h1, h1_persistence):
    xi = solve_xi(h1_persistence, h1)
    cfg = EnsembleConfig(SimConfig(x0=xi - 50.0, t_end=50.0, dt=0.05), 50)
    est = mean_hitting_time(h1_persistence, h1, cfg, xi - 50.0, 900.0)
    assert est.mean <= 2.0
    assert est.censored_fraction == 0.0
    bad = EnsembleConfig(SimConfig(x0=xi, t_end=10.0), 2)
    with pytest.raises(DomainError):
        mean_hitting_time(h1_persistence, h1, bad, xi - 50, xi + 50)


def test_hitting_time_censoring_warns(h1, h1_persistence):
    xi = solve_xi(h1_persistence, h1)
    cfg = EnsembleConfig(SimConfig(x0=1.0, t_end=2.0, dt=0.05), 10)
    with pytest.warns(CensoringWarning):
        est = mean_hitting_time(h1_persistence, h1, cfg, xi - 50, xi + 50)
    assert est.censored_fraction == 1.0


def test_probe_monotone_in_horizon(h1, h1_persistence):
    xi = solve_xi(h1_persistence, h1)
    short = limsup_liminf_probe(h1_persistence, h1, pers_cfg(n=30, t_end=1000.0, burn_in=500.0), xi)
    long = limsup_liminf_probe(h1_persistence, h1, pers_cfg(n=30, t_end=5000.0, burn_in=500.0), xi)
    assert np.all(long.post_burn_in_max >= short.post_burn_in_max)
    assert np.all(long.post_burn_in_min <= short.post_burn_in_min)
    assert long.fraction_max_above >= short.fraction_max_above
    assert long.fraction_min_below >= short.fraction_min_below


def test_probe_sigma_zero_degenerates_to_indicator(h1):
    p = ModelParams(8e-4, 0.1, 1e-4, 0.0, N)
    x_star = (p.beta * N - p.rate) / (p.beta + 0.01 * p.rate)
    cfg = EnsembleConfig(SimConfig(x0=x_star, t_end=100.0), 3, burn_in=50.0)
    for level in (x_star - 10, x_star + 10):
        rep = limsup_liminf_probe(p, h1, cfg, level)
        assert rep.fraction_max_above == float(x_star >= level)
        assert rep.fraction_min_below == float(x_star <= level)


@pytest.mark.parametrize("kw", [dict(n_trajectories=0), dict(burn_in=200.0), dict(histogram_bins=5),
                                dict(extinction_threshold=0.0), dict(hit_interval=(5.0, 1.0))])
def test_ensemble_config_validation(kw):
    base = dict(sim=SimConfig(x0=1.0, t_end=100.0), n_trajectories=2)
    base.update(kw)
    with pytest.raises(ConfigError):
        EnsembleConfig(**base)
    with pytest.raises(ConfigError):
        EnsembleConfig(SimConfig(x0=1.0, t_end=1.0, scheme="rk4"), 1)


def test_dichotomy_small(h1, h1_persistence, h1_extinction):
    cfg = EnsembleConfig(SimConfig(x0=10.0, t_end=2000.0), 50, extinction_threshold=1e-3)
    assert run_ensemble(h1_extinction, h1, cfg).extinction_fraction >= 0.95
    assert run_ensemble(h1_persistence, h1, cfg).extinction_fraction <= 0.01
