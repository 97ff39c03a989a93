"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines as
they happen; they are also collected in the terminal summary.
"""
import json
import math
import time

import numpy as np
import pytest

from stochsis import (EnsembleConfig, ModelParams, Scheme, SimConfig, classify_regime,
                      ks_distance, lyapunov_ln_direct, lyapunov_ln_factored,
                      lyapunov_shape_check, make_h1, make_h2, martingale_average, mean_hitting_time,
                      run_ensemble, simulate_sde, solve_xi, Verdict)
from stochsis.analysis import interior_grid
from stochsis.cli import _clean
from stochsis.convergence import rk4_order, strong_order, weak_order
from stochsis.ensemble import default_workers
from stochsis.sim import martingale_batch_stderr

N = 1000.0
H1 = make_h1(1.0, 0.01)
H2 = make_h2(1.0, 1e-4)
H1_EXT = ModelParams(1e-5, 0.1, 1e-4, 9e-5, N)
H1_PER = ModelParams(8e-4, 0.1, 1e-4, 1e-3, N)
H2_EXT = ModelParams(1e-4, 0.1, 0.05, 9e-4, N)
H2_PER = ModelParams(9.9e-4, 0.1, 0.05, 1e-3, N)
EXTINCTION_SETS = {"h1": (H1_EXT, H1), "h2": (H2_EXT, H2)}
PERSISTENCE_SETS = {"h1": (H1_PER, H1), "h2": (H2_PER, H2)}


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_regime_arithmetic(criterion):
    t0 = time.perf_counter()
    ext = classify_regime(H1_EXT, H1)
    per = classify_regime(H1_PER, H1)
    runtime = time.perf_counter() - t0
    # arithmetic oracles written out independently of the classifier
    ext_rhs = 0.1001 / ((1e-5 + 8.1e-9 * 100) * 1000)
    stab_rhs = (0.1001 - 0.5 * 8.1e-9 * 1e6) / (1e-5 * 1e3)
    checks = {
        "extinction holds": ext.extinction.holds is True,
        f"extinction rhs {ext.extinction.rhs:.6f} ~ 9.26": rel(ext.extinction.rhs, ext_rhs) <= 1e-6
        and abs(ext.extinction.rhs - 9.26) < 5e-3,
        f"stability rhs {ext.stability.rhs:.6f} ~ 9.605": rel(ext.stability.rhs, stab_rhs) <= 1e-6
        and rel(ext.stability.rhs, 9.605) <= 1e-6,
        "extinction verdict": ext.verdict is Verdict.EXTINCTION,
        "persistence holds": per.persistence.holds is True,
        f"r_minus {per.roots.r_minus:.4f}": abs(per.roots.r_minus - 136.83) <= 0.01,
        f"r_plus {per.roots.r_plus:.4f}": abs(per.roots.r_plus - 1463.17) <= 0.01,
        f"xi {per.xi:.4f}": abs(per.xi - 364.47) <= 0.01,
        f"m {per.m:.4f}": abs(per.m - 22.22) <= 0.01,
    }
    criterion(1, "regime arithmetic", checks, runtime, 1.0,
              f"ext_rhs={ext.extinction.rhs:.6f} stab_rhs={ext.stability.rhs:.6f} "
              f"r-={per.roots.r_minus:.4f} r+={per.roots.r_plus:.4f} xi={per.xi:.4f} m={per.m:.4f}")


def test_criterion_02_factorization_identity(criterion):
    t0 = time.perf_counter()
    x = interior_grid(N, 1000)
    d = lyapunov_ln_direct(H1_PER, H1, x)
    f = lyapunov_ln_factored(H1_PER, H1, x)
    worst = float(np.max(np.abs(d - f) / (1 + np.abs(d))))
    runtime = time.perf_counter() - t0
    criterion(2, "factorization identity", {f"scaled gap {worst:.2e} <= 1e-9": worst <= 1e-9},
              runtime, 1.0, f"max scaled gap {worst:.2e}")


def test_criterion_03_lyapunov_shape(criterion):
    t0 = time.perf_counter()
    rep = lyapunov_shape_check(H1_PER, H1, 10_000)
    runtime = time.perf_counter() - t0
    lo, hi = rep.sign_change_cell
    checks = dict(rep.properties)
    checks["sign change cell contains xi"] = lo < rep.xi < hi
    checks["report passed"] = rep.passed
    criterion(3, "ln-drift shape on 1e4 grid", checks, runtime, 1.0,
              f"m={rep.m:.4f} xi={rep.xi:.4f} cell=({lo:.4f}, {hi:.4f})")


@pytest.mark.slow
def test_criterion_04_numerical_invariance(criterion):
    t0 = time.perf_counter()
    checks, detail = {}, []
    for name, (p, f) in PERSISTENCE_SETS.items():
        cfg = EnsembleConfig(SimConfig(x0=1.0, t_end=5000.0, dt=0.05), 1000, master_seed=4)
        s = run_ensemble(p, f, cfg)
        frac = float(np.mean(s.clamp_counts == 0))
        checks[f"{name}: clamp-free fraction {frac:.3f} >= 0.99"] = frac >= 0.99
        # burn_in = 0, so the running extremes cover every recorded value
        checks[f"{name}: recorded values inside (0, N)"] = bool(
            np.all(s.post_burn_in_min > 0) and np.all(s.post_burn_in_max < N))
        detail.append(f"{name} clamp-free={frac:.3f} min={s.post_burn_in_min.min():.3g} "
                      f"max={s.post_burn_in_max.max():.2f}")
    runtime = time.perf_counter() - t0
    criterion(4, "pathwise invariance, 1000 paths T=5000", checks, runtime, 120.0, "; ".join(detail))


@pytest.mark.slow
@pytest.mark.parametrize("name", ["h1", "h2"])
def test_criterion_05_extinction(criterion, name):
    p, f = EXTINCTION_SETS[name]
    t0 = time.perf_counter()
    assert classify_regime(p, f).verdict is Verdict.EXTINCTION
    cfg = EnsembleConfig(SimConfig(x0=10.0, t_end=2000.0, dt=0.05), 500, master_seed=5,
                         extinction_threshold=1e-3)
    s = run_ensemble(p, f, cfg)
    runtime = time.perf_counter() - t0
    criterion(5, f"extinction ({name})",
              {f"fraction {s.extinction_fraction:.3f} >= 0.95": s.extinction_fraction >= 0.95},
              runtime, 120.0, f"{name} extinct fraction={s.extinction_fraction:.3f}")


@pytest.mark.slow
@pytest.mark.parametrize("name", ["h1", "h2"])
def test_criterion_06_persistence_recurrence(criterion, name):
    p, f = PERSISTENCE_SETS[name]
    t0 = time.perf_counter()
    xi = solve_xi(p, f)
    checks, detail = {}, []
    # a separate seed per start, otherwise common noise makes the two runs coincide
    for x0, seed in ((1.0, 6), (100.0, 7)):
        cfg = EnsembleConfig(SimConfig(x0=x0, t_end=5000.0, dt=0.05), 100, master_seed=seed,
                             burn_in=500.0, crossing_level=xi)
        s = run_ensemble(p, f, cfg)
        checks[f"x0={x0:g}: every max >= xi"] = bool(np.all(s.post_burn_in_max >= xi))
        checks[f"x0={x0:g}: every min <= xi"] = bool(np.all(s.post_burn_in_min <= xi))
        checks[f"x0={x0:g}: min crossings {s.crossing_counts.min()} >= 10"] = bool(
            s.crossing_counts.min() >= 10)
        detail.append(f"x0={x0:g} min_crossings={s.crossing_counts.min()}")
    runtime = time.perf_counter() - t0
    criterion(6, f"persistence recurrence ({name})", checks, runtime, 180.0,
              f"xi={xi:.3f} " + " ".join(detail))


@pytest.mark.slow
def test_criterion_07_stationary_uniqueness(criterion):
    t0 = time.perf_counter()
    checks, detail = {}, []
    for name, (p, f) in PERSISTENCE_SETS.items():
        hists = []
        # distinct master seeds: a shared Brownian stream would synchronise the two starts
        for x0, seed in ((1.0, 11), (900.0, 12)):
            cfg = EnsembleConfig(SimConfig(x0=x0, t_end=5000.0, dt=0.05), 100, master_seed=seed,
                                 burn_in=500.0, histogram_bins=200)
            hists.append(run_ensemble(p, f, cfg).histogram)
        ks = ks_distance(*hists)
        n = min(h.sample_count for h in hists)
        checks[f"{name}: KS {ks:.4f} <= 0.05"] = ks <= 0.05
        checks[f"{name}: samples {n} >= 1e6"] = n >= 1_000_000
        detail.append(f"{name} KS={ks:.4f} samples={n}")
    runtime = time.perf_counter() - t0
    criterion(7, "stationary-measure uniqueness", checks, runtime, 300.0, "; ".join(detail))


@pytest.mark.slow
def test_criterion_08_hitting_time_bound(criterion):
    t0 = time.perf_counter()
    checks, detail = {}, []
    for name, (p, f) in PERSISTENCE_SETS.items():
        xi = solve_xi(p, f)
        for x0 in (10.0, N - 10.0):
            cfg = EnsembleConfig(SimConfig(x0=x0, t_end=2000.0, dt=0.05), 1000, master_seed=8)
            est = mean_hitting_time(p, f, cfg, xi - 50.0, xi + 50.0)
            key = f"{name} x0={x0:g}"
            checks[f"{key}: mean {est.mean:.2f} <= bound {est.bound:.2f} + 3 SE"] = \
                est.mean <= est.bound + 3 * est.stderr
            checks[f"{key}: censored {est.censored_fraction:.3f} < 0.01"] = est.censored_fraction < 0.01
            detail.append(f"{key} mean={est.mean:.2f}+-{est.stderr:.2f} bound={est.bound:.2f}")
    runtime = time.perf_counter() - t0
    criterion(8, "hitting-time bound", checks, runtime, 180.0, "; ".join(detail))


@pytest.mark.slow
def test_criterion_09_convergence_orders(criterion):
    t0 = time.perf_counter()
    em = strong_order(H1_PER, H1, 10.0, 5.0, Scheme.EULER_MARUYAMA)
    mil = strong_order(H1_PER, H1, 10.0, 5.0, Scheme.MILSTEIN)
    weak = weak_order(H1_EXT, H1, 10.0, 20.0)
    rk_p = rk4_order(H1_PER, H1, 10.0, 50.0)
    rk_e = rk4_order(H1_EXT, H1, 10.0, 100.0)
    runtime = time.perf_counter() - t0
    checks = {
        f"EM strong {em.order:.3f} in 0.5+-0.15": abs(em.order - 0.5) <= 0.15,
        f"EM weak {weak.order:.3f} in 1+-0.3": abs(weak.order - 1.0) <= 0.3,
        # the weak bias must be resolved above its Monte Carlo noise
        "weak bias > 3 SE at every dt": bool(np.all(weak.errors > 3 * weak.stderr)),
        f"Milstein strong {mil.order:.3f} in 1+-0.2": abs(mil.order - 1.0) <= 0.2,
        f"RK4 (persistence) {rk_p.order:.3f} in 4+-0.3": abs(rk_p.order - 4.0) <= 0.3,
        f"RK4 (extinction) {rk_e.order:.3f} in 4+-0.3": abs(rk_e.order - 4.0) <= 0.3,
    }
    criterion(9, "scheme convergence orders", checks, runtime, 300.0,
              f"EM strong={em.order:.3f} EM weak={weak.order:.3f} Milstein={mil.order:.3f} "
              f"RK4={rk_p.order:.3f}/{rk_e.order:.3f}")


@pytest.mark.slow
def test_criterion_10_martingale_lln(criterion):
    t0 = time.perf_counter()
    within, avg_T, avg_1000 = [], [], []
    for seed in range(100):
        tr = simulate_sde(H1_PER, H1, SimConfig(x0=100.0, t_end=5000.0, dt=0.05, seed=seed))
        a = martingale_average(tr)
        se = martingale_batch_stderr(tr)  # unit-time batches
        within.append(abs(a) < 4 * se)
        avg_T.append(abs(a))
        k = int(np.searchsorted(tr.times, 1000.0 - 1e-9))
        avg_1000.append(abs(tr.martingale_values[k] / tr.times[k]))
    runtime = time.perf_counter() - t0
    med_T, med_1000 = float(np.median(avg_T)), float(np.median(avg_1000))
    checks = {
        f"{sum(within)}/100 below 4 batch SE": all(within),
        f"median |M/T| {med_T:.4f} (T=5000) < {med_1000:.4f} (T=1000)": med_T < med_1000,
    }
    criterion(10, "martingale law of large numbers", checks, runtime, 120.0,
              f"median |M/T|: T=1000 {med_1000:.4f}, T=5000 {med_T:.4f}")


def test_criterion_11_reproducibility(criterion):
    t0 = time.perf_counter()
    xi = solve_xi(H1_PER, H1)
    cfg = EnsembleConfig(SimConfig(x0=1.0, t_end=500.0, dt=0.05), 200, master_seed=2024,
                         burn_in=100.0, hit_interval=(xi - 50, xi + 50))
    many = max(default_workers(), 4)
    one = json.dumps(_clean(run_ensemble(H1_PER, H1, cfg, workers=1).to_dict()))
    par = json.dumps(_clean(run_ensemble(H1_PER, H1, cfg, workers=many, block_size=9).to_dict()))
    runtime = time.perf_counter() - t0
    criterion(11, "reproducibility across worker counts",
              {f"1 worker == {many} workers byte-identical": one == par}, runtime, 60.0,
              f"{len(one)} bytes of JSON")
