"""Empirical convergence orders of the integrators.

Coarse and fine paths share one Brownian realisation: coarse increments are
sums of consecutive fine increments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import Scheme, SimConfig, brownian_stream, integrate_increments, simulate_ode

STRONG_DTS = (0.1, 0.05, 0.025, 0.0125)
RK4_DTS = (0.8, 0.4, 0.2, 0.1)


@dataclass
class OrderEstimate:
    dts: tuple
    errors: np.ndarray
    order: float
    stderr: np.ndarray = None

    def to_dict(self):
        return {"dts": list(self.dts), "errors": self.errors.tolist(), "order": self.order}


def fitted_order(dts, errors):
    """Least-squares slope of log(error) against log(dt)."""
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


def coarsen(dW, factor):
    return dW.reshape(-1, factor).sum(axis=1)


def _fine_increments(seed, t_end, dt_fine):
    n = int(round(t_end / dt_fine))
    return np.sqrt(dt_fine) * brownian_stream(seed, 0).standard_normal(n)


def strong_order(p, f, x0, t_end, scheme=Scheme.EULER_MARUYAMA, dts=STRONG_DTS,
                 n_seeds=200, refine=16, seed0=0):
    """RMS terminal gap against a path ``refine`` times finer than ``min(dts)``."""
    dt_ref = min(dts) / refine
    gaps = np.empty((len(dts), n_seeds))
    for s in range(n_seeds):
        dWf = _fine_increments(seed0 + s, t_end, dt_ref)
        ref = integrate_increments(p, f, x0, dt_ref, dWf, scheme).values[-1]
        for i, dt in enumerate(dts):
            dW = coarsen(dWf, int(round(dt / dt_ref)))
            gaps[i, s] = integrate_increments(p, f, x0, dt, dW, scheme).values[-1] - ref
    rms = np.sqrt(np.mean(gaps ** 2, axis=1))
    return OrderEstimate(tuple(dts), rms, fitted_order(dts, rms))


def weak_order(p, f, x0, t_end, scheme=Scheme.EULER_MARUYAMA, dts=STRONG_DTS,
               n_seeds=10_000, seed0=0):
    """``|E[x(T)]_dt - E[x(T)]_{dt/4}|`` on coupled paths."""
    dt_min = min(dts) / 4
    diffs = np.empty((len(dts), n_seeds))
    for s in range(n_seeds):
        dWf = _fine_increments(seed0 + s, t_end, dt_min)
        for i, dt in enumerate(dts):
            dW_half = coarsen(dWf, int(round(dt / 4 / dt_min)))
            dW = coarsen(dW_half, 4)
            coarse = integrate_increments(p, f, x0, dt, dW, scheme).values[-1]
            fine = integrate_increments(p, f, x0, dt / 4, dW_half, scheme).values[-1]
            diffs[i, s] = coarse - fine
    err = np.abs(diffs.mean(axis=1))
    se = diffs.std(axis=1, ddof=1) / np.sqrt(n_seeds)
    return OrderEstimate(tuple(dts), err, fitted_order(dts, err), se)


def rk4_order(p, f, x0, t_end, dts=RK4_DTS):
    """Terminal error against a run at ``min(dts) / 100``."""
    def terminal(dt):
        return simulate_ode(p, f, SimConfig(x0=x0, t_end=t_end, dt=dt, scheme=Scheme.RK4)).values[-1]

    ref = terminal(min(dts) / 100)
    err = np.array([abs(terminal(dt) - ref) for dt in dts])
    return OrderEstimate(tuple(dts), err, fitted_order(dts, err))
