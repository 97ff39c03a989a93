"""Stochastic SIS epidemic model with non-linear incidence.

Regime classification, endemic level, SDE integration and Monte Carlo
ensembles for ``dx = (beta h(x)(N-x) - (gamma+mu) x) dt + sigma h(x)(N-x) dB``.
"""
from ._jit import BACKEND
from .analysis import (Verdict, classify_regime, find_mode_m, hitting_time_bound,
                       lyapunov_shape_check, solve_xi, check_phi_decreasing)
from .ensemble import (EnsembleConfig, Histogram, crossing_count, empirical_stationary,
                       ks_distance, limsup_liminf_probe, mean_hitting_time, run_ensemble)
from .incidence import IncidenceFunction, make_h1, make_h2, validate_incidence
from .model import (ModelParams, diffusion, diffusion_deriv, drift, lyapunov_general,
                    lyapunov_ln_direct, lyapunov_ln_factored, lyapunov_roots, phi, phi_at_zero)
from .sim import (Scheme, SimConfig, Trajectory, integrate_increments, martingale_average,
                  simulate_ode, simulate_sde)

__version__ = "0.1.0"
