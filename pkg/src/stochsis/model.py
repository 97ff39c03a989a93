"""Model parameters and closed-form coefficient functions.

The SDE is ``dx = (beta h(x)(N - x) - (gamma + mu) x) dt + sigma h(x)(N - x) dB``.
Applying the generator to ``V = ln x`` gives

    L ln(x) = beta phi(x) - (gamma + mu) - sigma^2 phi(x)^2 / 2,
    phi(x)  = h(x)(N - x) / x,

a downward parabola in ``phi`` whose roots are ``r_minus`` and ``r_plus``.
All functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from . import kernels
from .errors import DegenerateError, DomainError, ParameterDomainError, RegimeError


@dataclass(frozen=True)
class ModelParams:
    beta: float
    gamma: float
    mu: float
    sigma: float
    N: float

    def __post_init__(self):
        for name in ("beta", "gamma", "mu", "sigma", "N"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)):
                raise ParameterDomainError(f"{name} must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise ParameterDomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.beta <= 0:
            raise ParameterDomainError(f"beta must be > 0, got {self.beta}")
        if self.N <= 0:
            raise ParameterDomainError(f"N must be > 0, got {self.N}")
        for name in ("gamma", "mu", "sigma"):
            if getattr(self, name) < 0:
                raise ParameterDomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.gamma + self.mu <= 0:
            raise ParameterDomainError("gamma + mu must be > 0")

    @property
    def rate(self):
        """Total removal rate ``gamma + mu``."""
        return self.gamma + self.mu

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LyapunovRoots:
    r_minus: float
    r_plus: float
    discriminant: float

    def to_dict(self):
        return asdict(self)


def _closed(x, lo, hi, what):
    arr = np.asarray(x, dtype=float)
    if not np.all((arr >= lo) & (arr <= hi)):
        raise DomainError(f"{what}: x must lie in [{lo}, {hi}]")
    return arr if arr.ndim else float(arr)


def _open(x, lo, hi, what):
    arr = np.asarray(x, dtype=float)
    if not np.all((arr > lo) & (arr < hi)):
        raise DomainError(f"{what}: x must lie in ({lo}, {hi})")
    return arr if arr.ndim else float(arr)


def drift(p, f, x):
    x = _closed(x, 0.0, p.N, "drift")
    return kernels.drift_value(x, f.eval(x), p.beta, p.rate, p.N)


def diffusion(p, f, x):
    x = _closed(x, 0.0, p.N, "diffusion")
    return kernels.diffusion_value(x, f.eval(x), p.sigma, p.N)


def diffusion_deriv(p, f, x):
    """Derivative of the noise amplitude, used by the Milstein correction."""
    x = _closed(x, 0.0, p.N, "diffusion_deriv")
    return kernels.diffusion_deriv_value(x, f.eval(x), f.deriv(x), p.sigma, p.N)


def phi_at_zero(p, f):
    """Continuous extension ``phi(0+) = h'(0) N``."""
    return f.slope_at_zero * p.N


def phi(p, f, x):
    """``h(x)(N - x)/x`` on (0, N); switches to ``h'(0)(N - x)`` below ``1e-8 N``."""
    x = _open(x, 0.0, p.N, "phi")
    small = kernels.SMALL_X * p.N
    if np.ndim(x):
        out = np.empty_like(x)
        big = x >= small
        out[big] = kernels.phi_value(x[big], f.eval(x[big]), p.N)
        out[~big] = kernels.phi_small(x[~big], f.slope_at_zero, p.N)
        return out
    if x < small:
        return kernels.phi_small(x, f.slope_at_zero, p.N)
    return kernels.phi_value(x, f.eval(x), p.N)


def _ln_from_phi(p, ph):
    return p.beta * ph - p.rate - 0.5 * p.sigma ** 2 * ph * ph


def lyapunov_ln_direct(p, f, x):
    """Generator applied to ln x: ``beta phi - (gamma + mu) - sigma^2 phi^2 / 2``."""
    return _ln_from_phi(p, phi(p, f, x))


def lyapunov_ln_at_zero(p, f):
    """Limit of the ln-drift as x -> 0+."""
    return _ln_from_phi(p, phi_at_zero(p, f))


def degenerate_noise(p):
    """True when sigma^2 is zero or so small that ``beta / sigma^2`` overflows."""
    s2 = p.sigma ** 2
    return s2 == 0 or not math.isfinite(2.0 * p.beta / (s2 * max(p.N, 1.0)))


def lyapunov_roots(p):
    if degenerate_noise(p):
        raise DegenerateError(f"sigma = {p.sigma!r}: the ln-drift is effectively linear in phi "
                              "and has no finite quadratic roots")
    disc = p.beta ** 2 - 2.0 * p.sigma ** 2 * p.rate
    if disc < 0:
        raise RegimeError(f"negative discriminant beta^2 - 2 sigma^2 (gamma+mu) = {disc:.6g}",
                          discriminant=disc)
    sq = math.sqrt(disc)
    s2 = p.sigma ** 2
    r_plus = (p.beta + sq) / s2
    # product form avoids cancellation in beta - sqrt(disc)
    r_minus = 2.0 * p.rate / (p.beta + sq)
    return LyapunovRoots(r_minus=r_minus, r_plus=r_plus, discriminant=disc)


def lyapunov_ln_factored(p, f, x):
    """``-sigma^2/2 (phi - r_plus)(phi - r_minus)``; requires real roots."""
    roots = lyapunov_roots(p)
    ph = phi(p, f, x)
    return -0.5 * p.sigma ** 2 * (ph - roots.r_plus) * (ph - roots.r_minus)


@dataclass(frozen=True)
class TestFunction:
    """A scalar test function together with its first two derivatives."""
    value: Callable
    d1: Callable
    d2: Callable

    __test__ = False  # not a pytest class


def log_test_function():
    return TestFunction(np.log, lambda x: 1.0 / x, lambda x: -1.0 / (x * x))


def barrier_test_function(N):
    """``1/x + 1/(N - x)``, blowing up at both ends of (0, N)."""
    return TestFunction(
        lambda x: 1.0 / x + 1.0 / (N - x),
        lambda x: -1.0 / (x * x) + 1.0 / ((N - x) ** 2),
        lambda x: 2.0 / x ** 3 + 2.0 / (N - x) ** 3,
    )


def lyapunov_general(p, f, V, x):
    """``b(x) V'(x) + sigma(x)^2 V''(x) / 2`` for a caller-supplied test function."""
    x = _open(x, 0.0, p.N, "lyapunov_general")
    hx = f.eval(x)
    b = kernels.drift_value(x, hx, p.beta, p.rate, p.N)
    s = kernels.diffusion_value(x, hx, p.sigma, p.N)
    return b * V.d1(x) + 0.5 * s * s * V.d2(x)


def barrier_constant(p, f):
    """``max{gamma+mu + sigma^2 h'(0)^2 N^2, beta k_h + sigma^2 k_h^2}``."""
    s = f.slope_at_zero
    k = f.sup_bound
    return max(p.rate + p.sigma ** 2 * s * s * p.N ** 2, p.beta * k + p.sigma ** 2 * k * k)
