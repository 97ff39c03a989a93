"""Incidence functions h with h(0)=0, 0 <= h <= k_h, h'(0) > 0 and h(x) <= h'(0) x.

Two families are shipped:

* ``h1(x) = kappa x / (1 + alpha x)``, saturating and monotone;
* ``h2(x) = kappa x / (1 + alpha x^2)``, unimodal and vanishing at infinity.

Other shapes can be plugged in by constructing :class:`IncidenceFunction`
directly from a pair of vectorised callables.  Such functions have
``family=None`` and are integrated through the pure-Python loop rather than
the compiled kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterDomainError
from . import kernels

H1 = kernels.FAMILY_H1
H2 = kernels.FAMILY_H2


@dataclass(frozen=True)
class IncidenceFunction:
    eval: Callable
    deriv: Callable
    slope_at_zero: float
    sup_bound: float
    label: str
    family: Optional[int] = None
    kappa: float = math.nan
    alpha: float = math.nan

    def __call__(self, x):
        return self.eval(x)

    def to_dict(self):
        out = {"label": self.label}
        if self.family is not None:
            out.update(family="h1" if self.family == H1 else "h2",
                       kappa=self.kappa, alpha=self.alpha)
        return out


def _check_positive(**values):
    for name, v in values.items():
        if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
            raise ParameterDomainError(f"{name} must be a finite positive real, got {v!r}")


def _builtin(family, kappa, alpha, sup_bound, label):
    kappa = float(kappa)
    alpha = float(alpha)

    def h(x):
        return kernels.h_value(np.asarray(x, dtype=float) if np.ndim(x) else float(x),
                               family, kappa, alpha)

    def dh(x):
        return kernels.h_deriv(np.asarray(x, dtype=float) if np.ndim(x) else float(x),
                               family, kappa, alpha)

    return IncidenceFunction(eval=h, deriv=dh, slope_at_zero=kappa, sup_bound=sup_bound,
                             label=label, family=family, kappa=kappa, alpha=alpha)


def make_h1(kappa=1.0, alpha=0.01):
    """Saturated incidence ``kappa x / (1 + alpha x)``; bounded by ``kappa / alpha``."""
    _check_positive(kappa=kappa, alpha=alpha)
    return _builtin(H1, kappa, alpha, float(kappa) / float(alpha), "h1-saturating")


def make_h2(kappa=1.0, alpha=0.0001):
    """Non-monotone incidence ``kappa x / (1 + alpha x^2)``.

    Peaks at ``x = 1/sqrt(alpha)`` with value ``kappa / (2 sqrt(alpha))`` and
    decays like ``kappa / (alpha x)``.
    """
    _check_positive(kappa=kappa, alpha=alpha)
    return _builtin(H2, kappa, alpha, float(kappa) / (2.0 * math.sqrt(alpha)), "h2-nonmonotone")


FAMILIES = {"h1": make_h1, "h2": make_h2}


def make_incidence(family, kappa=None, alpha=None):
    """Build a shipped family by name, using the family defaults for omitted parameters."""
    try:
        factory = FAMILIES[family]
    except KeyError:
        raise ParameterDomainError(f"unknown incidence family {family!r}; expected one of {sorted(FAMILIES)}")
    kwargs = {}
    if kappa is not None:
        kwargs["kappa"] = kappa
    if alpha is not None:
        kwargs["alpha"] = alpha
    return factory(**kwargs)


@dataclass
class PropertyCheck:
    passed: bool
    detail: str = ""
    worst_x: Optional[float] = None


@dataclass
class ValidationReport:
    label: str
    x_max: float
    n_points: int
    checks: dict = field(default_factory=dict)
    note: str = "properties checked on a finite grid, not symbolically"

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return [name for name, c in self.checks.items() if not c.passed]

    def to_dict(self):
        return {
            "label": self.label, "x_max": self.x_max, "n_points": self.n_points,
            "passed": self.passed, "note": self.note,
            "checks": {k: {"passed": c.passed, "detail": c.detail, "worst_x": c.worst_x}
                       for k, c in self.checks.items()},
        }


def _fd_consistency(f, xs):
    delta = 1e-5 * np.maximum(1.0, xs)
    lo = np.maximum(xs - delta, 0.0)
    hi = xs + delta
    fd = (np.asarray(f.eval(hi)) - np.asarray(f.eval(lo))) / (hi - lo)
    d = np.asarray(f.deriv(xs))
    err = np.abs(d - fd) / np.maximum(1.0, np.abs(d))
    return err


def validate_incidence(f, x_max, n_points=1000):
    """Check the five incidence properties plus derivative consistency on a grid.

    The grid is ``x = 0`` plus ``n_points`` log-spaced samples in
    ``[1e-8 x_max, x_max]``.  Failures are reported, never raised.
    """
    if not x_max > 0:
        raise ParameterDomainError("x_max must be positive")
    if n_points < 10:
        raise ParameterDomainError("n_points must be at least 10")
    xs = np.geomspace(x_max * 1e-8, x_max, int(n_points))
    hx = np.asarray(f.eval(xs), dtype=float)
    h0 = float(f.eval(0.0))
    rep = ValidationReport(label=f.label, x_max=float(x_max), n_points=int(n_points))
    tiny = 4 * np.finfo(float).eps

    rep.checks["zero_at_origin"] = PropertyCheck(h0 == 0.0, f"h(0) = {h0!r}")

    neg = hx < 0
    rep.checks["non_negative"] = PropertyCheck(
        h0 >= 0 and not neg.any(), f"{int(neg.sum())} negative samples",
        float(xs[neg][0]) if neg.any() else None)

    k = f.sup_bound
    over = ~(hx <= k * (1 + tiny)) if math.isfinite(k) else np.ones_like(hx, bool)
    rep.checks["bounded"] = PropertyCheck(
        bool(math.isfinite(k) and k > 0 and not over.any()),
        f"max h on grid = {hx.max():.6g}, k_h = {k:.6g}",
        float(xs[np.argmax(hx)]) if over.any() else None)

    s = f.slope_at_zero
    rep.checks["positive_slope_at_zero"] = PropertyCheck(bool(s > 0), f"h'(0) = {s!r}")

    lin = ~(hx <= s * xs * (1 + tiny))
    rep.checks["below_tangent"] = PropertyCheck(
        not lin.any(), f"{int(lin.sum())} samples exceed h'(0) x",
        float(xs[lin][0]) if lin.any() else None)

    err = _fd_consistency(f, xs)
    bad = ~(err <= 1e-6)
    rep.checks["derivative_consistent"] = PropertyCheck(
        not bad.any(), f"max relative finite-difference gap {np.nanmax(err):.3g}",
        float(xs[np.argmax(err)]) if bad.any() else None)
    return rep
