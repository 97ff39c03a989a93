"""Regime conditions, endemic level, and hitting-time bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional

import numpy as np

from . import model
from .errors import DomainError, RegimeError, ShapeViolationError, StochSISError

BISECTION_RTOL = 1e-10
BISECTION_MAXITER = 200
GOLDEN_RTOL = 1e-9
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class Verdict(str, Enum):
    STABLE_DFE = "STABLE_DFE"
    EXTINCTION = "EXTINCTION"
    PERSISTENCE_UNIQUE_STATIONARY = "PERSISTENCE_UNIQUE_STATIONARY"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class Condition:
    """``holds`` is None when the condition is not applicable (e.g. sigma = 0)."""
    holds: Optional[bool]
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    note: str = ""


@dataclass
class PersistenceCondition:
    bracket: Condition
    discriminant: Condition
    phi_decreasing: Condition
    lower: Optional[float] = None
    upper: Optional[float] = None

    @property
    def holds(self):
        parts = (self.bracket.holds, self.discriminant.holds, self.phi_decreasing.holds)
        if any(v is None for v in parts):
            return None
        return all(parts)


@dataclass
class RegimeReport:
    stability: Condition
    extinction: Condition
    persistence: PersistenceCondition
    verdict: Verdict
    roots: Optional[model.LyapunovRoots] = None
    xi: Optional[float] = None
    m: Optional[float] = None
    slope_at_zero: float = math.nan
    sup_bound: float = math.nan
    notes: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d["persistence"]["holds"] = self.persistence.holds
        return d


# ---------------------------------------------------------------------------
# scalar solvers

def bisect(g, lo, hi, ftol, maxiter=BISECTION_MAXITER):
    """Root of ``g`` on [lo, hi] given a sign change; stops once ``|g| <= ftol``."""
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if (glo > 0) == (ghi > 0):
        raise StochSISError(f"bisection bracket [{lo}, {hi}] has no sign change")
    best, gbest = (lo, glo) if abs(glo) < abs(ghi) else (hi, ghi)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if abs(gm) < abs(gbest):
            best, gbest = mid, gm
        if abs(gm) <= ftol:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return best


def golden_max(g, lo, hi, xtol):
    """Golden-section search for the maximiser of a unimodal ``g`` on [lo, hi]."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > xtol:
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - INV_PHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + INV_PHI * (b - a)
            gd = g(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------

def interior_grid(N, n):
    return N * np.arange(1, n + 1) / (n + 1)


def check_phi_decreasing(p, f, n_grid=10_000):
    if n_grid < 100:
        raise DomainError("n_grid must be >= 100")
    ph = model.phi(p, f, interior_grid(p.N, n_grid))
    return bool(np.all(np.diff(ph) < 0))


def _stability(p, f):
    s = f.slope_at_zero
    rhs = (p.rate - 0.5 * p.sigma ** 2 * s * s * p.N ** 2) / (p.beta * p.N)
    return Condition(bool(s < rhs), s, rhs, "h'(0) < ((gamma+mu) - sigma^2 h'(0)^2 N^2 / 2) / (beta N)")


def _extinction(p, f):
    s = f.slope_at_zero
    rhs = p.rate / ((p.beta + p.sigma ** 2 * f.sup_bound) * p.N)
    return Condition(bool(s < rhs), s, rhs, "h'(0) < (gamma+mu) / ((beta + sigma^2 k_h) N)")


def _persistence(p, f, n_grid):
    s = f.slope_at_zero
    if model.degenerate_noise(p):
        na = Condition(None, note=f"not applicable: sigma = {p.sigma!r}")
        return PersistenceCondition(na, na, na), None
    disc = p.beta ** 2 - 2 * p.sigma ** 2 * p.rate
    lower = p.beta / (p.sigma ** 2 * p.N)
    roots = None
    if disc >= 0:
        roots = model.lyapunov_roots(p)
        upper = roots.r_plus / p.N
        bracket = Condition(bool(lower < s < upper), s, upper,
                            f"beta/(sigma^2 N) = {lower!r} < h'(0) < r_plus/N")
    else:
        upper = None
        bracket = Condition(False, s, None, "upper bracket undefined: negative discriminant")
    dcond = Condition(bool(disc > 0), p.beta ** 2, 2 * p.sigma ** 2 * p.rate,
                      "beta^2 > 2 sigma^2 (gamma+mu)")
    dec = Condition(check_phi_decreasing(p, f, n_grid), note=f"grid check, {n_grid} points")
    return PersistenceCondition(bracket, dcond, dec, lower, upper), roots


def classify_regime(p, f, n_grid=10_000):
    """Evaluate every sufficient condition independently and pick a verdict."""
    stab = _stability(p, f)
    ext = _extinction(p, f)
    pers, roots = _persistence(p, f, n_grid)
    xi = m = None
    notes = []
    if pers.holds:
        xi = solve_xi(p, f, _checked=True)
        try:
            m = find_mode_m(p, f, xi)
        except ShapeViolationError as exc:
            # h'(0) barely above beta/(sigma^2 N) pushes m towards 0+
            notes.append(f"m not resolved: {exc}")
        verdict = Verdict.PERSISTENCE_UNIQUE_STATIONARY
    elif ext.holds:
        verdict = Verdict.EXTINCTION
    elif stab.holds:
        verdict = Verdict.STABLE_DFE
    else:
        verdict = Verdict.INCONCLUSIVE
    return RegimeReport(stab, ext, pers, verdict, roots, xi, m, f.slope_at_zero, f.sup_bound, notes)


def require_persistence(p, f, n_grid=10_000):
    pers, roots = _persistence(p, f, n_grid)
    if not pers.holds:
        failed = [name for name in ("bracket", "discriminant", "phi_decreasing")
                  if not getattr(pers, name).holds]
        raise RegimeError("persistence hypotheses fail: " + ", ".join(failed),
                          failed=failed)
    return roots


def solve_xi(p, f, _checked=False):
    """Endemic level: the root of ``phi(x) = r_minus`` on (0, N), by bisection."""
    roots = model.lyapunov_roots(p) if _checked else require_persistence(p, f)
    r = roots.r_minus
    phi0 = model.phi_at_zero(p, f)

    def g(x):
        if x <= 0:
            return phi0 - r
        if x >= p.N:
            return -r
        return model.phi(p, f, x) - r

    xi = bisect(g, 0.0, p.N, BISECTION_RTOL * r)
    if not 0 < xi < p.N:
        raise StochSISError(f"bisection returned xi = {xi} outside (0, N)")
    return xi


def _ln_drift(p, f):
    L0 = model.lyapunov_ln_at_zero(p, f)

    def L(x):
        return L0 if x <= 0 else model.lyapunov_ln_direct(p, f, x)

    return L


def find_mode_m(p, f, xi):
    """Maximiser of the ln-drift on (0, xi), by golden-section search."""
    L = _ln_drift(p, f)
    tol = GOLDEN_RTOL * p.N
    m = golden_max(L, 0.0, xi, tol)
    Lm = L(m)
    if not (tol < m < xi - tol) or not (Lm > L(0.0) and Lm > 0):
        raise ShapeViolationError(f"ln-drift maximum not interior to (0, xi): m = {m}, L(m) = {Lm}",
                                  m=m, xi=xi)
    return m


@dataclass
class ShapeReport:
    applicable: bool
    passed: bool = False
    properties: dict = field(default_factory=dict)
    first_violation: Optional[tuple] = None
    sign_change_cell: Optional[tuple] = None
    xi: Optional[float] = None
    m: Optional[float] = None
    reason: str = ""

    def to_dict(self):
        return asdict(self)


def lyapunov_shape_check(p, f, n_grid=10_000):
    """Grid check: increasing and positive on (0, m), decreasing and positive on
    (m, xi), decreasing and negative on (xi, N)."""
    try:
        require_persistence(p, f)
        xi = solve_xi(p, f, _checked=True)
        m = find_mode_m(p, f, xi)
    except RegimeError as exc:
        return ShapeReport(applicable=False, reason=str(exc))
    x = interior_grid(p.N, n_grid)
    L = model.lyapunov_ln_direct(p, f, x)
    dL = np.diff(L)
    regions = {
        "increasing_positive_below_m": (x < m, 1, 1),
        "decreasing_positive_between_m_xi": ((x > m) & (x < xi), -1, 1),
        "decreasing_negative_above_xi": (x > xi, -1, -1),
    }
    rep = ShapeReport(applicable=True, xi=xi, m=m)
    for name, (mask, slope_sign, value_sign) in regions.items():
        pair = mask[:-1] & mask[1:]
        ok_slope = np.sign(dL[pair]) == slope_sign
        ok_value = np.sign(L[mask]) == value_sign
        good = bool(ok_slope.all() and ok_value.all())
        rep.properties[name] = good
        if not good and rep.first_violation is None:
            xs_pair = x[:-1][pair]
            bad_x = xs_pair[~ok_slope][0] if not ok_slope.all() else x[mask][~ok_value][0]
            rep.first_violation = (name, float(bad_x))
    flips = np.nonzero(np.diff(np.sign(L)) != 0)[0]
    if len(flips):
        i = flips[-1]
        rep.sign_change_cell = (float(x[i]), float(x[i + 1]))
    rep.passed = all(rep.properties.values()) and len(flips) == 1 \
        and rep.sign_change_cell[0] < xi < rep.sign_change_cell[1]
    return rep


def hitting_time_bound(p, f, a, b, x0):
    """Upper bound on the mean entry time into (a, b) from outside.

    From below: ``ln(a/x0) / min{L ln(0+), L ln(a)}``.
    From above: ``ln(N/b) / |L ln(b)|``.
    """
    require_persistence(p, f)
    xi = solve_xi(p, f, _checked=True)
    if not (0 < a < xi < b < p.N):
        raise DomainError(f"need 0 < a < xi < b < N, got a={a}, xi={xi}, b={b}")
    if a < x0 < b:
        raise DomainError("x0 already inside target interval (a, b)")
    if not 0 < x0 < p.N:
        raise DomainError("x0 must lie in (0, N)")
    if x0 <= a:
        denom = min(model.lyapunov_ln_at_zero(p, f), model.lyapunov_ln_direct(p, f, a))
        if denom <= 0:
            raise RegimeError(f"non-positive ln-drift on (0, a]: {denom}")
        return math.log(a / x0) / denom
    Lb = model.lyapunov_ln_direct(p, f, b)
    if Lb >= 0:
        raise RegimeError(f"non-negative ln-drift at b: {Lb}")
    return math.log(p.N / b) / abs(Lb)
