"""Hot loops: per-step arithmetic plus path and ensemble kernels.

Every per-step formula is written once as a ``register_jitable`` primitive.
The primitives accept Python floats or numpy arrays, so the numpy fallback
evaluates exactly the same operation sequence as the compiled kernels and
both backends produce bit-identical trajectories.

Kernels never raise.  They return a status tuple ``(code, trajectory, step)``
and the caller turns non-zero codes into exceptions.
"""
import math

import numpy as np

from ._jit import BACKEND, HAVE_NUMBA, njit, register_jitable

FAMILY_H1 = 1
FAMILY_H2 = 2
# below SMALL_X * N, phi(x) = h(x)(N - x)/x is replaced by h'(0)(N - x)
SMALL_X = 1e-8

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_LEFT_DOMAIN = 2


@register_jitable
def h_value(x, fam, kappa, alpha):
    if fam == FAMILY_H1:
        return kappa * x / (1.0 + alpha * x)
    return kappa * x / (1.0 + alpha * x * x)


@register_jitable
def h_deriv(x, fam, kappa, alpha):
    if fam == FAMILY_H1:
        d = 1.0 + alpha * x
        return kappa / (d * d)
    d = 1.0 + alpha * x * x
    return kappa * (1.0 - alpha * x * x) / (d * d)


@register_jitable
def drift_value(x, hx, beta, rate, N):
    return beta * hx * (N - x) - rate * x


@register_jitable
def diffusion_value(x, hx, sigma, N):
    return sigma * hx * (N - x)


@register_jitable
def diffusion_deriv_value(x, hx, dhx, sigma, N):
    return sigma * (dhx * (N - x) - hx)


@register_jitable
def phi_value(x, hx, N):
    return hx / x * (N - x)


@register_jitable
def phi_small(x, slope, N):
    return slope * (N - x)


@register_jitable
def em_step(x, hx, dw, dt, beta, rate, sigma, N):
    return x + drift_value(x, hx, beta, rate, N) * dt + diffusion_value(x, hx, sigma, N) * dw


@register_jitable
def milstein_step(x, hx, dhx, dw, dt, beta, rate, sigma, N):
    s = diffusion_value(x, hx, sigma, N)
    ds = diffusion_deriv_value(x, hx, dhx, sigma, N)
    return x + drift_value(x, hx, beta, rate, N) * dt + s * dw + 0.5 * s * ds * (dw * dw - dt)


@register_jitable
def _drift_builtin(x, fam, kappa, alpha, beta, rate, N):
    return drift_value(x, h_value(x, fam, kappa, alpha), beta, rate, N)


@register_jitable
def rk4_step_builtin(x, dt, fam, kappa, alpha, beta, rate, N):
    k1 = _drift_builtin(x, fam, kappa, alpha, beta, rate, N)
    k2 = _drift_builtin(x + 0.5 * dt * k1, fam, kappa, alpha, beta, rate, N)
    k3 = _drift_builtin(x + 0.5 * dt * k2, fam, kappa, alpha, beta, rate, N)
    k4 = _drift_builtin(x + dt * k3, fam, kappa, alpha, beta, rate, N)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_generic(x, dt, drift):
    k1 = drift(x)
    k2 = drift(x + 0.5 * dt * k1)
    k3 = drift(x + 0.5 * dt * k2)
    k4 = drift(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def n_recorded(n_steps, record_every):
    n = n_steps // record_every + 1
    if n_steps % record_every:
        n += 1
    return n


# ---------------------------------------------------------------------------
# single SDE path with full recording

def _sde_path_py(x0, dW, n_steps, dt, dt_last, hfun, dhfun, slope, beta, rate, sigma, N,
                 milstein, lo, hi, record_every, out_x, out_m, out_c):
    x = float(x0)
    m = 0.0
    n_clamp = 0
    first_clamp = -1
    clamped_since = 0
    out_x[0] = x
    out_m[0] = 0.0
    out_c[0] = 0
    r = 1
    small = SMALL_X * N
    for k in range(1, n_steps + 1):
        h = dt if k < n_steps else dt_last
        dw = dW[k - 1]
        hx = hfun(x)
        phi = phi_value(x, hx, N) if x >= small else phi_small(x, slope, N)
        m = m + sigma * phi * dw
        if milstein:
            xn = milstein_step(x, hx, dhfun(x), dw, h, beta, rate, sigma, N)
        else:
            xn = em_step(x, hx, dw, h, beta, rate, sigma, N)
        if not math.isfinite(xn):
            return STATUS_NONFINITE, k, n_clamp, first_clamp
        if xn < lo:
            xn = lo
            n_clamp += 1
            clamped_since = 1
            if first_clamp < 0:
                first_clamp = k
        elif xn > hi:
            xn = hi
            n_clamp += 1
            clamped_since = 1
            if first_clamp < 0:
                first_clamp = k
        x = xn
        if k % record_every == 0 or k == n_steps:
            out_x[r] = x
            out_m[r] = m
            out_c[r] = clamped_since
            clamped_since = 0
            r += 1
    return STATUS_OK, 0, n_clamp, first_clamp


@njit
def _sde_path_nb(x0, dW, n_steps, dt, dt_last, fam, kappa, alpha, beta, rate, sigma, N,
                 milstein, lo, hi, record_every, out_x, out_m, out_c):
    x = x0
    m = 0.0
    n_clamp = 0
    first_clamp = -1
    clamped_since = 0
    out_x[0] = x
    out_m[0] = 0.0
    out_c[0] = 0
    r = 1
    small = SMALL_X * N
    for k in range(1, n_steps + 1):
        h = dt if k < n_steps else dt_last
        dw = dW[k - 1]
        hx = h_value(x, fam, kappa, alpha)
        if x >= small:
            phi = phi_value(x, hx, N)
        else:
            phi = phi_small(x, kappa, N)
        m = m + sigma * phi * dw
        if milstein:
            xn = milstein_step(x, hx, h_deriv(x, fam, kappa, alpha), dw, h, beta, rate, sigma, N)
        else:
            xn = em_step(x, hx, dw, h, beta, rate, sigma, N)
        if not np.isfinite(xn):
            return STATUS_NONFINITE, k, n_clamp, first_clamp
        if xn < lo:
            xn = lo
            n_clamp += 1
            clamped_since = 1
            if first_clamp < 0:
                first_clamp = k
        elif xn > hi:
            xn = hi
            n_clamp += 1
            clamped_since = 1
            if first_clamp < 0:
                first_clamp = k
        x = xn
        if k % record_every == 0 or k == n_steps:
            out_x[r] = x
            out_m[r] = m
            out_c[r] = clamped_since
            clamped_since = 0
            r += 1
    return STATUS_OK, 0, n_clamp, first_clamp


def sde_path(x0, dW, n_steps, dt, dt_last, f, beta, rate, sigma, N, milstein, lo, hi,
             record_every, backend=None):
    """Integrate one path from pre-drawn increments ``dW`` (already scaled by sqrt(step)).

    Returns ``(status, step, n_clamp, first_clamp_step, x, martingale, clamped)``.
    """
    backend = backend or BACKEND
    n_rec = n_recorded(n_steps, record_every)
    out_x = np.empty(n_rec)
    out_m = np.empty(n_rec)
    out_c = np.zeros(n_rec, dtype=np.int8)
    dW = np.ascontiguousarray(dW, dtype=float)
    if backend == "numba" and f.family is not None:
        res = _sde_path_nb(float(x0), dW, n_steps, dt, dt_last, f.family, f.kappa, f.alpha,
                           beta, rate, sigma, N, bool(milstein), lo, hi, record_every,
                           out_x, out_m, out_c)
    else:
        hfun, dhfun = scalar_callables(f)
        res = _sde_path_py(x0, dW, n_steps, dt, dt_last, hfun, dhfun, f.slope_at_zero, beta,
                           rate, sigma, N, milstein, lo, hi, record_every, out_x, out_m, out_c)
    return tuple(res) + (out_x, out_m, out_c)


def scalar_callables(f):
    if f.family is not None:
        fam, kappa, alpha = f.family, f.kappa, f.alpha
        return (lambda x: h_value(x, fam, kappa, alpha),
                lambda x: h_deriv(x, fam, kappa, alpha))
    return f.eval, f.deriv


# ---------------------------------------------------------------------------
# deterministic RK4 path

def _ode_path_py(x0, n_steps, dt, dt_last, drift, N, record_every, out_x):
    x = float(x0)
    out_x[0] = x
    r = 1
    for k in range(1, n_steps + 1):
        h = dt if k < n_steps else dt_last
        xn = rk4_step_generic(x, h, drift)
        if not (xn > 0.0 and xn < N):
            return STATUS_LEFT_DOMAIN, k
        x = xn
        if k % record_every == 0 or k == n_steps:
            out_x[r] = x
            r += 1
    return STATUS_OK, 0


@njit
def _ode_path_nb(x0, n_steps, dt, dt_last, fam, kappa, alpha, beta, rate, N, record_every, out_x):
    x = x0
    out_x[0] = x
    r = 1
    for k in range(1, n_steps + 1):
        h = dt if k < n_steps else dt_last
        xn = rk4_step_builtin(x, h, fam, kappa, alpha, beta, rate, N)
        if not (xn > 0.0 and xn < N):
            return STATUS_LEFT_DOMAIN, k
        x = xn
        if k % record_every == 0 or k == n_steps:
            out_x[r] = x
            r += 1
    return STATUS_OK, 0


def ode_path(x0, n_steps, dt, dt_last, f, beta, rate, N, record_every, backend=None):
    backend = backend or BACKEND
    out_x = np.empty(n_recorded(n_steps, record_every))
    if backend == "numba" and f.family is not None:
        status, step = _ode_path_nb(float(x0), n_steps, dt, dt_last, f.family, f.kappa, f.alpha,
                                    beta, rate, N, record_every, out_x)
    else:
        hfun, _ = scalar_callables(f)

        def drift(x):
            return drift_value(x, hfun(x), beta, rate, N)

        status, step = _ode_path_py(x0, n_steps, dt, dt_last, drift, N, record_every, out_x)
    return status, step, out_x


# ---------------------------------------------------------------------------
# streaming ensemble statistics

class BlockState:
    """Running per-trajectory statistics for one block of trajectories."""

    def __init__(self, n, x0, nbins, burn_in, level, N):
        self.x = np.full(n, float(x0))
        self.mart = np.zeros(n)
        self.n_clamp = np.zeros(n, dtype=np.int64)
        self.first_clamp = np.full(n, -1, dtype=np.int64)
        self.run_max = np.full(n, -np.inf)
        self.run_min = np.full(n, np.inf)
        self.n_cross = np.zeros(n, dtype=np.int64)
        self.last_sign = np.zeros(n, dtype=np.int64)
        self.hit_step = np.full(n, -1, dtype=np.int64)
        self.hist = np.zeros(nbins, dtype=np.int64)
        if burn_in <= 0.0:
            # the initial state is the first recorded sample
            self.run_max[:] = x0
            self.run_min[:] = x0
            self.hist[min(int(x0 / N * nbins), nbins - 1)] += n
            if level > 0.0:
                self.last_sign[:] = 1 if x0 > level else (-1 if x0 < level else 0)

    def arrays(self):
        return (self.x, self.mart, self.n_clamp, self.first_clamp, self.run_max, self.run_min,
                self.n_cross, self.last_sign, self.hit_step, self.hist)


@njit
def _ensemble_chunk_nb(x_a, mart_a, n_clamp, first_clamp, run_max, run_min, n_cross, last_sign,
                       hit_step, hist, dW, k0, n_steps, dt, dt_last, t_end, fam, kappa, alpha,
                       beta, rate, sigma, N, milstein, lo, hi, burn_in, record_every,
                       level, a, b):
    B = dW.shape[0]
    C = dW.shape[1]
    nbins = hist.shape[0]
    small = SMALL_X * N
    for i in range(B):
        x = x_a[i]
        m = mart_a[i]
        for j in range(C):
            k = k0 + j + 1
            h = dt if k < n_steps else dt_last
            dw = dW[i, j]
            hx = h_value(x, fam, kappa, alpha)
            if x >= small:
                phi = phi_value(x, hx, N)
            else:
                phi = phi_small(x, kappa, N)
            m = m + sigma * phi * dw
            if milstein:
                xn = milstein_step(x, hx, h_deriv(x, fam, kappa, alpha), dw, h, beta, rate, sigma, N)
            else:
                xn = em_step(x, hx, dw, h, beta, rate, sigma, N)
            if not np.isfinite(xn):
                x_a[i] = x
                mart_a[i] = m
                return STATUS_NONFINITE, i, k
            if xn < lo:
                xn = lo
                n_clamp[i] += 1
                if first_clamp[i] < 0:
                    first_clamp[i] = k
            elif xn > hi:
                xn = hi
                n_clamp[i] += 1
                if first_clamp[i] < 0:
                    first_clamp[i] = k
            x = xn
            if hit_step[i] < 0 and x > a and x < b:
                hit_step[i] = k
            t = k * dt if k < n_steps else t_end
            if (k % record_every == 0 or k == n_steps) and t >= burn_in:
                if x > run_max[i]:
                    run_max[i] = x
                if x < run_min[i]:
                    run_min[i] = x
                idx = int(x / N * nbins)
                if idx >= nbins:
                    idx = nbins - 1
                hist[idx] += 1
                if level > 0.0:
                    s = 1 if x > level else (-1 if x < level else 0)
                    if s != 0:
                        if last_sign[i] != 0 and s != last_sign[i]:
                            n_cross[i] += 1
                        last_sign[i] = s
        x_a[i] = x
        mart_a[i] = m
    return STATUS_OK, 0, 0


def _ensemble_chunk_np(x_a, mart_a, n_clamp, first_clamp, run_max, run_min, n_cross, last_sign,
                       hit_step, hist, dW, k0, n_steps, dt, dt_last, t_end, hfun, dhfun, slope,
                       beta, rate, sigma, N, milstein, lo, hi, burn_in, record_every,
                       level, a, b):
    C = dW.shape[1]
    nbins = hist.shape[0]
    small = SMALL_X * N
    x = x_a.copy()
    m = mart_a.copy()
    for j in range(C):
        k = k0 + j + 1
        h = dt if k < n_steps else dt_last
        dw = dW[:, j]
        hx = hfun(x)
        phi = np.where(x >= small, phi_value(x, hx, N), phi_small(x, slope, N))
        m = m + sigma * phi * dw
        if milstein:
            xn = milstein_step(x, hx, dhfun(x), dw, h, beta, rate, sigma, N)
        else:
            xn = em_step(x, hx, dw, h, beta, rate, sigma, N)
        bad = ~np.isfinite(xn)
        if bad.any():
            x_a[:] = x
            mart_a[:] = m
            return STATUS_NONFINITE, int(np.argmax(bad)), k
        low = xn < lo
        high = xn > hi
        cl = low | high
        if cl.any():
            xn = np.where(low, lo, np.where(high, hi, xn))
            n_clamp[cl] += 1
            first_clamp[cl & (first_clamp < 0)] = k
        x = xn
        hit_now = (hit_step < 0) & (x > a) & (x < b)
        hit_step[hit_now] = k
        t = k * dt if k < n_steps else t_end
        if (k % record_every == 0 or k == n_steps) and t >= burn_in:
            np.maximum(run_max, x, out=run_max)
            np.minimum(run_min, x, out=run_min)
            idx = (x / N * nbins).astype(np.int64)
            np.minimum(idx, nbins - 1, out=idx)
            hist += np.bincount(idx, minlength=nbins)
            if level > 0.0:
                s = np.where(x > level, 1, np.where(x < level, -1, 0))
                nz = s != 0
                n_cross[nz & (last_sign != 0) & (s != last_sign)] += 1
                last_sign[nz] = s[nz]
    x_a[:] = x
    mart_a[:] = m
    return STATUS_OK, 0, 0


def ensemble_chunk(state, dW, k0, n_steps, dt, dt_last, t_end, f, beta, rate, sigma, N,
                   milstein, lo, hi, burn_in, record_every, level, a, b, backend=None):
    """Advance ``state`` (a :class:`BlockState`) by ``dW.shape[1]`` steps."""
    backend = backend or BACKEND
    dW = np.ascontiguousarray(dW, dtype=float)
    if backend == "numba" and f.family is not None:
        return _ensemble_chunk_nb(*state.arrays(), dW, k0, n_steps, dt, dt_last, t_end,
                                  f.family, f.kappa, f.alpha, beta, rate, sigma, N,
                                  bool(milstein), lo, hi, burn_in, record_every, level, a, b)
    if f.family is not None:
        fam, kappa, alpha = f.family, f.kappa, f.alpha

        def hfun(x):
            return h_value(x, fam, kappa, alpha)

        def dhfun(x):
            return h_deriv(x, fam, kappa, alpha)
    else:
        hfun, dhfun = f.eval, f.deriv
    return _ensemble_chunk_np(*state.arrays(), dW, k0, n_steps, dt, dt_last, t_end, hfun, dhfun,
                              f.slope_at_zero, beta, rate, sigma, N, milstein, lo, hi, burn_in,
                              record_every, level, a, b)


def available_backends():
    return ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
