"""Fixed-step integration of the deterministic and stochastic SIS equations.

SDE steps are clamped into ``[eps N, (1 - eps) N]`` and every clamp is
counted.  Brownian increments come from a counter-based Philox stream keyed by
``(seed, stream_index)``, so a trajectory is reproducible on its own no matter
which worker computes it or in what order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .errors import BlowupError, ConfigError, InstabilityError

DEFAULT_DT = 0.05
DEFAULT_CLAMP_EPS = 1e-12


class Scheme(str, Enum):
    RK4 = "RK4"
    EULER_MARUYAMA = "EULER_MARUYAMA"
    MILSTEIN = "MILSTEIN"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"rk4": cls.RK4, "ode": cls.RK4, "em": cls.EULER_MARUYAMA,
                   "euler_maruyama": cls.EULER_MARUYAMA, "euler-maruyama": cls.EULER_MARUYAMA,
                   "milstein": cls.MILSTEIN}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ConfigError(f"unknown scheme {value!r}; expected rk4, euler_maruyama or milstein")


@dataclass(frozen=True)
class SimConfig:
    x0: float
    t_end: float
    dt: float = DEFAULT_DT
    scheme: Scheme = Scheme.EULER_MARUYAMA
    seed: int = 0
    clamp_eps: float = DEFAULT_CLAMP_EPS
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not (self.dt > 0 and self.t_end > 0 and math.isfinite(self.t_end)):
            raise ConfigError("dt and t_end must be positive")
        if not self.dt < self.t_end:
            raise ConfigError(f"dt ({self.dt}) must be smaller than t_end ({self.t_end})")
        if not 0 <= self.clamp_eps < 0.5:
            raise ConfigError("clamp_eps must lie in [0, 0.5)")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigError("record_every must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def check_against(self, N):
        lo, hi = self.clamp_eps * N, (1 - self.clamp_eps) * N
        if not lo < self.x0 < hi:
            raise ConfigError(f"x0 = {self.x0} must lie in ({lo}, {hi})")

    def steps(self):
        """Number of steps and the length of the last one."""
        ratio = self.t_end / self.dt
        n = round(ratio)
        if abs(n - ratio) <= 1e-9 * ratio:
            return int(n), self.dt
        n = math.floor(ratio)
        last = self.t_end - n * self.dt
        return n + 1, last

    def to_dict(self):
        d = asdict(self)
        d["scheme"] = self.scheme.value
        return d


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    martingale_values: np.ndarray
    clamped: np.ndarray
    scheme: Scheme
    clamp_count: int = 0
    first_clamp_time: Optional[float] = None
    seed: Optional[int] = None
    stream: Optional[int] = None
    t_end: float = field(default=math.nan)

    @property
    def clamp_events(self):
        return {"count": self.clamp_count, "first_time": self.first_clamp_time}

    def to_csv(self, path):
        write_trajectory_csv(self, path)


def time_grid(n_steps, dt, t_end, record_every):
    k = np.arange(0, n_steps + 1, record_every)
    if k[-1] != n_steps:
        k = np.append(k, n_steps)
    t = k * dt
    t[-1] = t_end if k[-1] == n_steps else t[-1]
    return t, k


def brownian_stream(seed, stream=0):
    """Philox generator keyed by ``(seed, stream)``."""
    key = np.array([int(seed), int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def brownian_increments(seed, stream, n_steps, dt, dt_last):
    z = brownian_stream(seed, stream).standard_normal(n_steps)
    return increments_from_normals(z, dt, dt_last, n_steps)


def increments_from_normals(z, dt, dt_last, n_steps, k0=0):
    """Scale standard normals for steps ``k0+1 .. k0+len`` by the step's square root."""
    dW = math.sqrt(dt) * z
    if k0 + z.shape[-1] == n_steps and dt_last != dt:
        dW[..., -1] = math.sqrt(dt_last) * z[..., -1]
    return dW


def integrate_increments(p, f, x0, dt, dW, scheme=Scheme.EULER_MARUYAMA,
                         clamp_eps=DEFAULT_CLAMP_EPS, record_every=1, dt_last=None, backend=None):
    """Integrate the SDE from caller-supplied increments.

    Used for coupling coarse and fine paths on one Brownian realisation.
    Returns a :class:`Trajectory` without seed information.
    """
    scheme = Scheme.parse(scheme)
    dW = np.asarray(dW, dtype=float)
    n = dW.shape[0]
    dt_last = dt if dt_last is None else dt_last
    t_end = (n - 1) * dt + dt_last
    lo, hi = clamp_eps * p.N, (1.0 - clamp_eps) * p.N
    status, step, n_clamp, first, xs, ms, cs = kernels.sde_path(
        x0, dW, n, dt, dt_last, f, p.beta, p.rate, p.sigma, p.N,
        scheme is Scheme.MILSTEIN, lo, hi, record_every, backend=backend)
    if status != kernels.STATUS_OK:
        raise BlowupError(f"non-finite state at step {step}", step=step)
    times, _ = time_grid(n, dt, t_end, record_every)
    first_t = None if first < 0 else (first * dt if first < n else t_end)
    return Trajectory(times, xs, ms, cs, scheme, int(n_clamp), first_t, t_end=t_end)


def simulate_sde(p, f, cfg, stream=0, backend=None):
    """Euler-Maruyama or Milstein path with Brownian stream ``(cfg.seed, stream)``."""
    if cfg.scheme is Scheme.RK4:
        raise ConfigError("simulate_sde needs EULER_MARUYAMA or MILSTEIN; use simulate_ode for RK4")
    cfg.check_against(p.N)
    n, dt_last = cfg.steps()
    dW = brownian_increments(cfg.seed, stream, n, cfg.dt, dt_last)
    tr = integrate_increments(p, f, cfg.x0, cfg.dt, dW, cfg.scheme, cfg.clamp_eps,
                              cfg.record_every, dt_last, backend=backend)
    tr.seed = int(cfg.seed)
    tr.stream = int(stream)
    return tr


def simulate_ode(p, f, cfg, backend=None):
    """Classical RK4 on the drift.

    The deterministic flow keeps (0, N) invariant, so no clamping is applied;
    a step that lands outside (0, N) raises :class:`InstabilityError`.
    """
    if cfg.scheme is not Scheme.RK4:
        raise ConfigError("simulate_ode requires scheme RK4")
    cfg.check_against(p.N)
    n, dt_last = cfg.steps()
    status, step, xs = kernels.ode_path(cfg.x0, n, cfg.dt, dt_last, f, p.beta, p.rate, p.N,
                                       cfg.record_every, backend=backend)
    if status != kernels.STATUS_OK:
        raise InstabilityError(f"RK4 step {step} left (0, N); reduce dt (currently {cfg.dt})")
    times, _ = time_grid(n, cfg.dt, cfg.t_end, cfg.record_every)
    return Trajectory(times, xs, np.zeros_like(xs), np.zeros(len(xs), dtype=np.int8), Scheme.RK4,
                      0, None, t_end=cfg.t_end)


def martingale_average(tr):
    """``M(T) / T`` where ``M(t) = int_0^t sigma phi(x) dB``."""
    if tr.scheme is Scheme.RK4:
        raise ConfigError("martingale average is undefined for a deterministic trajectory")
    return float(tr.martingale_values[-1] / tr.times[-1])


def martingale_batch_stderr(tr, n_batches=None):
    """Batch-means standard error of ``M(T) / T``.

    ``M(T)/T`` is the mean of the per-batch rates ``(M(t_{j+1}) - M(t_j)) / (T/n)``;
    martingale increments are uncorrelated, so the batches are too.  The
    default uses one batch per unit of time.  Few batches make the ratio
    ``M(T)/T / stderr`` t-distributed with visibly heavier tails.
    """
    if tr.scheme is Scheme.RK4:
        raise ConfigError("martingale statistics are undefined for a deterministic trajectory")
    T = tr.times[-1]
    if n_batches is None:
        n_batches = max(2, int(T))
    if not 2 <= n_batches < len(tr.times):
        raise ConfigError(f"n_batches must lie in [2, {len(tr.times) - 1}]")
    edges = np.searchsorted(tr.times, np.linspace(0.0, T, n_batches + 1) - 1e-9 * T)
    edges[-1] = len(tr.times) - 1
    m = tr.martingale_values[edges]
    rates = np.diff(m) / np.diff(tr.times[edges])
    return float(rates.std(ddof=1) / math.sqrt(n_batches))


# ---------------------------------------------------------------------------
# export

CSV_HEADER = ("t", "x", "martingale", "clamped")


def _g17(v):
    return format(float(v), ".17g")


def write_trajectory_csv(tr, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, x, m, c in zip(tr.times, tr.values, tr.martingale_values, tr.clamped):
            w.writerow((_g17(t), _g17(x), _g17(m), int(c)))
    return path


def read_trajectory_csv(path):
    """Return ``(times, values, martingale, clamped)`` arrays."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=float, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2], data[:, 3].astype(np.int8)


def write_trajectory_npz(tr, path):
    np.savez(path, t=tr.times, x=tr.values, martingale=tr.martingale_values, clamped=tr.clamped)


def read_trajectory_npz(path):
    with np.load(path) as z:
        return z["t"], z["x"], z["martingale"], z["clamped"]
