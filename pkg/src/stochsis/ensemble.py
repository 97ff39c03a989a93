"""Monte Carlo ensembles of SDE paths with streaming statistics.

Trajectory ``i`` always draws from the Brownian stream ``(master_seed, i)``.
Trajectories are processed in blocks by a thread pool (the compiled kernels
release the GIL).  Each block writes into pre-allocated per-index slots and
histogram counts are integers, so the summary does not depend on the number
of workers or on block completion order.
"""
from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import analysis, kernels
from .errors import (BlowupError, CensoringWarning, ConfigError, DomainError, RegimeError,
                     RegimeWarning)
from .sim import Scheme, SimConfig, brownian_stream, increments_from_normals

CHUNK_STEPS = 4096


@dataclass(frozen=True)
class EnsembleConfig:
    sim: SimConfig
    n_trajectories: int
    master_seed: int = 0
    burn_in: float = 0.0
    histogram_bins: int = 100
    extinction_threshold: float = 1e-6
    crossing_level: Optional[float] = None
    hit_interval: Optional[tuple] = None

    def __post_init__(self):
        if self.sim.scheme is Scheme.RK4:
            raise ConfigError("ensembles integrate the SDE; scheme must not be RK4")
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be a positive integer")
        if not 0 <= self.burn_in < self.sim.t_end:
            raise ConfigError(f"burn_in must lie in [0, t_end), got {self.burn_in}")
        if int(self.histogram_bins) != self.histogram_bins or self.histogram_bins < 10:
            raise ConfigError("histogram_bins must be an integer >= 10")
        if not 0 < self.extinction_threshold < 1:
            raise ConfigError("extinction_threshold is a fraction of N in (0, 1)")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.hit_interval is not None:
            a, b = self.hit_interval
            if not a < b:
                raise ConfigError("hit_interval needs a < b")

    def to_dict(self):
        return {
            "sim": self.sim.to_dict(), "n_trajectories": int(self.n_trajectories),
            "master_seed": int(self.master_seed), "burn_in": self.burn_in,
            "histogram_bins": int(self.histogram_bins),
            "extinction_threshold": self.extinction_threshold,
            "crossing_level": self.crossing_level,
            "hit_interval": None if self.hit_interval is None else list(self.hit_interval),
        }


@dataclass
class Histogram:
    edges: np.ndarray
    masses: np.ndarray
    sample_count: int

    @classmethod
    def from_counts(cls, counts, N):
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        if total <= 0:
            raise ConfigError("histogram has no samples")
        edges = np.linspace(0.0, N, len(counts) + 1)
        return cls(edges, counts / total, total)

    def mode(self):
        i = int(np.argmax(self.masses))
        return 0.5 * (self.edges[i] + self.edges[i + 1])

    def to_dict(self):
        return {"edges": self.edges.tolist(), "masses": self.masses.tolist(),
                "sample_count": self.sample_count}

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("bin_left,bin_right,mass\n")
            for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.masses):
                fh.write(f"{lo:.17g},{hi:.17g},{m:.17g}\n")


@dataclass
class EnsembleSummary:
    config: EnsembleConfig
    terminal: np.ndarray
    extinction_fraction: float
    crossing_level: Optional[float]
    crossing_counts: np.ndarray
    post_burn_in_max: np.ndarray
    post_burn_in_min: np.ndarray
    clamp_counts: np.ndarray
    first_clamp_times: list
    martingale_final: np.ndarray
    histogram: Histogram
    hitting_times: Optional[list] = None
    metrics: dict = field(default_factory=dict)

    @property
    def censored_fraction(self):
        if self.hitting_times is None:
            return None
        return sum(t is None for t in self.hitting_times) / len(self.hitting_times)

    def to_dict(self):
        """Deterministic content only; timing metrics are kept out."""
        return {
            "config": self.config.to_dict(),
            "n_trajectories": len(self.terminal),
            "terminal": self.terminal.tolist(),
            "extinction_fraction": self.extinction_fraction,
            "crossing_level": self.crossing_level,
            "crossing_counts": self.crossing_counts.tolist(),
            "post_burn_in_max": self.post_burn_in_max.tolist(),
            "post_burn_in_min": self.post_burn_in_min.tolist(),
            "clamp_counts": self.clamp_counts.tolist(),
            "first_clamp_times": self.first_clamp_times,
            "martingale_final": self.martingale_final.tolist(),
            "histogram": self.histogram.to_dict(),
            "hitting_times": self.hitting_times,
            "censored_fraction": self.censored_fraction,
        }


def default_workers():
    return os.cpu_count() or 1


def _default_block(backend):
    return 32 if backend == "numba" else 1024


def _resolve_level(p, f, cfg):
    if cfg.crossing_level is not None:
        return float(cfg.crossing_level)
    try:
        return analysis.solve_xi(p, f)
    except RegimeError:
        return None


def run_ensemble(p, f, cfg, workers=None, backend=None, block_size=None):
    backend = backend or kernels.BACKEND
    if backend == "numba" and not kernels.HAVE_NUMBA:
        backend = "numpy"
    sim = cfg.sim
    sim.check_against(p.N)
    n_steps, dt_last = sim.steps()
    lo, hi = sim.clamp_eps * p.N, (1.0 - sim.clamp_eps) * p.N
    level = _resolve_level(p, f, cfg)
    a, b = cfg.hit_interval if cfg.hit_interval is not None else (-1.0, -1.0)
    if cfg.hit_interval is not None and a < sim.x0 < b:
        raise DomainError("x0 already inside the hitting interval")
    n = int(cfg.n_trajectories)
    bs = block_size or _default_block(backend)
    blocks = [(s, min(s + bs, n)) for s in range(0, n, bs)]

    terminal = np.empty(n)
    mart = np.empty(n)
    n_clamp = np.empty(n, dtype=np.int64)
    first_clamp = np.empty(n, dtype=np.int64)
    run_max = np.empty(n)
    run_min = np.empty(n)
    n_cross = np.empty(n, dtype=np.int64)
    hit_step = np.empty(n, dtype=np.int64)
    hists = [None] * len(blocks)
    milstein = sim.scheme is Scheme.MILSTEIN

    def run_block(bi):
        s, e = blocks[bi]
        st = kernels.BlockState(e - s, sim.x0, cfg.histogram_bins, cfg.burn_in,
                                level or 0.0, p.N)
        gens = [brownian_stream(cfg.master_seed, i) for i in range(s, e)]
        z = np.empty((e - s, min(CHUNK_STEPS, n_steps)))
        for k0 in range(0, n_steps, CHUNK_STEPS):
            c = min(CHUNK_STEPS, n_steps - k0)
            zc = z[:, :c]
            for j, g in enumerate(gens):
                g.standard_normal(out=zc[j])
            dW = increments_from_normals(zc, sim.dt, dt_last, n_steps, k0)
            status, bad, step = kernels.ensemble_chunk(
                st, dW, k0, n_steps, sim.dt, dt_last, sim.t_end, f, p.beta, p.rate, p.sigma,
                p.N, milstein, lo, hi, cfg.burn_in, sim.record_every, level or 0.0, a, b,
                backend=backend)
            if status != kernels.STATUS_OK:
                raise BlowupError(f"trajectory {s + bad}: non-finite state at step {step}",
                                  step=step, trajectory=s + bad)
        terminal[s:e] = st.x
        mart[s:e] = st.mart
        n_clamp[s:e] = st.n_clamp
        first_clamp[s:e] = st.first_clamp
        run_max[s:e] = st.run_max
        run_min[s:e] = st.run_min
        n_cross[s:e] = st.n_cross
        hit_step[s:e] = st.hit_step
        hists[bi] = st.hist

    t0 = time.perf_counter()
    workers = workers or default_workers()
    if workers == 1 or len(blocks) == 1:
        for bi in range(len(blocks)):
            run_block(bi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_block, range(len(blocks))))
    wall = time.perf_counter() - t0

    counts = np.zeros(cfg.histogram_bins, dtype=np.int64)
    for h in hists:
        counts += h

    def step_time(k):
        return None if k < 0 else (k * sim.dt if k < n_steps else sim.t_end)

    hitting = None
    if cfg.hit_interval is not None:
        hitting = [step_time(int(k)) for k in hit_step]
    thr = cfg.extinction_threshold * p.N
    return EnsembleSummary(
        config=cfg, terminal=terminal,
        extinction_fraction=float(np.count_nonzero(terminal < thr)) / n,
        crossing_level=level, crossing_counts=n_cross,
        post_burn_in_max=run_max, post_burn_in_min=run_min,
        clamp_counts=n_clamp, first_clamp_times=[step_time(int(k)) for k in first_clamp],
        martingale_final=mart, histogram=Histogram.from_counts(counts, p.N),
        hitting_times=hitting,
        metrics={"wall_time_s": wall, "steps_per_second": n * n_steps / wall if wall > 0 else None,
                 "workers": workers, "backend": backend, "block_size": bs},
    )


def crossing_count(tr, level, t_min=0.0):
    """Sign changes of ``x(t) - level`` over recorded times ``t >= t_min``."""
    x = tr.values[tr.times >= t_min]
    s = np.sign(x - level)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def empirical_stationary(p, f, cfg, workers=None, backend=None):
    """Pooled post-burn-in histogram over all trajectories."""
    if cfg.burn_in <= 0:
        raise ConfigError("empirical_stationary needs burn_in > 0")
    if analysis.classify_regime(p, f).verdict is not analysis.Verdict.PERSISTENCE_UNIQUE_STATIONARY:
        warnings.warn("parameters are outside the proven unique-stationary regime", RegimeWarning)
    return run_ensemble(p, f, cfg, workers=workers, backend=backend).histogram


def ks_distance(h1, h2):
    if h1.edges.shape != h2.edges.shape or not np.array_equal(h1.edges, h2.edges):
        raise ConfigError("histograms must share bin edges")
    return float(np.max(np.abs(np.cumsum(h1.masses) - np.cumsum(h2.masses))))


@dataclass
class HittingTimeEstimate:
    mean: float
    stderr: float
    n_hit: int
    censored_fraction: float
    bound: float
    within_bound: bool
    interval: tuple
    x0: float

    def to_dict(self):
        return dict(self.__dict__, interval=list(self.interval))


def mean_hitting_time(p, f, cfg, a, b, workers=None, backend=None):
    """Mean first entry time into (a, b), compared against the analytic bound."""
    x0 = cfg.sim.x0
    if a < x0 < b:
        raise DomainError("x0 already inside target interval (a, b)")
    bound = analysis.hitting_time_bound(p, f, a, b, x0)
    summ = run_ensemble(p, f, replace(cfg, hit_interval=(a, b)), workers=workers, backend=backend)
    times = np.array([t for t in summ.hitting_times if t is not None])
    censored = summ.censored_fraction
    if censored > 0:
        warnings.warn(f"{censored:.2%} of trajectories never entered ({a}, {b}) before t_end; "
                      "mean is over uncensored samples", CensoringWarning)
    if len(times) == 0:
        mean = se = math.nan
    else:
        mean = float(times.mean())
        se = float(times.std(ddof=1) / math.sqrt(len(times))) if len(times) > 1 else math.nan
    ok = bool(mean <= bound + 3 * (se if math.isfinite(se) else 0.0))
    return HittingTimeEstimate(mean, se, len(times), censored, bound, ok, (a, b), x0)


@dataclass
class ProbeReport:
    xi: float
    fraction_max_above: float
    fraction_min_below: float
    post_burn_in_max: np.ndarray
    post_burn_in_min: np.ndarray

    def to_dict(self):
        return {"xi": self.xi, "fraction_max_above": self.fraction_max_above,
                "fraction_min_below": self.fraction_min_below,
                "post_burn_in_max": self.post_burn_in_max.tolist(),
                "post_burn_in_min": self.post_burn_in_min.tolist()}


def limsup_liminf_probe(p, f, cfg, xi, workers=None, backend=None):
    """Finite-horizon proxy for ``limsup x >= xi`` and ``liminf x <= xi``."""
    if cfg.burn_in <= 0:
        raise ConfigError("limsup_liminf_probe needs burn_in > 0")
    summ = run_ensemble(p, f, cfg, workers=workers, backend=backend)
    return ProbeReport(xi, float(np.mean(summ.post_burn_in_max >= xi)),
                       float(np.mean(summ.post_burn_in_min <= xi)),
                       summ.post_burn_in_max, summ.post_burn_in_min)
