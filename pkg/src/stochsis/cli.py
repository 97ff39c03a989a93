"""Command-line front end.

    stochsis <classify|xi|lyapunov|simulate|ensemble|stationary> --config run.toml
             [--output DIR] [--workers N] [--seed S] [--format csv|json|both] [--svg]

Exit codes: 0 success, 2 config error, 3 regime error, 4 numerical error.
Every output directory receives ``resolved_config.toml``; rerunning with it
reproduces the same files byte for byte (``metrics.json`` holds wall-clock
timings and is the only exception).
"""
from __future__ import annotations

import argparse
import enum
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, model, svg
from .config import load_config
from .ensemble import EnsembleConfig, default_workers, run_ensemble
from .errors import (ConfigError, NumericalError, ParameterDomainError, RegimeError,
                     StochSISError)
from .sim import Scheme, SimConfig, simulate_ode, simulate_sde, write_trajectory_csv

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_NUMERICAL = 0, 2, 3, 4
COMMANDS = ("classify", "xi", "lyapunov", "simulate", "ensemble", "stationary")


def _clean(obj):
    """Make ``obj`` JSON-serialisable; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2)
        fh.write("\n")


class Run:
    def __init__(self, cfg, out, workers, svg_plots):
        self.cfg = cfg
        self.out = Path(out)
        self.workers = workers
        self.svg = svg_plots
        self.p = cfg.params
        self.f = cfg.incidence_function()
        self.s = cfg.settings

    @property
    def csv(self):
        return "csv" in self.cfg.formats

    @property
    def json(self):
        return "json" in self.cfg.formats

    def report(self, name, payload):
        write_json(self.out / name, {"config": self.cfg.resolved(), **payload})

    def sim_config(self, seed=0):
        s = self.s
        return SimConfig(x0=s["x0"], t_end=s["t_end"], dt=s["dt"], scheme=s["scheme"],
                         seed=seed, clamp_eps=s["clamp_eps"], record_every=s["record_every"])

    def ensemble_config(self):
        s = self.s
        hit = None if s["hit_a"] is None else (s["hit_a"], s["hit_b"])
        return EnsembleConfig(self.sim_config(), s["n_trajectories"], s["master_seed"],
                              s["burn_in"], s["histogram_bins"], s["extinction_threshold"],
                              s["crossing_level"], hit)


def cmd_classify(run):
    rep = analysis.classify_regime(run.p, run.f, run.s["n_grid"])
    run.report("classify.json", {"report": rep.to_dict()})
    return rep.to_dict()


def cmd_xi(run):
    roots = analysis.require_persistence(run.p, run.f, run.s["n_grid"])
    xi = analysis.solve_xi(run.p, run.f, _checked=True)
    m = analysis.find_mode_m(run.p, run.f, xi)
    payload = {"xi": xi, "m": m, "roots": roots.to_dict(),
               "lyapunov_at_m": model.lyapunov_ln_direct(run.p, run.f, m),
               "lyapunov_at_zero": model.lyapunov_ln_at_zero(run.p, run.f)}
    run.report("xi.json", payload)
    return payload


def cmd_lyapunov(run):
    p, f = run.p, run.f
    x = analysis.interior_grid(p.N, run.s["n_grid"])
    direct = model.lyapunov_ln_direct(p, f, x)
    try:
        factored = model.lyapunov_ln_factored(p, f, x)
    except RegimeError:
        factored = np.full_like(x, np.nan)
    marks = {}
    try:
        marks["xi"] = analysis.solve_xi(p, f)
        marks["m"] = analysis.find_mode_m(p, f, marks["xi"])
    except RegimeError:
        pass
    if run.csv:
        with open(run.out / "lyapunov.csv", "w") as fh:
            fh.write("x,L_direct,L_factored\n")
            for a, b, c in zip(x, direct, factored):
                fc = "" if not math.isfinite(c) else f"{c:.17g}"
                fh.write(f"{a:.17g},{b:.17g},{fc}\n")
    if run.json:
        run.report("lyapunov.json", {"x": x, "L_direct": direct, "L_factored": factored, **marks})
    if run.svg:
        svg.line_plot(run.out / "lyapunov.svg", [("L ln x", x, direct)],
                      title="Generator applied to ln x", xlabel="x", ylabel="L ln x",
                      hlines=[("0", 0.0)])
    return {"n_grid": len(x), **marks}


def cmd_simulate(run):
    s = run.s
    trs = []
    summary = {"paths": []}
    if Scheme.parse(s["scheme"]) is not Scheme.RK4:
        for i in range(s["n_paths"]):
            tr = simulate_sde(run.p, run.f, run.sim_config(s["seed"]), stream=i)
            trs.append((f"trajectory_{i:03d}", tr))
            summary["paths"].append({
                "stream": i, "terminal": tr.values[-1], "clamp_count": tr.clamp_count,
                "first_clamp_time": tr.first_clamp_time,
                "martingale_average": tr.martingale_values[-1] / tr.times[-1]})
    if s["ode"] or Scheme.parse(s["scheme"]) is Scheme.RK4:
        cfg = SimConfig(x0=s["x0"], t_end=s["t_end"], dt=s["dt"], scheme=Scheme.RK4,
                        record_every=s["record_every"])
        tr = simulate_ode(run.p, run.f, cfg)
        trs.append(("trajectory_ode", tr))
        summary["ode_terminal"] = tr.values[-1]
    if run.csv:
        for name, tr in trs:
            write_trajectory_csv(tr, run.out / f"{name}.csv")
    if run.json:
        run.report("simulate.json", summary)
    if run.svg:
        svg.line_plot(run.out / "trajectories.svg", [(n, t.times, t.values) for n, t in trs],
                      title="Infected density", xlabel="t", ylabel="x(t)")
    return summary


def _ensemble_payload(run, summ):
    d = summ.to_dict()
    level = summ.crossing_level
    if level is not None:
        d["fraction_max_above_level"] = float(np.mean(summ.post_burn_in_max >= level))
        d["fraction_min_below_level"] = float(np.mean(summ.post_burn_in_min <= level))
    if summ.hitting_times is not None:
        ts = np.array([t for t in summ.hitting_times if t is not None])
        d["hitting_mean"] = float(ts.mean()) if len(ts) else None
        d["hitting_stderr"] = float(ts.std(ddof=1) / math.sqrt(len(ts))) if len(ts) > 1 else None
        a, b = summ.config.hit_interval
        try:
            d["hitting_bound"] = analysis.hitting_time_bound(run.p, run.f, a, b, run.s["x0"])
        except (RegimeError, ValueError) as exc:
            d["hitting_bound"] = None
            d["hitting_bound_note"] = str(exc)
    return d


def _save_paths(run, ecfg):
    k = min(run.s["save_trajectories"], ecfg.n_trajectories)
    if k and run.csv:
        sub = run.out / "trajectories"
        sub.mkdir(exist_ok=True)
        for i in range(k):
            tr = simulate_sde(run.p, run.f, run.sim_config(ecfg.master_seed), stream=i)
            write_trajectory_csv(tr, sub / f"trajectory_{i:03d}.csv")


def cmd_ensemble(run):
    ecfg = run.ensemble_config()
    summ = run_ensemble(run.p, run.f, ecfg, workers=run.workers)
    payload = _ensemble_payload(run, summ)
    if run.json:
        run.report("summary.json", payload)
    if run.csv:
        summ.histogram.to_csv(run.out / "histogram.csv")
    write_json(run.out / "metrics.json", summ.metrics)
    _save_paths(run, ecfg)
    return {"extinction_fraction": summ.extinction_fraction, **summ.metrics}


def cmd_stationary(run):
    ecfg = run.ensemble_config()
    if ecfg.burn_in <= 0:
        raise ConfigError("stationary.burn_in must be positive")
    rep = analysis.classify_regime(run.p, run.f)
    summ = run_ensemble(run.p, run.f, ecfg, workers=run.workers)
    h = summ.histogram
    if run.csv:
        h.to_csv(run.out / "histogram.csv")
    payload = {"histogram": h.to_dict(), "mode": h.mode(), "xi": rep.xi,
               "verdict": rep.verdict.value}
    if run.json:
        run.report("stationary.json", payload)
    write_json(run.out / "metrics.json", summ.metrics)
    if run.svg:
        centers = 0.5 * (h.edges[:-1] + h.edges[1:])
        svg.line_plot(run.out / "stationary.svg", [("mass", centers, h.masses)],
                      title="Empirical stationary distribution", xlabel="x", ylabel="mass")
    return {"mode": h.mode(), "xi": rep.xi, "sample_count": h.sample_count}


HANDLERS = {"classify": cmd_classify, "xi": cmd_xi, "lyapunov": cmd_lyapunov,
            "simulate": cmd_simulate, "ensemble": cmd_ensemble, "stationary": cmd_stationary}


def build_parser():
    ap = argparse.ArgumentParser(prog="stochsis",
                                 description="Stochastic SIS model with non-linear incidence")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--output", help="output directory (overrides [output] dir)")
    ap.add_argument("--workers", type=int, default=None,
                    help="cap on ensemble worker threads (default: available cores)")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the config seed / master_seed")
    ap.add_argument("--format", choices=("csv", "json", "both"), default=None)
    ap.add_argument("--svg", action="store_true", help="also write simple SVG plots")
    return ap


def _fail(out, code, exc):
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    details = getattr(exc, "details", None)
    if details:
        err["error"]["details"] = details
    print(json.dumps(_clean(err)))
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", err)
        except OSError:
            pass
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = Path(args.output) if args.output else None
    try:
        cfg = load_config(args.config, experiment=args.command)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            key = "seed" if "seed" in cfg.settings else "master_seed"
            if key in cfg.settings:
                cfg.settings[key] = args.seed
        if args.format:
            cfg.formats = ["csv", "json"] if args.format == "both" else [args.format]
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = out or Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.toml").write_text(cfg.to_toml())
        run = Run(cfg, out, args.workers or default_workers(), args.svg)
        result = HANDLERS[args.command](run)
    except (ConfigError, ParameterDomainError, OSError) as exc:
        return _fail(out, EXIT_CONFIG, exc)
    except RegimeError as exc:
        return _fail(out, EXIT_REGIME, exc)
    except NumericalError as exc:
        return _fail(out, EXIT_NUMERICAL, exc)
    except StochSISError as exc:
        return _fail(out, EXIT_NUMERICAL, exc)
    print(json.dumps(_clean({"command": args.command, "output": str(out), "result": result})))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
