"""Compare the numba kernels with the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--paths 256] [--t-end 500] [--repeat 3]

Both backends must agree bit for bit; the script checks that before timing.
"""
import argparse
import json
import time

import numpy as np

from stochsis import EnsembleConfig, ModelParams, SimConfig, make_h1, run_ensemble, simulate_sde
from stochsis import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=256)
    ap.add_argument("--t-end", type=float, default=500.0)
    ap.add_argument("--path-t-end", type=float, default=2000.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is unavailable (or disabled via STOCHSIS_DISABLE_JIT)")

    p = ModelParams(8e-4, 0.1, 1e-4, 1e-3, 1000.0)
    f = make_h1()
    ens = EnsembleConfig(SimConfig(x0=1.0, t_end=args.t_end, dt=0.05), args.paths, burn_in=args.t_end / 10)
    one = SimConfig(x0=1.0, t_end=args.path_t_end, dt=0.05, scheme="milstein")

    # warm-up compiles (or loads cached) numba code and checks parity
    a = run_ensemble(p, f, ens, workers=1, backend="numba").to_dict()
    b = run_ensemble(p, f, ens, workers=1, backend="numpy").to_dict()
    assert a == b, "ensemble backends disagree"
    assert np.array_equal(simulate_sde(p, f, one, backend="numba").values,
                          simulate_sde(p, f, one, backend="numpy").values), "path backends disagree"

    steps_ens = args.paths * ens.sim.steps()[0]
    steps_path = one.steps()[0]
    rows = []
    for backend in ("numba", "numpy"):
        t_ens, _ = best_of(lambda: run_ensemble(p, f, ens, workers=1, backend=backend), args.repeat)
        t_path, _ = best_of(lambda: simulate_sde(p, f, one, backend=backend), args.repeat)
        rows.append({"backend": backend, "ensemble_s": t_ens, "ensemble_steps_per_s": steps_ens / t_ens,
                     "path_s": t_path, "path_steps_per_s": steps_path / t_path})
    nb, npy = rows
    print(f"{'backend':8} {'ensemble s':>11} {'Msteps/s':>9} {'path s':>9} {'Msteps/s':>9}")
    for r in rows:
        print(f"{r['backend']:8} {r['ensemble_s']:11.3f} {r['ensemble_steps_per_s'] / 1e6:9.2f} "
              f"{r['path_s']:9.3f} {r['path_steps_per_s'] / 1e6:9.2f}")
    print(f"speed-up: ensemble {npy['ensemble_s'] / nb['ensemble_s']:.1f}x, "
          f"single path {npy['path_s'] / nb['path_s']:.1f}x")
    print(json.dumps({"paths": args.paths, "t_end": args.t_end, "results": rows}))


if __name__ == "__main__":
    main()
