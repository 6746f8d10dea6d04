"""Time the numba kernels against the pure-numpy fallbacks.

Two parts:

* per-kernel timings of the compiled and numpy implementations on the same
  inputs, in this process;
* end-to-end workloads (thinning and coupling, plus a percolation sweep) run
  once in a normal subprocess and once with ``GIBBSBALLS_NO_NUMBA=1``.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 200 1000 4000] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from gibbsballs import kernels


def best_of(fn, repeat):
    fn()  # warm up (and compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_cases(n, rng):
    side = np.sqrt(n / 1.2)  # about 1.2 points per unit area
    c = rng.uniform(0, side, (n, 2))
    r = np.full(n, 0.5)
    other_c = rng.uniform(0, side, (n // 4 + 1, 2))
    other_r = np.full(len(other_c), 0.5)
    order = rng.permutation(n).astype(np.int64)
    ints = rng.integers(0, 2 ** 30, (n, 3)).astype(np.int64)
    bound = ints[0].copy()
    return {
        "component_labels": ("_labels", (c, r)),
        "touch_any": ("_touch_any", (c, r, other_c, other_r)),
        "pair_touch_count": ("_pair_count", (c, r)),
        "key_less": ("_key_less", (ints, bound)),
        "first_spanning": ("_first_spanning", (c, r, order, 0.0, float(side))),
    }


def per_kernel(sizes, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        for name, (base, args) in kernel_cases(n, rng).items():
            nb = getattr(kernels, base + "_nb")
            npy = getattr(kernels, base + "_np")
            t_nb = best_of(lambda: nb(*args), repeat)
            t_np = best_of(lambda: npy(*args), repeat)
            rows.append((name, n, t_nb, t_np))
    return rows


WORKLOAD = r"""
import json, time
import numpy as np
from gibbsballs import kernels
from gibbsballs.coupling import disagreement_sample
from gibbsballs.diagnostics import dense_shell
from gibbsballs.models import ContinuumRandomCluster
from gibbsballs.percolation import connection_sweep
from gibbsballs.poisson import RadiusLaw
from gibbsballs.space import Configuration, Window
from gibbsballs.thinning import ThinningKernel, thin_sample

Q = RadiusLaw.delta(0.1)
w = Window.cube(2, r_max=0.125)
out = {"numba": kernels.USE_NUMBA}

def timed(name, fn, warm):
    warm()
    t = time.perf_counter()
    fn()
    out[name] = time.perf_counter() - t

k = ThinningKernel(ContinuumRandomCluster(2.0), 1.0, Q, w)
rng = np.random.default_rng(1)
timed("thin_crcm_x500", lambda: [thin_sample(k, rng) for _ in range(500)],
      lambda: thin_sample(k, rng))

g = dense_shell(w, 0.1)
e = Configuration.empty(2)
m = ContinuumRandomCluster(2.0)
timed("couple_crcm_x300",
      lambda: [disagreement_sample(m, 1.0, None, Q, w, e, g, 0, i) for i in range(300)],
      lambda: disagreement_sample(m, 1.0, None, Q, w, e, g, 0, 0))

Qp = RadiusLaw.delta(0.5)
timed("percolation_sweep_x500",
      lambda: connection_sweep([0.4, 0.8], [2, 4, 6, 8], Qp, 2, 500, np.random.default_rng(2)),
      lambda: connection_sweep([0.8], [2], Qp, 2, 2, np.random.default_rng(3)))
print(json.dumps(out))
"""


def end_to_end():
    results = {}
    for label, flag in (("numba", ""), ("numpy", "1")):
        env = dict(os.environ, GIBBSBALLS_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, capture_output=True,
                             text=True, check=True)
        results[label] = json.loads(res.stdout)
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 1000, 4000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)

    if not kernels.USE_NUMBA:
        print("numba is disabled in this process; per-kernel timings compare two numpy runs")
    print(f"{'kernel':<18} {'n':>6} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, n, t_nb, t_np in per_kernel(args.sizes, args.repeat):
        print(f"{name:<18} {n:>6} {1e3 * t_nb:>10.3f} {1e3 * t_np:>10.3f} {t_np / t_nb:>8.1f}")

    if args.skip_end_to_end:
        return
    res = end_to_end()
    print()
    print(f"{'workload':<24} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    for key in res["numba"]:
        if key == "numba":
            continue
        a, b = res["numba"][key], res["numpy"][key]
        print(f"{key:<24} {a:>9.3f} {b:>9.3f} {b / a:>8.2f}")


if __name__ == "__main__":
    main()
