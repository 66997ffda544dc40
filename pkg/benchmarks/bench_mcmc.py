"""Timing comparison of the numba-compiled chain kernel vs its pure-Python twin.

Run:  python benchmarks/bench_mcmc.py [--iters 4000] [--family mod3]
The two paths share one source (see stlgcp._kernels) and produce
bitwise-identical chains; this script reports the speedup. The env flag
STLGCP_DISABLE_NUMBA=1 makes the package select the Python path
everywhere; here both are timed explicitly.
"""

import argparse
import time

import numpy as np

from stlgcp._kernels import NUMBA_ENABLED, chain_kernel_py, stack
from stlgcp.mcmc import ChainConfig, run_chain
from stlgcp.model import ModelSpec, build_layout
from stlgcp.simulate import SimConfig, sample_dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=4000)
    ap.add_argument("--family", default="mod3")
    ap.add_argument("--lattice", default="4x3")
    ap.add_argument("--periods", type=int, default=3)
    args = ap.parse_args()

    w, h = (int(v) for v in args.lattice.split("x"))
    sim = SimConfig(family=args.family, n_periods=args.periods, n_covariates=2,
                    beta0=0.8, beta=(0.4, -0.3), width=w, height=h, seed=5)
    data, _ = sample_dataset(sim)
    spec = ModelSpec(family=args.family)
    layout = build_layout(spec, data)
    cfg = ChainConfig(n_iter=args.iters, burn_in=args.iters // 4, seed=17)
    print(f"family={args.family} dim={layout.total_dim} cells={data.n_units * data.n_periods} "
          f"iters={args.iters} numba_available={NUMBA_ENABLED}")

    jit_kernel = stack["chain_kernel"]
    if NUMBA_ENABLED:
        run_chain(layout, spec, data, ChainConfig(n_iter=50, burn_in=10, seed=17),
                  kernel=jit_kernel)  # trigger compilation outside the timed region

    t0 = time.perf_counter()
    res_jit = run_chain(layout, spec, data, cfg, kernel=jit_kernel)
    t_jit = time.perf_counter() - t0

    t0 = time.perf_counter()
    res_py = run_chain(layout, spec, data, cfg, kernel=chain_kernel_py)
    t_py = time.perf_counter() - t0

    same = np.array_equal(res_jit.samples, res_py.samples)
    label = "numba" if NUMBA_ENABLED else "python (numba disabled)"
    print(f"{label:>24}: {t_jit:8.3f} s")
    print(f"{'pure python':>24}: {t_py:8.3f} s")
    print(f"{'speedup':>24}: {t_py / t_jit:8.1f} x")
    print(f"{'bitwise identical':>24}: {same}")
    if not same:
        raise SystemExit("kernel paths diverged")


if __name__ == "__main__":
    main()
