"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are called directly, so the environment flag does not
matter here. The first numba call (compilation or cache load) is excluded.
"""

import argparse
import time

import numpy as np

from causal_ic import _kernels
from causal_ic.engine import make_rng
from causal_ic.generators import random_chain, random_dag_model
from causal_ic.model import compile_model


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    yield "joint chain n=10", "joint", random_chain(rng, 10)
    yield "joint dag n=12 m=6", "joint", random_dag_model(rng, 12, 6)
    yield "live-edge dag n=5 m=2", "live_edge", random_dag_model(rng, 5, 2, density=0.6)
    yield "propagate dag n=12 m=6", "propagate", random_dag_model(rng, 12, 6)


def arguments(kind, model):
    c = compile_model(model)
    if kind == "joint":
        return (c.indptr, c.parents, c.one_minus_p, c.one_minus_q, c.r)
    if kind == "live_edge":
        return (c.n, c.r, c.uv_src, c.uv_dst, c.uv_q, c.vv_src, c.vv_dst, c.vv_p, np.int64(0))
    rows = 1 << 16
    rng = make_rng(0)
    hidden = rng.random((rows, c.m)) < c.r[None, :]
    uv_live = rng.random((rows, len(c.uv_q))) < c.uv_q[None, :]
    vv_live = rng.random((rows, len(c.vv_p))) < c.vv_p[None, :]
    seeds = np.zeros(0, dtype=np.int64)
    return (c.n, hidden, uv_live, vv_live, c.uv_src, c.uv_dst, c.vv_src, c.vv_dst, seeds)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed")

    print(f"{'case':<26} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for label, kind, model in cases():
        call_args = arguments(kind, model)
        fast = getattr(_kernels, f"{kind}_numba")
        slow = getattr(_kernels, f"{kind}_numpy")
        diff = float(np.max(np.abs(fast(*call_args) - slow(*call_args))))
        t_np = best_of(lambda: slow(*call_args), args.repeat)
        t_nb = best_of(lambda: fast(*call_args), args.repeat)
        print(
            f"{label:<26} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} {t_np / t_nb:>7.1f}x {diff:>10.1e}"
        )


if __name__ == "__main__":
    main()
