"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import timeit

import numpy as np

from growdp import _kernels
from growdp._kernels import python_kernels


def cases(size: int, runs: int):
    g = np.random.default_rng(0)
    y = g.dirichlet(np.ones(size))
    r = g.random(size)
    u = g.random(size)
    q = 64
    times = np.repeat(np.arange(100, 100 + q // 4), 4).astype(np.int64)
    values = g.random(q)
    xi = 5.0 * np.sqrt(times)
    u_t, u_q = g.random((runs, q)), g.random((runs, q))
    return {
        "laplace_from_uniform": lambda k: k.laplace_from_uniform(u, 1.0),
        "mw_update": lambda k: k.mw_update(y, r, 0.1),
        "uniform_update": lambda k: k.uniform_update(y, 100, 101),
        "relative_entropy": lambda k: k.relative_entropy(y, np.roll(y, 1)),
        "atg_halt_batch": lambda k: k.atg_halt_batch(values, times, 0.5, xi, u_t, u_q),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 4096],
                        help="universe sizes for the vector kernels")
    parser.add_argument("--runs", type=int, default=20_000, help="independent runs for the batch kernel")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels.BACKEND != "cython":
        print("compiled kernels are not built; only the numpy fallback is available")
    print(f"{'kernel':<22}{'size':>6}{'numpy (us)':>12}{'compiled (us)':>15}{'speedup':>9}")
    for size in args.sizes:
        for name, call in cases(size, args.runs).items():
            if name == "atg_halt_batch" and size != args.sizes[0]:
                continue
            label = args.runs if name == "atg_halt_batch" else size
            number = 20 if name == "atg_halt_batch" else 2000
            py = min(timeit.repeat(lambda: call(python_kernels), number=number, repeat=args.repeat)) / number
            cy = min(timeit.repeat(lambda: call(_kernels), number=number, repeat=args.repeat)) / number
            print(f"{name:<22}{label:>6}{py * 1e6:>12.1f}{cy * 1e6:>15.1f}{py / cy:>9.2f}")


if __name__ == "__main__":
    main()
