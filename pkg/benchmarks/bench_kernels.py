"""Time the numba and numpy kernel backends on batches of random tetrahedra.

Usage: python benchmarks/bench_kernels.py [--tets N] [--repeat K]
"""

import argparse
import timeit

import numpy as np

from ballpack import kernels
from ballpack.flow import FlowConfig, run
from ballpack.triangulation import generate_16cell


def bench(fn, repeat):
    fn()  # warm-up, includes compilation for numba
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    return best


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tets", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    r4 = np.exp(rng.uniform(np.log(0.5), np.log(2.0), size=(args.tets, 4)))
    t16 = generate_16cell()
    r0 = np.exp(rng.uniform(np.log(0.5), np.log(2.0), size=t16.num_vertices))

    rows = []
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        _, _, _, _, vol = kernels.tet_batch(r4)
        rows.append((backend,
                     bench(lambda: kernels.tet_batch(r4), args.repeat),
                     bench(lambda: kernels.angle_jacobian(r4, vol), args.repeat),
                     bench(lambda: run(t16, r0, FlowConfig()), max(1, args.repeat // 2))))
    print(f"{args.tets} tetrahedra, best of {args.repeat}")
    print(f"{'backend':<8} {'tet_batch':>12} {'jacobian':>12} {'16-cell flow':>14}")
    for name, a, b, c in rows:
        print(f"{name:<8} {a * 1e3:>10.2f}ms {b * 1e3:>10.2f}ms {c * 1e3:>12.1f}ms")
    if len(rows) == 2:
        (_, a0, b0, c0), (_, a1, b1, c1) = rows
        print(f"numpy/numba speedup: tet_batch {a1 / a0:.1f}x, jacobian {b1 / b0:.1f}x, flow {c1 / c0:.1f}x")


if __name__ == "__main__":
    main()
