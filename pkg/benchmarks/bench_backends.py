"""Time the numba kernels against the pure-numpy fallback on a Task I workload.

Usage: python3 benchmarks/bench_backends.py [--P 200] [--repeat 3]
"""

import argparse
import time

import numpy as np

from nnld import _kernels_numba as nb
from nnld import _kernels_numpy as npk
from nnld.data import gen_latency, grid_length
from nnld.kernel import KernelParams, build_table
from nnld.neuron import NeuronParams, init_connections


def best_time(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--P", type=int, default=200)
    ap.add_argument("--d", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    ds = gen_latency(args.P, args.d, 400.0, seed=0)
    table = build_table(KernelParams.from_tau(15.0))
    G = grid_length(ds.T, table.params.tau, table.dt)
    spk = ds.spike_grid(table.dt)
    params = NeuronParams()
    slots = init_connections(args.d, params, seed=1).slots
    w = np.random.default_rng(2).normal(size=args.d)
    x_thr, x_sat = params.x_thr, params.x_sat

    def swaps(mod):
        V = mod.membrane(spk, slots, table.values, G, x_thr, x_sat)
        for i in range(20):
            mod.swap_update(V, spk, slots[i % slots.shape[0]].copy(), i % slots.shape[1], (7 * i) % args.d,
                            table.values, x_thr, x_sat)

    cases = {
        "membrane": lambda mod: mod.membrane(spk, slots, table.values, G, x_thr, x_sat),
        "membrane + 20 swap_update": swaps,
        "linear_vmax": lambda mod: mod.linear_vmax(spk, w, table.values, G),
    }
    print(f"workload: P={args.P} d={args.d} m={params.m} k={params.k} grid={G}")
    print(f"{'kernel':<28}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, fn in cases.items():
        fn(nb)  # compile
        t_nb = best_time(lambda: fn(nb), args.repeat)
        t_np = best_time(lambda: fn(npk), args.repeat)
        print(f"{name:<28}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
