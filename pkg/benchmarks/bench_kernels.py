"""Time the compiled and pure-Python cascade kernels on the same inputs.

    python benchmarks/bench_kernels.py --n 500 --rollouts 1000 --repeat 3

Both backends draw identical coins, so the script also checks that their
outputs agree before reporting timings.
"""

import argparse
import time

import numpy as np

from fairim import kernels
from fairim.datasets import SbmParams, generate_sbm
from fairim.diffusion import _weights, rollout_sub_seeds


def _best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--p", type=float, default=0.03)
    ap.add_argument("--budget", type=int, default=40)
    ap.add_argument("--rollouts", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    g = generate_sbm(SbmParams(n=args.n), args.seed)
    ip, ix, ei = g.csr
    seeds = np.arange(args.budget, dtype=np.int64)
    sub = rollout_sub_seeds(args.seed, args.rollouts)
    w = _weights(g, g.attribute_names)

    cases = {
        "cascade_sums": lambda: kernels.cascade_sums(ip, ix, ei, seeds, args.p, sub, w),
        "live_edge_components": lambda: kernels.live_edge_components(ip, ix, ei, args.p, sub),
    }
    backends = kernels.available_backends()
    print(f"graph n={g.n} m={g.m}, rollouts={args.rollouts}, backends={backends}")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        times, outs = {}, {}
        for b in backends:
            with kernels.use_backend(b):
                times[b], outs[b] = _best_of(fn, args.repeat)
        ref = outs[backends[0]]
        for b in backends[1:]:
            pairs = zip(ref, outs[b]) if isinstance(ref, tuple) else [(ref, outs[b])]
            if not all(np.array_equal(x, y) for x, y in pairs):
                raise SystemExit(f"{name}: backends disagree")
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{name:<22}" + "".join(f"{times[b]:>11.4f}s" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
