"""Compare the compiled and pure-numpy Monte Carlo kernels.

    python3 benchmarks/bench_mc.py [--trajectories T] [--horizon K] [--repeat R]

Both backends must produce bit-identical paths; the script checks this
before timing.
"""

import argparse
import time

import numpy as np

from tdmjls import JumpLinearSystem, MarkovChain, mc
from tdmjls.tdmodel import PolicyEvalProblem, build_td0


def cases():
    chain = MarkovChain(np.array([[0.9, 0.1], [0.1, 0.9]]), np.array([1.0, 0.0]))
    running = JumpLinearSystem(chain, np.array([[[-1.0]], [[-2.0]]]), np.array([[1.0], [-1.0]]), 0.1)
    P_s = np.array([[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.5, 0.3, 0.2]])
    Phi = np.array([[1.0, 0.0], [0.5, 1.0], [0.0, 1.0]])
    mdp = build_td0(PolicyEvalProblem(P_s, np.array([1.0, -0.5, 2.0]), 0.8, Phi), 0.1).sys
    tab = build_td0(PolicyEvalProblem(P_s, np.array([1.0, -0.5, 2.0]), 0.8, np.eye(3)), 0.1).sys
    return [("n=2 d=1", running), ("n=9 d=2", mdp), ("n=9 d=3", tab)]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=mc.CHUNK)
    ap.add_argument("--horizon", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = mc.available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the python backend is available")
    print(f"T={args.trajectories} K={args.horizon} best of {args.repeat}")
    print(f"{'case':<10}" + "".join(f"{b + ' (s)':>14}" for b in backends) + f"{'speedup':>10}")
    for name, sys in cases():
        xi0 = np.ones(sys.d)
        cfgs = {b: mc.MCConfig(args.trajectories, args.horizon, 7, backend=b) for b in backends}
        outs = {b: mc.simulate_paths(sys, xi0, c) for b, c in cfgs.items()}
        if len(outs) == 2:
            same = all(np.array_equal(x, y) for x, y in zip(outs["cython"], outs["python"]))
            if not same:
                raise SystemExit(f"{name}: backends disagree")
        t = {b: best_of(lambda c=c: mc.simulate_paths(sys, xi0, c), args.repeat) for b, c in cfgs.items()}
        speed = f"{t['python'] / t['cython']:9.1f}x" if len(t) == 2 else ""
        print(f"{name:<10}" + "".join(f"{t[b]:14.3f}" for b in backends) + speed)


if __name__ == "__main__":
    main()
