"""Wall-clock comparison of the round kernels.

    python benchmarks/bench_kernels.py --rounds 20000 --repeat 3

Runs the same simulation through the compiled kernel, the numpy kernel and the
generic per-round ``step`` path, checks that they agree, and prints the best
time of each plus the speed-up over numpy.
"""
import argparse
import time

import numpy as np

from dppgd import kernels
from dppgd.core import simulate
from dppgd.graph import augment, build_weights, chorded_ring_graph, pick_epsilon
from dppgd.problems import nesterov_nonsmooth
from dppgd.projection import ConstraintSet
from dppgd.schedules import SmoothingSchedule, StepSchedule


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--rounds", type=int, default=20_000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--dims", type=int, nargs="+", default=[1, 2, 10])
    p.add_argument("--step-rounds", type=int, default=2_000, help="rounds for the slow per-round path")
    args = p.parse_args(argv)

    base = build_weights(chorded_ring_graph())
    w = augment(base, pick_epsilon(base))
    backends = (["compiled"] if kernels.HAVE_COMPILED else []) + ["python", "step"]
    if not kernels.HAVE_COMPILED:
        print("compiled kernel not built; timing numpy and step only")

    print(f"{'n':>3} {'backend':>9} {'rounds':>8} {'seconds':>9} {'us/round':>9} {'vs numpy':>9}")
    for n in args.dims:
        prob = nesterov_nonsmooth(n, 10, seed=1)
        cset = ConstraintSet.box(-10, 10, n=n)
        per_round, results = {}, {}
        for b in backends:
            rounds = args.step_rounds if b == "step" else args.rounds
            t, res = best_time(lambda: simulate(prob, w, cset, StepSchedule(), SmoothingSchedule(), rounds,
                                                backend=b), args.repeat)
            per_round[b] = t / rounds
            results[b] = (rounds, t, res)
        for b in backends:
            rounds, t, _ = results[b]
            print(f"{n:>3} {b:>9} {rounds:>8} {t:>9.3f} {1e6 * per_round[b]:>9.2f} "
                  f"{per_round['python'] / per_round[b]:>8.1f}x")
        # same rounds, same seed: the kernels must agree up to rounding, which the
        # 1/beta2 factor in the estimator amplifies slowly over long runs
        if "compiled" in results:
            a, b = results["compiled"][2].rows, results["python"][2].rows
            scale = np.nanmax(np.abs(b), axis=0)
            worst = np.nanmax(np.abs(a - b) / np.where(scale > 0, scale, 1.0))
            print(f"    compiled vs numpy: largest difference {worst:.1e} of column scale")
            assert worst < 1e-6, "compiled and numpy kernels disagree"


if __name__ == "__main__":
    main()
