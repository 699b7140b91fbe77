"""Benchmark the compiled inner loop against the numpy fallback.

Times multi-step exact runs of each algorithm on seeded games and reports
steps/second plus the speedup. Run as:

    python benchmarks/bench_kernels.py [--n 10] [--steps 200000]
"""

import argparse
import time

import numpy as np

from nashgame import GameSpec, random_preference_matrix, random_ref_logits
from nashgame._kernel import _slow

try:
    from nashgame._kernel import _fast
except ImportError:
    _fast = None

ALG_NAMES = ("extragradient", "omd", "online_ipo2", "nash_md", "nash_md_pg")


def time_backend(run_exact, game, alg, eta, steps):
    logits = game.ref_logits.copy()
    start = time.perf_counter()
    run_exact(alg, game.matrix.entries, game.ref_logits, game.beta, eta, 0.125, logits, steps)
    elapsed = time.perf_counter() - start
    return elapsed, logits


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=10, help="number of responses")
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--beta", type=float, default=0.01)
    parser.add_argument("--eta", type=float, default=0.2)
    args = parser.parse_args()

    game = GameSpec(
        matrix=random_preference_matrix(0, args.n),
        ref_logits=random_ref_logits(1000, args.n),
        beta=args.beta,
    )
    print(f"n={args.n} beta={args.beta} eta={args.eta} steps={args.steps}")
    print(f"{'algorithm':<14} {'numpy steps/s':>14} {'compiled steps/s':>17} {'speedup':>8}")
    for alg, name in enumerate(ALG_NAMES):
        slow_t, slow_out = time_backend(_slow.run_exact, game, alg, args.eta, args.steps)
        line = f"{name:<14} {args.steps / slow_t:>14.0f}"
        if _fast is not None:
            fast_t, fast_out = time_backend(_fast.run_exact, game, alg, args.eta, args.steps)
            drift = np.abs(slow_out - fast_out).max()
            line += f" {args.steps / fast_t:>17.0f} {slow_t / fast_t:>7.1f}x"
            assert drift < 1e-8, f"{name}: backend drift {drift:.2e}"
        else:
            line += f" {'(not built)':>17} {'-':>8}"
        print(line)


if __name__ == "__main__":
    main()
