"""Peak traced memory of a solve at sizes where a dense iterate cannot exist.

    python scripts/memory_probe.py --size 200000 --steps 100
"""

import argparse
import time

from lowrank_spgd.memtrack import max_rss_bytes, space_budget_bytes, track_allocations
from lowrank_spgd.problems import FactoredLeastSquares
from lowrank_spgd.solver import SolverConfig, StepSchedule, spgd_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, nargs="+", default=[10_000, 50_000, 200_000])
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--rank-budget", type=int, default=50)
    args = ap.parse_args()

    for n in args.size:
        p = FactoredLeastSquares.random(n, n, 2, sigma=[0.5, 0.25], seed=1, k=args.k)
        cfg = SolverConfig(0.1, StepSchedule.inverse_mu_t(1.0, args.steps), rank_budget=args.rank_budget,
                           trace_every=args.steps)
        start = time.perf_counter()
        with track_allocations() as mem:
            res = spgd_solve(p, cfg)
        wall = time.perf_counter() - start
        budget = space_budget_bytes(n, n, args.rank_budget, args.k)
        print(f"m=n={n:>8d}  peak={mem.peak_bytes / 2**20:8.1f} MiB  budget={budget / 2**20:8.0f} MiB  "
              f"dense={8 * n * n / 2**30:8.1f} GiB  rss={max_rss_bytes() / 2**20:.0f} MiB  "
              f"rank={res.final.rank}  time={wall:.1f}s")


if __name__ == "__main__":
    main()
