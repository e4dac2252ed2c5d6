"""Command-line front end.

    lowrank-spgd solve CONFIG [--seed S ...] [--out-dir DIR] [--trace-every N]
    lowrank-spgd check {prox-oracle,isotropy,kkt,incsvd-reconstruction} [options]

Exit codes: 0 success / all checks pass, 1 usage or config error (or a failed
check), 2 numerical abort.
"""

from __future__ import annotations

import argparse
import sys

from . import checks
from .config import ConfigError, load_config
from .experiment import run_experiment
from .factored import DenseSizeError
from .incsvd import CoreSizeError
from .solver import NoConvergence, NumericalAbort

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="lowrank-spgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="run the solves described by a YAML config")
    solve.add_argument("config")
    solve.add_argument("--seed", type=int, action="append", help="override sweep seeds (repeatable)")
    solve.add_argument("--out-dir")
    solve.add_argument("--trace-every", type=int)

    check = sub.add_parser("check", help="run a verification suite")
    check.add_argument("name", choices=sorted(checks.CHECKS))
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--trials", type=int, default=100)
    check.add_argument("--dist", default="rademacher")
    check.add_argument("--n", type=int, default=8)
    check.add_argument("--k", type=int, default=8)
    check.add_argument("--samples", type=int, default=100_000)
    check.add_argument("--active", dest="active", action="store_true", default=True)
    check.add_argument("--inactive", dest="active", action="store_false")
    check.add_argument("--chains", type=int, default=100)
    check.add_argument("--length", type=int, default=50)
    check.add_argument("--out-dir", help=argparse.SUPPRESS)
    check.add_argument("--trace-every", type=int, help=argparse.SUPPRESS)
    return parser


def _run_check(args):
    if args.name == "prox-oracle":
        return checks.prox_oracle(trials=args.trials, seed=args.seed)
    if args.name == "isotropy":
        return checks.isotropy(args.dist, n=args.n, k=args.k, samples=args.samples, seed=args.seed)
    if args.name == "kkt":
        return checks.kkt(active=args.active, trials=args.trials, seed=args.seed)
    return checks.incsvd_reconstruction(chains=args.chains, length=args.length, seed=args.seed)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "check":
        try:
            results = _run_check(args)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for res in results:
            print(res.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_USAGE

    if args.trace_every is not None and args.trace_every < 1:
        print("error: --trace-every must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        summary = run_experiment(cfg, out_dir=args.out_dir, seeds=args.seed, trace_every=args.trace_every)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalAbort, CoreSizeError, NoConvergence, DenseSizeError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    runs = summary["results"]["runs"]
    for run in runs:
        extra = f" dist={run['final_dist_to_ref']:.6g}" if "final_dist_to_ref" in run else ""
        print(f"seed={run['seed']} lambda={run['lambda']:g} T={run['T']} objective={run['final_objective']:.10g} "
              f"rank={run['final_rank']}{extra} time={run['wall_time_s']:.2f}s")
    for fit in summary["results"].get("rate_fits", []):
        print(f"rate fit lambda={fit['lambda']:g}: " + ", ".join(
            f"{k}={v:.3f}" for k, v in fit.items() if k.startswith("slope_") and v is not None))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
