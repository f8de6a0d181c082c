"""Command-line front end.

Subcommands::

    zibandit run --config FILE --out DIR [--seed N]
    zibandit bounds --mu F --sigma2 F --p F --delta F --n-grid SPEC --out FILE
    zibandit coverage --suite light|heavy|all [--trials N] [--seed N] [--out FILE]
    zibandit oracle --check size-proxy [--n-inputs N] [--seed N] [--out FILE]

Exit codes: 0 success, 1 failed check, 2 usage or config error.
"""

import argparse
import csv
import os
import sys

import numpy as np

from .concentration import grid_size_proxy, naive_size_proxy
from .config import ConfigError, load_config_file
from .harness import bound_comparison, coverage_suite, parse_grid, run_experiment

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _g(x):
    return format(float(x), ".17g")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="zibandit", description="Zero-inflated bandit experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override master_seed")

    bounds = sub.add_parser("bounds", help="compare upper confidence bounds on one stream")
    bounds.add_argument("--mu", type=float, required=True)
    bounds.add_argument("--sigma2", type=float, required=True)
    bounds.add_argument("--p", type=float, required=True)
    bounds.add_argument("--delta", type=float, required=True)
    bounds.add_argument("--n-grid", required=True, help="lo:hi:log|lin:count")
    bounds.add_argument("--n-mc", type=int, default=10_000)
    bounds.add_argument("--seed", type=int, default=0)
    bounds.add_argument("--out", required=True)

    cov = sub.add_parser("coverage", help="Monte-Carlo coverage of the confidence bounds")
    cov.add_argument("--suite", choices=("light", "heavy", "all"), default="all")
    cov.add_argument("--trials", type=int, default=10_000)
    cov.add_argument("--seed", type=int, default=0)
    cov.add_argument("--out", default=None)

    orc = sub.add_parser("oracle", help="check solvers against brute-force oracles")
    orc.add_argument("--check", choices=("size-proxy",), required=True)
    orc.add_argument("--n-inputs", type=int, default=100)
    orc.add_argument("--tol", type=float, default=1e-4)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--out", default=None)
    return parser


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_run(args):
    try:
        loaded = load_config_file(args.config, seed_override=args.seed)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run_experiment(loaded.experiment)
    try:
        os.makedirs(args.out, exist_ok=True)
        _write_rows(
            os.path.join(args.out, "trace.csv"),
            ["policy", "replication", "round", "cumulative_regret"],
            (
                [tr.policy, tr.replication, int(rnd), _g(val)]
                for tr in result.traces
                for rnd, val in zip(tr.rounds, tr.cumulative_regret)
            ),
        )
        _write_rows(
            os.path.join(args.out, "aggregate.csv"),
            ["policy", "round", "mean_regret", "std_regret", "n_reps"],
            ([lab, rnd, _g(m), _g(s), n] for lab, rnd, m, s, n in result.aggregate),
        )
        with open(os.path.join(args.out, "manifest.txt"), "w", encoding="utf-8") as fh:
            fh.write(loaded.manifest())
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for label, _ in loaded.experiment.policies:
        print(f"{label}: final mean regret {result.final_mean(label):.4f}")
    return EXIT_OK


def cmd_bounds(args):
    try:
        grid = parse_grid(args.n_grid)
        rows = bound_comparison(args.mu, args.sigma2, args.p, args.delta, grid,
                                n_mc=args.n_mc, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _write_rows(args.out, ["n", "method", "value"], ([n, m, _g(v)] for n, m, v in rows))
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_coverage(args):
    rows = coverage_suite(args.suite, trials=args.trials, seed=args.seed)
    print(f"{'bound':<16}{'n':>6}{'delta':>8}{'trials':>8}{'rate':>10}{'tol':>10}  status")
    for row in rows:
        print(f"{row.bound:<16}{row.n:>6}{row.delta:>8.3g}{row.trials:>8}"
              f"{row.rate:>10.4f}{row.tolerance if row.trials else float('nan'):>10.4f}  {row.status}")
    if args.out:
        _write_rows(
            args.out,
            ["bound", "n", "delta", "trials", "violations", "rate", "status"],
            ([r.bound, r.n, _g(r.delta), r.trials, r.violations, _g(r.rate), r.status] for r in rows),
        )
    return EXIT_FAIL if any(r.status == "fail" for r in rows) else EXIT_OK


def size_proxy_check(n_inputs=100, seed=0):
    """Rows ``(mu_hat, p_hat, sigma2, solver, grid, rel_gap)`` on random inputs."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n_inputs):
        mu = float(rng.uniform(-10.0, 10.0))
        p = float(rng.uniform(0.05, 1.0))
        s2 = float(rng.uniform(0.1, 5.0))
        solved = naive_size_proxy(mu, p, s2)
        grid = grid_size_proxy(mu, p, s2, num=100_000)
        rows.append((mu, p, s2, solved, grid, abs(solved - grid) / abs(grid)))
    return rows


def cmd_oracle(args):
    rows = size_proxy_check(args.n_inputs, args.seed)
    worst = max(r[-1] for r in rows)
    ok = worst <= args.tol
    print(f"size-proxy: {len(rows)} inputs, max relative gap {worst:.3e} "
          f"(tol {args.tol:g}) {'pass' if ok else 'fail'}")
    if args.out:
        _write_rows(args.out, ["mu_hat", "p_hat", "sigma2", "solver", "grid", "rel_gap"],
                    ([_g(v) for v in r] for r in rows))
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"run": cmd_run, "bounds": cmd_bounds, "coverage": cmd_coverage, "oracle": cmd_oracle}


def main(argv=None):
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
