"""Command-line interface: ``onell {run,sweep,trace,verify,gen}``.

Exit status is 2 for usage errors, 1 for invalid configuration or input, 0
otherwise.  Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .analysis import check_well_behaved, recommended_cap, write_report_csv
from .core import BitString, RandomSource, derive_seed
from .harness import (
    AlgorithmSpec,
    ConfigError,
    ExperimentConfig,
    emit_lambda_trace_data,
    load_config,
    run_cell,
    sweep,
)
from .kernel import kernel
from .problems import (
    InstanceFormatError,
    format_instance,
    random_planted_instance,
    read_instance,
    write_instance,
)

log = logging.getLogger("onell")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0,
                        help="base seed (default 0)")
    parser.add_argument("--out", default=default, help="output directory (file for gen)")
    parser.add_argument("--budget", type=int, default=default, help="evaluation budget per run")


def _algorithm(args) -> AlgorithmSpec:
    if args.algo == "opo":
        return AlgorithmSpec("opo")
    if args.algo == "fixed":
        return AlgorithmSpec.parse(f"fixed:{args.lam if args.lam is not None else 1}")
    return AlgorithmSpec.parse(f"adaptive:{args.cap}")


def _single_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        problem=args.problem, sizes=[args.n], algorithms=[_algorithm(args)], runs=1,
        base_seed=args.seed, F=args.F, clause_factor=args.clause_factor, clause_log=args.clause_log,
        budget=args.budget, trace=getattr(args, "trace_run", False), timing=True,
    )


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algo", choices=("opo", "fixed", "adaptive"), default="adaptive")
    p.add_argument("--problem", choices=("onemax", "planted3cnf"), default="onemax")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lam", type=int, default=None, help="population size for --algo fixed")
    p.add_argument("--cap", default="n", help="lambda cap for --algo adaptive: n, 2ln or a number")
    p.add_argument("--F", type=float, default=1.5, help="update strength")
    p.add_argument("--clause-factor", type=float, default=4.0)
    p.add_argument("--clause-log", choices=("ln", "log2"), default="ln")
    p.add_argument("--run-index", type=int, default=0)


def cmd_run(args) -> int:
    config = _single_config(args)
    rec = run_cell(config, config.algorithms[0], args.n, args.run_index)
    line = {
        "algo": rec.algo, "n": rec.n, "m": rec.m, "seed": rec.seed, "success": rec.success,
        "evaluations": rec.evaluations, "iterations": rec.iterations,
        "final_fitness": rec.final_fitness, "max_lambda": rec.max_lambda,
        "wall_ms": round(rec.wall_ms, 3),
    }
    print(json.dumps(line))
    return 0


def cmd_trace(args) -> int:
    args.trace_run = True
    config = _single_config(args)
    rec = run_cell(config, config.algorithms[0], args.n, args.run_index)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trace.csv"
    emit_lambda_trace_data(rec.trace or [], args.n, path)
    log.info("wrote %s (%d iterations, success=%s)", path, rec.iterations, rec.success)
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.seed is not None and args.seed_given:
        config.base_seed = args.seed
    if args.budget is not None:
        config.budget = args.budget
    if args.workers is not None:
        config.workers = args.workers
    result = sweep(config, args.out)
    for path in result.files.values():
        log.info("wrote %s", path)
    return 0


def cmd_gen(args) -> int:
    m = args.m if args.m is not None else int(math.floor(4 * args.n * math.log(args.n)))
    instance = random_planted_instance(args.n, m, args.seed)
    if args.out is None:
        sys.stdout.write(format_instance(instance))
        return 0
    out = Path(args.out)
    if out.is_dir():
        out = out / f"planted_n{args.n}_m{m}_s{args.seed}.cnf"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_instance(instance, out)
    log.info("wrote %s", out)
    return 0


def cmd_verify(args) -> int:
    if args.instance:
        instance = read_instance(args.instance)
    else:
        if args.n is None:
            raise ConfigError("verify needs --instance or --n")
        m = args.m if args.m is not None else int(math.floor(4 * args.n * math.log(args.n)))
        instance = random_planted_instance(args.n, m, derive_seed(args.seed, "instance"))
    n = instance.n
    cap = args.cap if args.cap is not None else recommended_cap(n, max(instance.m, n))
    rng = RandomSource(derive_seed(args.seed, "verify"))
    points: list[BitString] = []
    if args.x:
        x = BitString(args.x)
        if len(x) != n:
            raise ConfigError(f"--x has length {len(x)}, instance has n={n}")
        points.append(x)
    else:
        d = args.d if args.d is not None else max(1, n // 4)
        if not 1 <= d < n:
            raise ConfigError(f"--d must lie in [1, {n - 1}]")
        for _ in range(args.points):
            points.append(instance.planted.flipped(rng.sample_distinct(n, d)))
    reports = [
        check_well_behaved(instance, x, cap, cap=args.enum_cap, samples=args.samples, rng=rng,
                           force_sampling=args.sampled)
        for x in points
    ]
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.csv"
    write_report_csv(reports, path)
    passed = sum(r.well_behaved for r in reports)
    log.info("wrote %s: %d/%d points well-behaved (cap=%d)", path, passed, len(reports), cap)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onell", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run, prints one JSON record")
    _global_flags(p, suppress=True)
    _add_run_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="single traced run, writes trace.csv")
    _global_flags(p, suppress=True)
    _add_run_options(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("sweep", help="run an experiment config, writes runs/summary/plotdata CSVs")
    _global_flags(p, suppress=True)
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="well-behavedness report, writes report.csv")
    _global_flags(p, suppress=True)
    p.add_argument("--instance", help="DIMACS file written by gen")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--x", help="search point as a 0/1 string")
    p.add_argument("--d", type=int, help="distance of random points from the planted assignment")
    p.add_argument("--points", type=int, default=1)
    p.add_argument("--cap", type=int, help="lambda cap (default: recommended_cap)")
    p.add_argument("--enum-cap", type=int, default=100_000)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--sampled", action="store_true", help="force sampling mode")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a planted 3-CNF instance")
    _global_flags(p, suppress=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    log.debug("kernel: %s", kernel.NAME)
    try:
        return args.func(args)
    except (ConfigError, InstanceFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
