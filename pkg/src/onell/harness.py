"""Experiment orchestration: sweeps over algorithms and sizes, summaries, CSV output.

Every run is a pure function of ``(base_seed, algorithm id, n, run_index)``.
All algorithms in a cell share the instance of a given ``run_index``, so the
comparisons are paired.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from .algorithms import RunRecord, TraceRecord, run_adaptive, run_fixed, run_opo_ea
from .core import RandomSource, derive_seed
from .problems import OneMax, PlantedInstance, random_planted_instance

log = logging.getLogger(__name__)

RUNS_HEADER = ("algo", "n", "m", "seed", "success", "evaluations", "iterations", "max_lambda", "wall_ms")
SUMMARY_HEADER = ("algo", "n", "m", "runs", "censored", "median_evals", "iqr_evals",
                  "median_max_lambda", "iqr_max_lambda")
PLOT_HEADER = ("algo", "n", "median_evals_over_n")
TRACE_HEADER = ("iteration", "evaluations", "d", "lambda", "sqrt_n_over_d")
MAXLAMBDA_HEADER = ("log2_n", "n", "median", "iqr")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlgorithmSpec:
    """One optimizer configuration, written ``opo``, ``fixed:<λ>`` or ``adaptive:<cap>``.

    ``cap`` is ``n``, ``2ln`` (meaning ``2 ln(n+1)``) or a number.
    """

    engine: str
    lam: float = 1.0
    cap: str = "n"

    @property
    def id(self) -> str:
        if self.engine == "opo":
            return "opo"
        if self.engine == "fixed":
            return f"fixed-{_fmt_num(self.lam)}"
        return f"adaptive-{self.cap}"

    def cap_value(self, n: int) -> float:
        return cap_value(self.cap, n)

    @classmethod
    def parse(cls, token: str) -> "AlgorithmSpec":
        token = token.strip()
        name, _, arg = token.partition(":")
        name = name.strip().lower()
        if name in ("opo", "ea", "1+1"):
            return cls("opo")
        if name == "fixed":
            try:
                lam = float(arg)
            except ValueError:
                raise ConfigError(f"fixed algorithm needs an integer lambda: {token!r}") from None
            if lam < 1 or lam != int(lam):
                raise ConfigError(f"fixed lambda must be a positive integer: {token!r}")
            return cls("fixed", lam=lam)
        if name == "adaptive":
            cap = arg.strip() or "n"
            cap_value(cap, 16)  # validates
            return cls("adaptive", cap=cap)
        raise ConfigError(f"unknown algorithm {token!r}")


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def cap_value(cap: str, n: int) -> float:
    if cap == "n":
        return float(n)
    if cap == "2ln":
        return 2.0 * math.log(n + 1)
    try:
        value = float(cap)
    except ValueError:
        raise ConfigError(f"lambda cap must be 'n', '2ln' or a number, got {cap!r}") from None
    if value < 1:
        raise ConfigError(f"lambda cap must be >= 1, got {cap!r}")
    return value


@dataclass
class ExperimentConfig:
    problem: str = "onemax"
    sizes: list[int] = field(default_factory=lambda: [1024])
    algorithms: list[AlgorithmSpec] = field(default_factory=lambda: [AlgorithmSpec("opo")])
    runs: int = 10
    base_seed: int = 0
    F: float = 1.5
    initial_lambda: float = 1.0
    clause_factor: float = 4.0
    clause_log: str = "ln"
    budget_factor: float = 1e4
    budget: int | None = None
    trace: bool = False
    trace_every: int = 1
    workers: int = 1
    timing: bool = False
    out: str = "results"

    def __post_init__(self):
        if self.problem not in ("onemax", "planted3cnf"):
            raise ConfigError(f"problem must be onemax or planted3cnf, got {self.problem!r}")
        if not self.sizes or any(n < (3 if self.problem == "planted3cnf" else 1) for n in self.sizes):
            raise ConfigError(f"invalid sizes {self.sizes}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if not 1.0 < self.F < 2.0:
            raise ConfigError(f"F must lie in (1, 2), got {self.F}")
        if self.clause_log not in ("ln", "log2"):
            raise ConfigError(f"clause_log must be ln or log2, got {self.clause_log!r}")
        if self.trace_every < 1 or self.workers < 1:
            raise ConfigError("trace_every and workers must be >= 1")
        ids = [a.id for a in self.algorithms]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate algorithms in {ids}")

    def clause_count(self, n: int) -> int:
        if self.problem != "planted3cnf":
            return 0
        logn = math.log(n) if self.clause_log == "ln" else math.log2(n)
        return int(math.floor(self.clause_factor * n * logn))

    def budget_for(self, n: int) -> int:
        if self.budget is not None:
            return int(self.budget)
        return int(math.ceil(self.budget_factor * n * math.log(n + 2)))

    def cells(self) -> list[tuple[AlgorithmSpec, int]]:
        return [(a, n) for a in self.algorithms for n in self.sizes]


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _parse_size(tok: str) -> int:
    tok = tok.strip()
    m = re.fullmatch(r"(\d+)\s*\^\s*(\d+)", tok)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    return int(tok)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat ``key = value`` format; ``#`` starts a comment."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        try:
            if key == "problem":
                values["problem"] = value.lower()
            elif key == "sizes":
                values["sizes"] = [_parse_size(t) for t in value.split(",") if t.strip()]
            elif key == "algorithms":
                values["algorithms"] = [AlgorithmSpec.parse(t) for t in value.split(",") if t.strip()]
            elif key in ("runs", "trace_every", "workers", "budget"):
                values[key] = int(float(value))
            elif key == "base_seed":
                values[key] = int(value, 0)
            elif key in ("f", "initial_lambda", "clause_factor", "budget_factor"):
                values["F" if key == "f" else key] = float(value)
            elif key in ("trace", "timing"):
                if value.lower() not in _BOOL:
                    raise ConfigError(f"not a boolean: {value!r}")
                values[key] = _BOOL[value.lower()]
            elif key in ("clause_log", "out"):
                values[key] = value
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
    return ExperimentConfig(**values)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def instance_seed(base_seed: int, n: int, run_index: int) -> int:
    return derive_seed(base_seed, "instance", n, run_index)


def run_seed(base_seed: int, algo_id: str, n: int, run_index: int) -> int:
    return derive_seed(base_seed, algo_id, n, run_index)


@lru_cache(maxsize=4)
def _cached_instance(n: int, m: int, seed: int) -> PlantedInstance:
    return random_planted_instance(n, m, seed)


def build_problem(config: ExperimentConfig, n: int, run_index: int):
    if config.problem == "onemax":
        return OneMax(n)
    m = config.clause_count(n)
    return _cached_instance(n, m, instance_seed(config.base_seed, n, run_index)).problem


def run_cell(config: ExperimentConfig, algorithm: AlgorithmSpec, n: int, run_index: int,
             trace_dir: str | os.PathLike | None = None) -> RunRecord:
    """One run of ``algorithm`` at size ``n``; deterministic in its arguments."""
    problem = build_problem(config, n, run_index)
    seed = run_seed(config.base_seed, algorithm.id, n, run_index)
    rng = RandomSource(seed)
    budget = config.budget_for(n)
    common = dict(budget=budget, rng=rng, trace=config.trace, trace_every=config.trace_every)
    if algorithm.engine == "opo":
        rec = run_opo_ea(problem, **common)
    elif algorithm.engine == "fixed":
        rec = run_fixed(problem, int(algorithm.lam), **common)
    else:
        cap = algorithm.cap_value(n)
        init = min(config.initial_lambda, cap)
        rec = run_adaptive(problem, lambda_cap=cap, F=config.F, initial_lambda=init, **common)
    rec.algo = algorithm.id
    rec.seed = seed
    if not config.timing:
        rec.wall_ms = 0.0
    if rec.censored:
        log.info("censored run: %s n=%d run=%d after %d evaluations", algorithm.id, n, run_index, rec.evaluations)
    if config.trace and trace_dir is not None:
        path = Path(trace_dir) / f"trace_{algorithm.id}_n{n}_r{run_index}.csv"
        write_trace_csv(rec.trace or [], n, path)
    return rec


def _run_job(args):
    config, algorithm, n, run_index, trace_dir = args
    rec = run_cell(config, algorithm, n, run_index, trace_dir)
    rec.final_x = None
    return (algorithm.id, n, run_index), rec


def run_all(config: ExperimentConfig, trace_dir: str | os.PathLike | None = None) -> list[RunRecord]:
    """All runs of the sweep, ordered by (algorithm, n, run_index) as configured."""
    jobs = [(config, a, n, r, trace_dir) for a, n in config.cells() for r in range(config.runs)]
    order = {(a.id, n, r): i for i, (_, a, n, r, _) in enumerate(jobs)}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=1))
    else:
        results = [_run_job(j) for j in jobs]
    results.sort(key=lambda kv: order[kv[0]])
    return [rec for _, rec in results]


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def lower_median(values: Sequence[float]) -> float:
    v = sorted(values)
    if not v:
        raise ValueError("median of an empty sample")
    return v[(len(v) - 1) // 2]


def iqr(values: Sequence[float]) -> float:
    """Q3 - Q1, each the lower median of the half below / above the median.

    With an odd count the median itself belongs to neither half.
    """
    v = sorted(values)
    h = len(v) // 2
    if h == 0:
        return 0.0
    q1, q3 = lower_median(v[:h]), lower_median(v[len(v) - h:])
    if math.isinf(q3) and math.isinf(q1):
        return math.nan
    return q3 - q1


@dataclass
class SummaryRow:
    algo: str
    n: int
    m: int
    runs: int
    censored: int
    median_evals: float
    iqr_evals: float
    median_max_lambda: float
    iqr_max_lambda: float

    @property
    def valid(self) -> bool:
        return 2 * self.censored < self.runs


def aggregate(records: Iterable[RunRecord]) -> list[SummaryRow]:
    """Per-(algo, n) medians and IQRs; censored runs count as +inf evaluations."""
    groups: dict[tuple[str, int], list[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.algo, rec.n), []).append(rec)
    rows = []
    for (algo, n), recs in groups.items():
        evals = [float(r.evaluations) if r.success else math.inf for r in recs]
        lams = [r.max_lambda for r in recs]
        censored = sum(1 for r in recs if not r.success)
        valid = 2 * censored < len(recs)
        rows.append(SummaryRow(
            algo=algo, n=n, m=recs[0].m, runs=len(recs), censored=censored,
            median_evals=lower_median(evals) if valid else math.nan,
            iqr_evals=iqr(evals) if valid else math.nan,
            median_max_lambda=lower_median(lams),
            iqr_max_lambda=iqr(lams),
        ))
    return rows


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _num(x: float | int) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def _write_csv(path: str | os.PathLike | None, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (int, float)) else v for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def write_runs_csv(records: Iterable[RunRecord], path=None) -> str:
    return _write_csv(path, RUNS_HEADER, (
        (r.algo, r.n, r.m, r.seed, r.success, r.evaluations, r.iterations, r.max_lambda, round(r.wall_ms, 3))
        for r in records))


def write_summary_csv(summaries: Iterable[SummaryRow], path=None) -> str:
    return _write_csv(path, SUMMARY_HEADER, (
        (s.algo, s.n, s.m, s.runs, s.censored, s.median_evals, s.iqr_evals,
         s.median_max_lambda, s.iqr_max_lambda) for s in summaries))


def runtime_plot_rows(summaries: Iterable[SummaryRow]) -> list[tuple[str, int, float]]:
    """``(algo, n, median_evals / n)`` per summary row, sorted by algorithm then n."""
    rows = [(s.algo, s.n, s.median_evals / s.n) for s in summaries]
    algo_order = {}
    for a, _, _ in rows:
        algo_order.setdefault(a, len(algo_order))
    return sorted(rows, key=lambda r: (algo_order[r[0]], r[1]))


def emit_runtime_plot_data(summaries: Iterable[SummaryRow], path=None) -> str:
    return _write_csv(path, PLOT_HEADER, runtime_plot_rows(summaries))


def max_lambda_table(summaries: Iterable[SummaryRow], algo: str) -> list[tuple[int, int, float, float]]:
    """``(log2 n, n, median max λ, IQR)`` rows for one algorithm."""
    rows = [(int(round(math.log2(s.n))), s.n, s.median_max_lambda, s.iqr_max_lambda)
            for s in summaries if s.algo == algo]
    return sorted(rows, key=lambda r: r[1])


def emit_max_lambda_table(summaries: Iterable[SummaryRow], algo: str, path=None) -> str:
    return _write_csv(path, MAXLAMBDA_HEADER, max_lambda_table(summaries, algo))


def lambda_trace_rows(trace: Iterable[TraceRecord], n: int) -> list[tuple[int, int, int, float, float]]:
    """Trace rows with ``sqrt(n/d)`` appended; ``d = 0`` rows are dropped.

    The reference λ* = sqrt(n/d) coincides with the last column.
    """
    return [(t.iteration, t.evaluations, t.d, t.lam, math.sqrt(n / t.d)) for t in trace if t.d >= 1]


def emit_lambda_trace_data(trace: Iterable[TraceRecord], n: int, path=None) -> str:
    return _write_csv(path, TRACE_HEADER, lambda_trace_rows(trace, n))


write_trace_csv = emit_lambda_trace_data


@dataclass
class SweepResult:
    records: list[RunRecord]
    summaries: list[SummaryRow]
    files: dict[str, Path]


def sweep(config: ExperimentConfig, out: str | os.PathLike | None = None) -> SweepResult:
    """Run every cell and write runs.csv, summary.csv, plotdata.csv.

    Adaptive algorithms also get ``maxlambda_<algo>.csv``; traces go to
    ``traces/`` when enabled.
    """
    out_dir = Path(out if out is not None else config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_dir = out_dir / "traces" if config.trace else None
    if trace_dir is not None:
        trace_dir.mkdir(exist_ok=True)
    records = run_all(config, trace_dir)
    summaries = aggregate(records)
    files = {
        "runs": out_dir / "runs.csv",
        "summary": out_dir / "summary.csv",
        "plotdata": out_dir / "plotdata.csv",
    }
    write_runs_csv(records, files["runs"])
    write_summary_csv(summaries, files["summary"])
    emit_runtime_plot_data(summaries, files["plotdata"])
    for algo in config.algorithms:
        if algo.engine == "adaptive":
            key = f"maxlambda_{algo.id}"
            files[key] = out_dir / f"{key}.csv"
            emit_max_lambda_table(summaries, algo.id, files[key])
    return SweepResult(records, summaries, files)


def single_config(problem: str, n: int, algorithm: AlgorithmSpec, seed: int, **kw) -> ExperimentConfig:
    return ExperimentConfig(problem=problem, sizes=[n], algorithms=[algorithm], runs=1, base_seed=seed, **kw)


__all__ = [
    "AlgorithmSpec", "ConfigError", "ExperimentConfig", "SummaryRow", "SweepResult",
    "aggregate", "emit_lambda_trace_data", "emit_max_lambda_table", "emit_runtime_plot_data",
    "iqr", "load_config", "lower_median", "max_lambda_table", "parse_config", "run_all",
    "run_cell", "single_config", "sweep", "write_runs_csv", "write_summary_csv",
]
