"""The (1+(λ,λ)) GA with fixed or self-adjusting λ, and the (1+1) EA baseline.

Whole runs execute inside the selected kernel (see :mod:`onell.kernel`); the
single-step functions here (:func:`mutate`, :func:`crossover`,
:func:`ga_iteration`) run on the pure-Python engine and follow the same
procedure.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _pykernel
from .core import BitString, RandomSource, uniform_bitstring
from .kernel import kernel
from .problems import MaxSat3, OneMax, Problem

DEFAULT_F = 1.5
DEFAULT_U = 5


class Outcome(enum.IntEnum):
    WORSE = -1
    EQUAL = 0
    IMPROVED = 1


class RunTerminated(Exception):
    """Raised when an iteration is requested for a finished run."""


class OptimumReached(RunTerminated):
    pass


class BudgetExhausted(RunTerminated):
    pass


@dataclass
class GaParams:
    """Parameters of one GA configuration.

    ``lam`` is the fixed population size in ``"fixed"`` mode and the initial
    value in ``"adaptive"`` mode.  ``lambda_cap=None`` means the cap is ``n``.
    """

    lam: float = 1.0
    lambda_cap: float | None = None
    F: float = DEFAULT_F
    U: int = DEFAULT_U
    budget: int | None = None
    mode: str = "fixed"

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        if self.lam < 1:
            raise ValueError(f"lambda must be >= 1, got {self.lam}")
        if self.mode == "fixed" and self.lam != int(self.lam):
            raise ValueError(f"fixed mode needs an integer lambda, got {self.lam}")
        if not 1.0 < self.F < 2.0:
            raise ValueError(f"update strength F must lie in (1, 2), got {self.F}")
        if self.U < 2:
            raise ValueError(f"success rule U must be >= 2, got {self.U}")
        if self.lambda_cap is not None and self.lambda_cap < 1:
            raise ValueError(f"lambda cap must be >= 1, got {self.lambda_cap}")

    def cap_for(self, n: int) -> float:
        if self.mode == "fixed":
            return float(self.lam)
        return float(n) if self.lambda_cap is None else float(self.lambda_cap)

    @staticmethod
    def mutation_rate(lam: float, n: int) -> float:
        return min(lam / n, 1.0)

    @staticmethod
    def crossover_bias(lam: float) -> float:
        return 1.0 / lam


@dataclass
class TraceRecord:
    iteration: int
    evaluations: int
    d: int
    lam: float


@dataclass
class RunRecord:
    """Outcome of one run; harness fields stay at their defaults when unused."""

    success: bool
    evaluations: int
    iterations: int
    final_fitness: int
    max_fitness: int
    max_lambda: float
    final_lambda: float
    distance: int
    algo: str = ""
    n: int = 0
    m: int = 0
    seed: int = 0
    wall_ms: float = 0.0
    trace: list[TraceRecord] | None = None
    final_x: BitString | None = field(default=None, repr=False)

    @property
    def censored(self) -> bool:
        return not self.success


@dataclass
class RunState:
    x: BitString
    fitness: int
    evaluations: int = 1
    iterations: int = 0
    lam: float = 1.0
    max_lambda_seen: float = 1.0
    trace: list[TraceRecord] | None = None

    @classmethod
    def initial(cls, problem: Problem, rng: RandomSource, lam: float = 1.0, trace: bool = False) -> "RunState":
        x = uniform_bitstring(problem.n, rng)
        return cls(x, problem.evaluate(x), 1, 0, float(lam), float(lam), [] if trace else None)


def default_budget(n: int) -> int:
    return int(math.ceil(1e4 * n * math.log(n + 2)))


def round_half_up(lam: float) -> int:
    """Nearest integer, ties rounded toward +inf."""
    if lam < 1:
        raise ValueError(f"lambda must be >= 1, got {lam}")
    return _pykernel.round_half_up(lam)


def lambda_update(lam: float, outcome: Outcome, F: float = DEFAULT_F, U: int = DEFAULT_U,
                  lambda_cap: float = math.inf) -> float:
    """One-fifth-rule step: shrink by ``F`` on improvement, else grow by ``F**(1/(U-1))``."""
    if outcome == Outcome.IMPROVED:
        return max(lam / F, 1.0)
    return min(lam * F ** (1.0 / (U - 1)), lambda_cap)


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------


def mutate(x: BitString, ell: int, rng: RandomSource) -> BitString:
    """Flip exactly ``ell`` positions chosen uniformly without replacement."""
    n = len(x)
    if not 0 <= ell <= n:
        raise ValueError(f"cannot flip {ell} bits of a length-{n} string")
    return x.flipped(rng.sample_distinct(n, ell))


def crossover(x: BitString, x_prime: BitString, c: float, rng: RandomSource) -> BitString:
    """Biased uniform crossover: take ``x_prime[i]`` with probability ``c``.

    Positions where the parents agree cannot change the child, so one uniform
    is drawn per differing position only, in increasing index order.
    """
    if len(x) != len(x_prime):
        raise ValueError(f"length mismatch: {len(x)} vs {len(x_prime)}")
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"crossover bias must lie in [0, 1], got {c}")
    diff = np.flatnonzero(x.bits != x_prime.bits).tolist()
    return x.flipped([i for i in diff if rng.random() < c])


# ---------------------------------------------------------------------------
# Engine plumbing
# ---------------------------------------------------------------------------


def _kernel_args(problem: Problem):
    n = problem.n
    if isinstance(problem, OneMax):
        return (_pykernel.KIND_ONEMAX, n,
                np.zeros((0, 3), dtype=np.int32), np.zeros((0, 3), dtype=np.uint8),
                np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int32),
                np.ones(n, dtype=np.uint8))
    if isinstance(problem, MaxSat3):
        f = problem.formula
        target = problem.planted.bits if problem.planted is not None else np.zeros(n, dtype=np.uint8)
        return (_pykernel.KIND_CNF, n, f.clause_vars, f.clause_signs, f.occ_offsets, f.occ_clauses, target)
    raise TypeError(f"no kernel support for {type(problem).__name__}")


def ga_iteration(state: RunState, params: GaParams, problem: Problem, rng: RandomSource) -> Outcome:
    """Run one GA iteration in place on ``state`` and return its outcome.

    Raises :class:`OptimumReached` or :class:`BudgetExhausted` instead of
    starting an iteration when the run is already over.
    """
    if problem.is_optimal(state.fitness):
        raise OptimumReached(f"fitness {state.fitness} is optimal")
    budget = params.budget if params.budget is not None else default_budget(problem.n)
    if state.evaluations >= budget:
        raise BudgetExhausted(f"{state.evaluations} evaluations used of {budget}")

    args = _kernel_args(problem)
    eng = _pykernel.Engine(*args, state.x.bits)
    if eng.fitness != state.fitness:
        raise ValueError("state fitness is stale")
    if state.trace is not None:
        state.trace.append(TraceRecord(state.iterations + 1, state.evaluations, eng.d, state.lam))

    lam = state.lam if params.mode == "adaptive" else float(params.lam)
    raw, fy, y, lam_int = eng.ga_iteration(lam, rng)
    outcome = Outcome(raw)
    state.evaluations += 2 * lam_int
    state.iterations += 1

    accept = outcome >= Outcome.EQUAL
    if accept:
        eng.apply(y, fy)
        state.x = BitString(np.frombuffer(bytes(eng.x), dtype=np.uint8))
        state.fitness = fy
    if params.mode == "adaptive":
        state.lam = lambda_update(state.lam, outcome, params.F, params.U, params.cap_for(problem.n))
        state.max_lambda_seen = max(state.max_lambda_seen, state.lam)
    return outcome


def _run(problem: Problem, algo: int, lam0: float, cap: float, F: float, U: int,
         budget: int | None, rng: RandomSource, trace: bool, trace_every: int,
         x0: BitString | None = None) -> RunRecord:
    n = problem.n
    if budget is None:
        budget = default_budget(n)
    start = time.perf_counter()
    x = x0 if x0 is not None else uniform_bitstring(n, rng)
    if len(x) != n:
        raise ValueError(f"initial point has length {len(x)}, expected {n}")
    out = kernel.run_engine(*_kernel_args(problem), x.bits, rng.getstate(), algo,
                            float(lam0), float(cap), float(F), int(U), int(budget),
                            bool(trace), int(trace_every))
    rng.setstate(out["state"])
    rows = [TraceRecord(*row) for row in out["trace"]] if trace else None
    return RunRecord(
        success=out["fitness"] >= problem.max_fitness,
        evaluations=int(out["evaluations"]),
        iterations=int(out["iterations"]),
        final_fitness=int(out["fitness"]),
        max_fitness=problem.max_fitness,
        max_lambda=float(out["max_lambda"]),
        final_lambda=float(out["lambda"]),
        distance=int(out["distance"]),
        n=n,
        m=problem.max_fitness if isinstance(problem, MaxSat3) else 0,
        seed=rng.seed,
        wall_ms=(time.perf_counter() - start) * 1e3,
        trace=rows,
        final_x=BitString(out["x"]),
    )


def run_fixed(problem: Problem, lam: int, budget: int | None = None, rng: RandomSource | None = None,
              trace: bool = False, trace_every: int = 1, x0: BitString | None = None) -> RunRecord:
    """(1+(λ,λ)) GA with a fixed integer λ, elitist acceptance ``f(y) >= f(x)``."""
    if lam < 1 or lam != int(lam):
        raise ValueError(f"fixed lambda must be a positive integer, got {lam}")
    if lam > problem.n:
        raise ValueError(f"lambda {lam} exceeds n={problem.n}")
    rng = rng if rng is not None else RandomSource(0)
    return _run(problem, _pykernel.ALGO_FIXED, lam, lam, DEFAULT_F, DEFAULT_U, budget, rng, trace, trace_every, x0)


def run_adaptive(problem: Problem, lambda_cap: float | None = None, F: float = DEFAULT_F,
                 budget: int | None = None, rng: RandomSource | None = None, trace: bool = False,
                 trace_every: int = 1, initial_lambda: float = 1.0, U: int = DEFAULT_U,
                 x0: BitString | None = None) -> RunRecord:
    """Self-adjusting (1+(λ,λ)) GA with λ kept in ``[1, lambda_cap]``.

    ``lambda_cap=None`` uses ``n``, the unconstrained variant.
    """
    cap = float(problem.n) if lambda_cap is None else float(lambda_cap)
    if cap < 1:
        raise ValueError(f"lambda cap must be >= 1, got {cap}")
    if not 1.0 < F < 2.0:
        raise ValueError(f"update strength F must lie in (1, 2), got {F}")
    if not 1.0 <= initial_lambda <= cap:
        raise ValueError(f"initial lambda {initial_lambda} outside [1, {cap}]")
    rng = rng if rng is not None else RandomSource(0)
    return _run(problem, _pykernel.ALGO_ADAPTIVE, initial_lambda, cap, F, U, budget, rng, trace, trace_every, x0)


def run_opo_ea(problem: Problem, budget: int | None = None, rng: RandomSource | None = None,
               trace: bool = False, trace_every: int = 1, x0: BitString | None = None) -> RunRecord:
    """(1+1) EA with standard bit mutation at rate 1/n.

    The number of flipped bits is drawn from B(n, 1/n) and the positions by
    Floyd sampling, which has the law of independent per-bit flips.
    """
    rng = rng if rng is not None else RandomSource(0)
    return _run(problem, _pykernel.ALGO_OPO, 1.0, 1.0, DEFAULT_F, DEFAULT_U, budget, rng, trace, trace_every, x0)
