"""Average-fitness formulas for planted 3-CNF and the well-behavedness checker.

The satisfaction probability of a random planted clause under an assignment
at distance ``d`` from the planted one is

    P(n, d) = (6*C(n,3) + C(n-d,3)) / (7*C(n,3)),

kept as an exact :class:`fractions.Fraction`.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .core import BitString, RandomSource, binomial_coefficient, hamming_distance
from .kernel import kernel
from .problems import PlantedInstance

DEFAULT_ENUMERATION_CAP = 100_000
DEFAULT_SAMPLES = 10_000
WILSON_Z = 1.959963984540054

REPORT_COLUMNS = ("n", "m", "d", "ell", "mode", "bad_frac", "bad_bound", "good_frac",
                  "good_bound", "verdict", "samples", "ci_radius")


def _check_distance(n: int, d: int) -> None:
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if not 0 <= d <= n:
        raise ValueError(f"distance {d} outside [0, {n}]")


def sat_probability(n: int, d: int) -> Fraction:
    """Probability that a uniform planted clause stays satisfied at distance ``d``."""
    _check_distance(n, d)
    total = binomial_coefficient(n, 3)
    return Fraction(6 * total + binomial_coefficient(n - d, 3), 7 * total)


def avg_fitness(n: int, m: int, d: int, exact: bool = False) -> float | Fraction:
    value = m * sat_probability(n, d)
    return value if exact else float(value)


def avg_fitness_gap(n: int, m: int, d: int, ell: int, exact: bool = False) -> float | Fraction:
    """``f_avg(d) - f_avg(d + ell)``, computed exactly before any rounding."""
    if ell < 0 or d < 0 or d + ell > n:
        raise ValueError(f"need 0 <= d <= d + ell <= n, got d={d}, ell={ell}, n={n}")
    _check_distance(n, d)
    value = m * Fraction(binomial_coefficient(n - d, 3) - binomial_coefficient(n - d - ell, 3),
                         7 * binomial_coefficient(n, 3))
    return value if exact else float(value)


def recommended_cap(n: int, m: int) -> int:
    """Heuristic λ̄: ``min(floor((m/n)**(1/4)), ceil(2 ln(n+1)))``, at least 1.

    Only a default; nothing guarantees well-behavedness at this value.
    """
    if n < 3 or m < n:
        raise ValueError(f"need m >= n >= 3, got n={n}, m={m}")
    root = int(math.floor((m / n) ** 0.25))
    # exact integer fourth root of m/n
    while (root + 1) ** 4 * n <= m:
        root += 1
    while root > 0 and root ** 4 * n > m:
        root -= 1
    return max(1, min(root, math.ceil(2 * math.log(n + 1))))


# ---------------------------------------------------------------------------
# Offspring sets
# ---------------------------------------------------------------------------


class EmptyOffspringSet(ValueError):
    pass


@dataclass
class OffspringStream:
    """ℓ-bit flip sets of one kind, either the whole set or i.i.d. samples.

    ``flips`` yields index tuples; :meth:`bitstrings` applies them to ``x``.
    """

    x: BitString
    kind: str
    ell: int
    size: int
    mode: str
    flips: Iterator[tuple[int, ...]] = field(repr=False)

    def __iter__(self):
        return self.flips

    def bitstrings(self) -> Iterator[BitString]:
        return (self.x.flipped(f) for f in self.flips)


def offspring_set_size(n: int, d: int, ell: int, kind: str) -> int:
    bad = binomial_coefficient(n - d, ell)
    return bad if kind == "bad" else binomial_coefficient(n, ell) - bad


def enumerate_or_sample_offspring(x: BitString, planted: BitString, ell: int, kind: str,
                                  cap: int = DEFAULT_ENUMERATION_CAP,
                                  rng: RandomSource | None = None,
                                  samples: int = DEFAULT_SAMPLES,
                                  force_sampling: bool = False) -> OffspringStream:
    """ℓ-bad (no wrong bit flipped) or ℓ-good (some wrong bit flipped) offspring of ``x``.

    Sets no larger than ``cap`` are enumerated in lexicographic order.
    Larger ones, or any set when ``force_sampling`` is set, yield ``samples``
    uniform draws: bad offspring pick ``ell`` of the agreeing positions
    directly; good offspring reject uniform ``ell``-subsets of ``[0, n)``
    that miss every wrong bit.
    """
    if kind not in ("bad", "good"):
        raise ValueError(f"kind must be 'bad' or 'good', got {kind!r}")
    n = len(x)
    d = hamming_distance(x, planted)
    if not 1 <= ell <= n:
        raise ValueError(f"ell must lie in [1, {n}], got {ell}")
    size = offspring_set_size(n, d, ell, kind)
    if size == 0:
        raise EmptyOffspringSet(f"no {ell}-{kind} offspring at distance {d} (n={n})")
    wrong = x.bits != planted.bits
    agree = np.flatnonzero(~wrong).tolist()

    if size <= cap and not force_sampling:
        if kind == "bad":
            it = itertools.combinations(agree, ell)
        else:
            wrong_list = wrong.tolist()
            it = (c for c in itertools.combinations(range(n), ell) if any(wrong_list[i] for i in c))
        return OffspringStream(x, kind, ell, size, "exact", it)

    if rng is None:
        raise ValueError("sampling mode needs a RandomSource")

    def draw_bad():
        for _ in range(samples):
            yield tuple(agree[j] for j in rng.sample_distinct(len(agree), ell))

    def draw_good():
        wrong_list = wrong.tolist()
        for _ in range(samples):
            while True:
                c = tuple(rng.sample_distinct(n, ell))
                if any(wrong_list[i] for i in c):
                    yield c
                    break

    return OffspringStream(x, kind, ell, size, "sampled", draw_bad() if kind == "bad" else draw_good())


# ---------------------------------------------------------------------------
# Well-behavedness
# ---------------------------------------------------------------------------


def wilson_radius(successes: int, trials: int, z: float = WILSON_Z) -> float:
    """Half-width of the Wilson score interval."""
    if trials == 0:
        return 0.0
    p = successes / trials
    denom = 1 + z * z / trials
    return z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom


@dataclass
class EllVerdict:
    ell: int
    threshold: float
    bad_size: int
    good_size: int
    bad_mode: str
    good_mode: str
    bad_evaluated: int
    good_evaluated: int
    bad_violations: int
    good_violations: int
    lambda_cap: int
    note: str = ""

    @property
    def bad_bound(self) -> float:
        return 1.0 / self.lambda_cap

    @property
    def good_bound(self) -> float:
        return 0.5

    @property
    def mode(self) -> str:
        if self.bad_mode == "skip" and self.good_mode == "skip":
            return "skip"
        return "sampled" if "sampled" in (self.bad_mode, self.good_mode) else "exact"

    @property
    def bad_frac(self) -> float:
        return self.bad_violations / self.bad_evaluated if self.bad_evaluated else 0.0

    @property
    def good_frac(self) -> float:
        return self.good_violations / self.good_evaluated if self.good_evaluated else 0.0

    @property
    def bad_ok(self) -> bool:
        if self.bad_mode == "exact":
            # at most |X-|/λ̄ violators, compared without rounding
            return self.bad_violations * self.lambda_cap <= self.bad_size
        return self.bad_frac <= self.bad_bound

    @property
    def good_ok(self) -> bool:
        if self.good_mode == "exact":
            return 2 * self.good_violations <= self.good_size
        return self.good_frac <= self.good_bound

    @property
    def skipped(self) -> bool:
        return self.mode == "skip"

    @property
    def verdict(self) -> str:
        if self.skipped:
            return "skip"
        return "pass" if (self.bad_ok and self.good_ok) else "fail"

    @property
    def samples(self) -> int:
        return self.bad_evaluated + self.good_evaluated

    @property
    def bad_ci_radius(self) -> float:
        return wilson_radius(self.bad_violations, self.bad_evaluated) if self.bad_mode == "sampled" else 0.0

    @property
    def good_ci_radius(self) -> float:
        return wilson_radius(self.good_violations, self.good_evaluated) if self.good_mode == "sampled" else 0.0

    @property
    def ci_radius(self) -> float:
        return max(self.bad_ci_radius, self.good_ci_radius)


@dataclass
class WellBehavedReport:
    x: BitString
    n: int
    m: int
    d: int
    lambda_cap: int
    per_ell: list[EllVerdict]

    @property
    def well_behaved(self) -> bool:
        return all(v.verdict != "fail" for v in self.per_ell)

    def verdicts(self) -> list[str]:
        return [v.verdict for v in self.per_ell]

    def rows(self) -> list[dict]:
        return [
            {
                "n": self.n, "m": self.m, "d": self.d, "ell": v.ell, "mode": v.mode,
                "bad_frac": f"{v.bad_frac:.6f}", "bad_bound": f"{v.bad_bound:.6f}",
                "good_frac": f"{v.good_frac:.6f}", "good_bound": f"{v.good_bound:.6f}",
                "verdict": v.verdict, "samples": v.samples, "ci_radius": f"{v.ci_radius:.6f}",
            }
            for v in self.per_ell
        ]


def write_report_csv(reports: WellBehavedReport | list[WellBehavedReport], path) -> None:
    if isinstance(reports, WellBehavedReport):
        reports = [reports]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for rep in reports:
            w.writerows(rep.rows())


def _fitness_batch(instance: PlantedInstance, x: BitString, flips: list[tuple[int, ...]], ell: int) -> np.ndarray:
    f = instance.formula
    mat = np.array(flips, dtype=np.int64).reshape(len(flips), ell)
    return kernel.offspring_fitness(1, f.n, f.clause_vars, f.clause_signs, f.occ_offsets,
                                    f.occ_clauses, x.bits, mat)


def check_well_behaved(instance: PlantedInstance, x: BitString, lambda_cap: int,
                       cap: int = DEFAULT_ENUMERATION_CAP, samples: int = DEFAULT_SAMPLES,
                       rng: RandomSource | None = None, force_sampling: bool = False,
                       batch: int = 4096) -> WellBehavedReport:
    """Test both conditions of well-behavedness for every ℓ in ``[1, lambda_cap]``.

    With ``T = f_avg(d) - f_avg(d + ℓ - 1)``, a bad offspring violates when
    ``f(x) - f(x-) <= T`` and a good one when ``f(x) - f(x+) >= T``.  A point
    passes ℓ when at most a ``1/lambda_cap`` fraction of bad and at most half
    of good offspring violate.  An empty side holds vacuously; ℓ with no
    offspring of either kind, or with ``d + ℓ - 1 > n``, is reported as
    ``skip``.
    """
    n, m = instance.n, instance.m
    if len(x) != n:
        raise ValueError(f"x has length {len(x)}, instance has n={n}")
    d = hamming_distance(x, instance.planted)
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d(x) < n, got d={d}")
    if lambda_cap < 1 or lambda_cap != int(lambda_cap):
        raise ValueError(f"lambda cap must be a positive integer, got {lambda_cap}")
    lambda_cap = int(lambda_cap)
    fx = instance.problem.evaluate(x)
    rows: list[EllVerdict] = []

    for ell in range(1, lambda_cap + 1):
        if ell > n or d + ell - 1 > n:
            rows.append(EllVerdict(ell, math.nan, 0, 0, "skip", "skip", 0, 0, 0, 0, lambda_cap,
                                   note=f"ell={ell} out of range for d={d}, n={n}"))
            continue
        threshold = avg_fitness_gap(n, m, d, ell - 1, exact=True)
        sides = {}
        notes = []
        for kind in ("bad", "good"):
            try:
                stream = enumerate_or_sample_offspring(x, instance.planted, ell, kind, cap=cap, rng=rng,
                                                       samples=samples, force_sampling=force_sampling)
            except EmptyOffspringSet:
                sides[kind] = ("skip", 0, 0, 0)
                notes.append(f"{kind} set empty")
                continue
            evaluated = violations = 0
            chunk: list[tuple[int, ...]] = []

            def flush():
                nonlocal evaluated, violations
                if not chunk:
                    return
                loss = fx - _fitness_batch(instance, x, chunk, ell)
                # losses are integers, so the rational threshold rounds exactly
                if kind == "bad":
                    hit = loss <= math.floor(threshold)
                else:
                    hit = loss >= math.ceil(threshold)
                violations += int(np.count_nonzero(hit))
                evaluated += len(chunk)
                chunk.clear()

            for flips in stream:
                chunk.append(flips)
                if len(chunk) >= batch:
                    flush()
            flush()
            sides[kind] = (stream.mode, stream.size, evaluated, violations)

        bm, bs, be, bv = sides["bad"]
        gm, gs, ge, gv = sides["good"]
        rows.append(EllVerdict(ell, float(threshold), bs, gs, bm, gm, be, ge, bv, gv, lambda_cap,
                               note="; ".join(notes)))
    return WellBehavedReport(x, n, m, d, lambda_cap, rows)
