"""Fitness landscapes: OneMax and planted 3-CNF MAX-SAT.

A :class:`Formula` keeps its clauses as three parallel ``(m, 3)`` arrays in
canonical order (variables ascending, signs permuted along) plus a CSR
occurrence index ``occ_offsets``/``occ_clauses``.  ``Clause`` objects are
materialized lazily.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .core import BitString, RandomSource, binomial_coefficient
from .kernel import kernel


class InstanceFormatError(ValueError):
    """Raised by :func:`read_instance` for malformed or inconsistent files."""

    def __init__(self, reason: str, line: int | None = None):
        self.reason = reason
        self.line = line
        super().__init__(f"line {line}: {reason}" if line is not None else reason)


@dataclass(frozen=True)
class Clause:
    """Disjunction of three literals over distinct variables (0-based)."""

    vars: tuple[int, int, int]
    signs: tuple[bool, bool, bool]

    def __post_init__(self):
        if len(self.vars) != 3 or len(self.signs) != 3:
            raise ValueError("a clause has exactly three literals")
        if len(set(self.vars)) != 3:
            raise ValueError(f"clause variables must be distinct: {self.vars}")
        if min(self.vars) < 0:
            raise ValueError(f"negative variable index in {self.vars}")
        order = sorted(range(3), key=lambda i: self.vars[i])
        object.__setattr__(self, "vars", tuple(int(self.vars[i]) for i in order))
        object.__setattr__(self, "signs", tuple(bool(self.signs[i]) for i in order))

    @classmethod
    def from_literals(cls, literals: Sequence[int]) -> "Clause":
        """Build from 1-based signed DIMACS literals."""
        if any(lit == 0 for lit in literals):
            raise ValueError("literal 0 is not a variable")
        return cls(tuple(abs(l) - 1 for l in literals), tuple(l > 0 for l in literals))

    def literals(self) -> tuple[int, int, int]:
        return tuple((v + 1) if s else -(v + 1) for v, s in zip(self.vars, self.signs))

    def satisfied_by(self, x: BitString | Sequence[int]) -> bool:
        return any(bool(x[v]) == s for v, s in zip(self.vars, self.signs))


class Formula:
    """Ordered multiset of 3-literal clauses over ``n`` variables."""

    def __init__(self, n: int, clause_vars, clause_signs):
        cv = np.ascontiguousarray(np.asarray(clause_vars, dtype=np.int32).reshape(-1, 3))
        cs = np.ascontiguousarray(np.asarray(clause_signs, dtype=np.uint8).reshape(-1, 3))
        if cv.shape != cs.shape:
            raise ValueError("clause variable and sign arrays differ in shape")
        if n < 3:
            raise ValueError(f"a 3-CNF formula needs n >= 3, got {n}")
        if cv.size:
            if cv.min() < 0 or cv.max() >= n:
                raise ValueError("clause variable out of range")
            srt = np.sort(cv, axis=1)
            if np.any(srt[:, 0] == srt[:, 1]) or np.any(srt[:, 1] == srt[:, 2]):
                raise ValueError("clause variables must be distinct")
            order = np.argsort(cv, axis=1, kind="stable")
            cv = np.take_along_axis(cv, order, axis=1)
            cs = np.take_along_axis(cs, order, axis=1)
        cs = (cs != 0).astype(np.uint8)
        self.n = int(n)
        self.clause_vars = cv
        self.clause_signs = cs
        self.occ_offsets, self.occ_clauses = _occurrence_index(self.n, cv)
        for arr in (self.clause_vars, self.clause_signs, self.occ_offsets, self.occ_clauses):
            arr.flags.writeable = False

    @classmethod
    def from_clauses(cls, n: int, clauses: Iterable[Clause]) -> "Formula":
        clauses = list(clauses)
        cv = np.array([c.vars for c in clauses], dtype=np.int32).reshape(-1, 3)
        cs = np.array([c.signs for c in clauses], dtype=np.uint8).reshape(-1, 3)
        return cls(n, cv, cs)

    @property
    def m(self) -> int:
        return int(self.clause_vars.shape[0])

    def __len__(self) -> int:
        return self.m

    @cached_property
    def clauses(self) -> tuple[Clause, ...]:
        return tuple(
            Clause(tuple(v), tuple(bool(b) for b in s))
            for v, s in zip(self.clause_vars.tolist(), self.clause_signs.tolist())
        )

    def occurrences(self, var: int) -> np.ndarray:
        return self.occ_clauses[self.occ_offsets[var]:self.occ_offsets[var + 1]]

    def satisfied_mask(self, x: BitString) -> np.ndarray:
        if len(x) != self.n:
            raise ValueError(f"dimension mismatch: formula has {self.n} variables, x has {len(x)}")
        if self.m == 0:
            return np.zeros(0, dtype=bool)
        return (x.bits[self.clause_vars] == self.clause_signs).any(axis=1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Formula):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.clause_vars, other.clause_vars)
            and np.array_equal(self.clause_signs, other.clause_signs)
        )

    def __repr__(self) -> str:
        return f"Formula(n={self.n}, m={self.m})"


def _occurrence_index(n: int, clause_vars: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = clause_vars.reshape(-1)
    order = np.argsort(flat, kind="stable")
    occ_clauses = (order // 3).astype(np.int32)
    counts = np.bincount(flat, minlength=n) if flat.size else np.zeros(n, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, occ_clauses


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


class Problem:
    """Common fitness interface; ``evaluate`` is deterministic and bounded."""

    n: int
    max_fitness: int
    name: str = "problem"

    def evaluate(self, x: BitString) -> int:
        raise NotImplementedError

    def evaluate_delta(self, x: BitString, current_fitness: int, flipped: Iterable[int]) -> int:
        raise NotImplementedError

    def is_optimal(self, fitness: int) -> bool:
        return fitness >= self.max_fitness

    def _check(self, x: BitString) -> None:
        if len(x) != self.n:
            raise ValueError(f"dimension mismatch: problem has n={self.n}, x has {len(x)}")


class OneMax(Problem):
    name = "onemax"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"OneMax needs n >= 1, got {n}")
        self.n = int(n)
        self.max_fitness = self.n
        # distance is measured against the all-ones optimum
        self.planted = BitString.ones(self.n)

    def evaluate(self, x: BitString) -> int:
        self._check(x)
        return x.count_ones()

    def evaluate_delta(self, x: BitString, current_fitness: int, flipped: Iterable[int]) -> int:
        self._check(x)
        idx = _flip_indices(flipped, self.n)
        return int(current_fitness + idx.size - 2 * int(x.bits[idx].sum()))

    def __repr__(self) -> str:
        return f"OneMax(n={self.n})"


class MaxSat3(Problem):
    """Number of satisfied clauses of a 3-CNF formula."""

    name = "planted3cnf"

    def __init__(self, formula: Formula, planted: BitString | None = None):
        self.formula = formula
        self.n = formula.n
        self.max_fitness = formula.m
        self.planted = planted

    def evaluate(self, x: BitString) -> int:
        self._check(x)
        return int(np.count_nonzero(self.formula.satisfied_mask(x)))

    def evaluate_delta(self, x: BitString, current_fitness: int, flipped: Iterable[int]) -> int:
        self._check(x)
        idx = _flip_indices(flipped, self.n)
        if idx.size == 0:
            return int(current_fitness)
        f = self.formula
        touched = np.unique(np.concatenate(
            [f.occ_clauses[f.occ_offsets[i]:f.occ_offsets[i + 1]] for i in idx]
        ))
        if touched.size == 0:
            return int(current_fitness)
        cv = f.clause_vars[touched]
        cs = f.clause_signs[touched]
        old = (x.bits[cv] == cs).any(axis=1)
        y = x.bits.copy()
        y[idx] ^= 1
        new = (y[cv] == cs).any(axis=1)
        return int(current_fitness + int(new.sum()) - int(old.sum()))

    def __repr__(self) -> str:
        return f"MaxSat3(n={self.n}, m={self.max_fitness})"


def _flip_indices(flipped: Iterable[int], n: int) -> np.ndarray:
    idx = np.fromiter((int(i) for i in flipped), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("flip index out of range")
        if np.unique(idx).size != idx.size:
            raise ValueError("flip indices must be distinct")
    return idx


def evaluate(problem: Problem, x: BitString) -> int:
    return problem.evaluate(x)


def evaluate_delta(problem: Problem, x: BitString, current_fitness: int, flipped: Iterable[int]) -> int:
    """Fitness of ``x`` with ``flipped`` toggled, given ``current_fitness = f(x)``.

    Only clauses that contain a flipped variable are inspected.  A stale
    ``current_fitness`` is not detected.
    """
    return problem.evaluate_delta(x, current_fitness, flipped)


# ---------------------------------------------------------------------------
# Planted instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    formula: Formula
    planted: BitString
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.formula.n

    @property
    def m(self) -> int:
        return self.formula.m

    @cached_property
    def problem(self) -> MaxSat3:
        return MaxSat3(self.formula, self.planted)

    def first_unsatisfied(self) -> int | None:
        mask = self.formula.satisfied_mask(self.planted)
        bad = np.flatnonzero(~mask)
        return int(bad[0]) if bad.size else None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PlantedInstance):
            return NotImplemented
        return self.formula == other.formula and self.planted == other.planted and self.seed == other.seed


def count_satisfying_clauses_total(n: int) -> int:
    """Number of distinct-variable 3-clauses satisfied by a fixed assignment: 7*C(n,3)."""
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    return 7 * binomial_coefficient(n, 3)


def generate_planted_instance(
    n: int, m: int, planted: BitString, rng: RandomSource, seed: int | None = None
) -> PlantedInstance:
    """Draw ``m`` clauses i.i.d. uniformly among those satisfied by ``planted``.

    Per clause: three distinct variables (Floyd sampling, then sorted), then
    a sign pattern from ``randbelow(8)`` whose bit ``j`` is the sign of the
    ``j``-th smallest variable; the one pattern falsified by ``planted`` is
    redrawn.
    """
    if n < 3:
        raise ValueError(f"planted 3-CNF needs n >= 3, got {n}")
    if m < 0:
        raise ValueError(f"clause count must be non-negative, got {m}")
    if len(planted) != n:
        raise ValueError(f"planted assignment has length {len(planted)}, expected {n}")
    cv, cs, state = kernel.generate_clauses(n, m, planted.bits, rng.getstate())
    rng.setstate(state)
    return PlantedInstance(Formula(n, cv, cs), planted, seed if seed is not None else rng.seed)


def random_planted_instance(n: int, m: int, seed: int) -> PlantedInstance:
    """Uniform planted assignment and formula, both drawn from ``RandomSource(seed)``."""
    from .core import uniform_bitstring

    rng = RandomSource(seed)
    planted = uniform_bitstring(n, rng)
    return generate_planted_instance(n, m, planted, rng, seed=seed)


# ---------------------------------------------------------------------------
# DIMACS persistence
# ---------------------------------------------------------------------------


def format_instance(instance: PlantedInstance) -> str:
    """DIMACS text of ``instance`` with the planted assignment in comments."""
    f = instance.formula
    lines = [
        "c planted 3-CNF instance",
        f"c n {f.n}",
        f"c m {f.m}",
    ]
    if instance.seed is not None:
        lines.append(f"c seed {instance.seed}")
    lines.append(f"c planted {instance.planted}")
    lines.append(f"p cnf {f.n} {f.m}")
    lits = np.where(f.clause_signs == 1, f.clause_vars + 1, -(f.clause_vars + 1))
    lines.extend(f"{a} {b} {c} 0" for a, b, c in lits.tolist())
    return "\n".join(lines) + "\n"


def write_instance(instance: PlantedInstance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_instance(instance))


def read_instance(path: str | os.PathLike) -> PlantedInstance:
    """Parse a DIMACS file written by :func:`write_instance` and verify it."""
    n = m = None
    seed = None
    planted_text = None
    comment_n = comment_m = None
    clauses_v: list[tuple[int, int, int]] = []
    clauses_s: list[tuple[int, int, int]] = []
    pending: list[int] = []
    pending_line = None

    with open(path, encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("c"):
                parts = line.split()
                if len(parts) == 3 and parts[1] in ("n", "m", "seed"):
                    try:
                        value = int(parts[2])
                    except ValueError:
                        raise InstanceFormatError(f"bad integer in comment {parts[1]!r}", lineno) from None
                    if parts[1] == "n":
                        comment_n = value
                    elif parts[1] == "m":
                        comment_m = value
                    else:
                        seed = value
                elif len(parts) == 3 and parts[1] == "planted":
                    planted_text = parts[2]
                continue
            if line.startswith("p"):
                parts = line.split()
                if len(parts) != 4 or parts[1] != "cnf":
                    raise InstanceFormatError("header must read 'p cnf <n> <m>'", lineno)
                if n is not None:
                    raise InstanceFormatError("duplicate header", lineno)
                try:
                    n, m = int(parts[2]), int(parts[3])
                except ValueError:
                    raise InstanceFormatError("non-integer header field", lineno) from None
                continue
            if n is None:
                raise InstanceFormatError("clause before 'p cnf' header", lineno)
            try:
                tokens = [int(t) for t in line.split()]
            except ValueError:
                raise InstanceFormatError("non-integer literal", lineno) from None
            for tok in tokens:
                if pending_line is None:
                    pending_line = lineno
                if tok != 0:
                    if abs(tok) > n:
                        raise InstanceFormatError(f"literal {tok} out of range for n={n}", lineno)
                    pending.append(tok)
                    continue
                if len(pending) != 3:
                    raise InstanceFormatError(f"clause has {len(pending)} literals, expected 3", pending_line)
                vs = [abs(t) - 1 for t in pending]
                if len(set(vs)) != 3:
                    raise InstanceFormatError("clause variables are not distinct", pending_line)
                order = sorted(range(3), key=vs.__getitem__)
                clauses_v.append(tuple(vs[i] for i in order))
                clauses_s.append(tuple(int(pending[i] > 0) for i in order))
                pending = []
                pending_line = None

    if n is None:
        raise InstanceFormatError("missing 'p cnf' header")
    if pending:
        raise InstanceFormatError("last clause is not zero-terminated", pending_line)
    if len(clauses_v) != m:
        raise InstanceFormatError(f"header declares {m} clauses, found {len(clauses_v)}")
    if comment_n is not None and comment_n != n:
        raise InstanceFormatError(f"comment n={comment_n} disagrees with header n={n}")
    if comment_m is not None and comment_m != m:
        raise InstanceFormatError(f"comment m={comment_m} disagrees with header m={m}")
    if planted_text is None:
        raise InstanceFormatError("missing 'c planted <bits>' comment")
    if len(planted_text) != n or set(planted_text) - {"0", "1"}:
        raise InstanceFormatError("planted assignment must be n characters of 0/1")
    try:
        formula = Formula(n, np.array(clauses_v, dtype=np.int32).reshape(-1, 3),
                          np.array(clauses_s, dtype=np.uint8).reshape(-1, 3))
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from None
    instance = PlantedInstance(formula, BitString(planted_text), seed)
    bad = instance.first_unsatisfied()
    if bad is not None:
        raise InstanceFormatError(f"planted assignment unsatisfied at clause {bad + 1}")
    return instance
