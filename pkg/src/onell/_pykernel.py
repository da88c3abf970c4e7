"""Pure-Python optimizer kernel.

Reference implementation of the hot loops.  ``_ckernel.pyx`` reproduces every
random draw of this module in the same order, so both kernels return
identical results for identical inputs.
"""

from __future__ import annotations

import math

import numpy as np

from .core import RandomSource

NAME = "python"

KIND_ONEMAX = 0
KIND_CNF = 1

ALGO_FIXED = 0
ALGO_ADAPTIVE = 1
ALGO_OPO = 2

OUTCOME_WORSE = -1
OUTCOME_EQUAL = 0
OUTCOME_IMPROVED = 1


def round_half_up(lam: float) -> int:
    r = math.floor(lam)
    return int(r) + 1 if lam - r >= 0.5 else int(r)


def generate_clauses(n, m, planted, state):
    rng = RandomSource()
    rng.setstate(state)
    pl = bytes(np.asarray(planted, dtype=np.uint8))
    cv = np.empty((m, 3), dtype=np.int32)
    cs = np.empty((m, 3), dtype=np.uint8)
    for i in range(m):
        a, b, c = sorted(rng.sample_distinct(n, 3))
        # the pattern whose every literal disagrees with planted is unsatisfied
        forbidden = (1 - pl[a]) | ((1 - pl[b]) << 1) | ((1 - pl[c]) << 2)
        pattern = rng.randbelow(8)
        while pattern == forbidden:
            pattern = rng.randbelow(8)
        cv[i, 0], cv[i, 1], cv[i, 2] = a, b, c
        cs[i, 0], cs[i, 1], cs[i, 2] = pattern & 1, (pattern >> 1) & 1, (pattern >> 2) & 1
    return cv, cs, rng.getstate()


class Engine:
    """Parent state plus incremental fitness bookkeeping for one run."""

    def __init__(self, kind, n, clause_vars, clause_signs, occ_offsets, occ_clauses, target, x0):
        self.kind = kind
        self.n = n
        self.x = bytearray(np.asarray(x0, dtype=np.uint8).tobytes())
        self.target = bytes(np.asarray(target, dtype=np.uint8).tobytes())
        self.d = sum(1 for a, b in zip(self.x, self.target) if a != b)
        if kind == KIND_CNF:
            self.cv = np.asarray(clause_vars).reshape(-1).tolist()
            self.cs = np.asarray(clause_signs).reshape(-1).tolist()
            self.offsets = np.asarray(occ_offsets).tolist()
            self.occ = np.asarray(occ_clauses).tolist()
            self.m = len(self.cv) // 3
            self.sat = bytearray(self.m)
            self.stamp = [0] * self.m
            self.epoch = 0
            for c in range(self.m):
                self.sat[c] = self._clause_sat(c)
            self.fitness = sum(self.sat)
            self.max_fitness = self.m
        else:
            self.fitness = sum(self.x)
            self.max_fitness = n

    def _clause_sat(self, c):
        x, cv, cs = self.x, self.cv, self.cs
        j = 3 * c
        return 1 if (x[cv[j]] == cs[j] or x[cv[j + 1]] == cs[j + 1] or x[cv[j + 2]] == cs[j + 2]) else 0

    def fitness_with(self, flips):
        """Fitness of the parent with ``flips`` toggled; the parent is left unchanged."""
        x = self.x
        if self.kind == KIND_ONEMAX:
            f = self.fitness
            for i in flips:
                f += 1 - 2 * x[i]
            return f
        if not flips:
            return self.fitness
        for i in flips:
            x[i] ^= 1
        self.epoch += 1
        ep = self.epoch
        stamp, sat, occ, offsets = self.stamp, self.sat, self.occ, self.offsets
        delta = 0
        for i in flips:
            for k in range(offsets[i], offsets[i + 1]):
                c = occ[k]
                if stamp[c] != ep:
                    stamp[c] = ep
                    delta += self._clause_sat(c) - sat[c]
        for i in flips:
            x[i] ^= 1
        return self.fitness + delta

    def apply(self, flips, new_fitness):
        x, target = self.x, self.target
        for i in flips:
            self.d += 1 if x[i] == target[i] else -1
            x[i] ^= 1
        if self.kind == KIND_CNF and flips:
            self.epoch += 1
            ep = self.epoch
            stamp, sat, occ, offsets = self.stamp, self.sat, self.occ, self.offsets
            for i in flips:
                for k in range(offsets[i], offsets[i + 1]):
                    c = occ[k]
                    if stamp[c] != ep:
                        stamp[c] = ep
                        sat[c] = self._clause_sat(c)
        self.fitness = new_fitness

    def ga_iteration(self, lam, rng):
        """One mutation + crossover + selection round; returns ``(outcome, f(y), flips of y, lam_int)``.

        The caller applies the selection rule.
        """
        n = self.n
        lam_int = round_half_up(lam)
        p = lam / n
        if p > 1.0:
            p = 1.0
        c = 1.0 / lam
        ell = rng.binomial(n, p)

        best_f = -1
        ties = 0
        best: list[int] = []
        for _ in range(lam_int):
            flips = rng.sample_distinct(n, ell)
            f = self.fitness_with(flips)
            if f > best_f:
                best_f, best, ties = f, flips, 1
            elif f == best_f:
                ties += 1
                if rng.randbelow(ties) == 0:
                    best = flips

        best_y = -1
        ties = 0
        y: list[int] = []
        for _ in range(lam_int):
            sel = [i for i in best if rng.random() < c]
            f = self.fitness_with(sel)
            if f > best_y:
                best_y, y, ties = f, sel, 1
            elif f == best_y:
                ties += 1
                if rng.randbelow(ties) == 0:
                    y = sel

        if best_y > self.fitness:
            outcome = OUTCOME_IMPROVED
        elif best_y == self.fitness:
            outcome = OUTCOME_EQUAL
        else:
            outcome = OUTCOME_WORSE
        return outcome, best_y, y, lam_int

    def opo_iteration(self, rng):
        n = self.n
        k = rng.binomial(n, 1.0 / n)
        flips = rng.sample_distinct(n, k)
        f = self.fitness_with(flips)
        if f >= self.fitness:
            self.apply(flips, f)
        return f


def run_engine(kind, n, clause_vars, clause_signs, occ_offsets, occ_clauses, target, x0,
               state, algo, lam0, lam_cap, F, U, budget, trace, trace_every):
    rng = RandomSource()
    rng.setstate(state)
    eng = Engine(kind, n, clause_vars, clause_signs, occ_offsets, occ_clauses, target, x0)
    evaluations = 1
    iterations = 0
    lam = float(lam0)
    max_lambda = lam
    growth = F ** (1.0 / (U - 1))
    rows = []
    every = max(1, int(trace_every))

    while eng.fitness < eng.max_fitness and evaluations < budget:
        if trace and iterations % every == 0:
            rows.append((iterations + 1, evaluations, eng.d, lam))
        iterations += 1
        if algo == ALGO_OPO:
            eng.opo_iteration(rng)
            evaluations += 1
            continue
        outcome, fy, y, lam_int = eng.ga_iteration(lam, rng)
        evaluations += 2 * lam_int
        if algo == ALGO_FIXED:
            if outcome >= OUTCOME_EQUAL:
                eng.apply(y, fy)
            continue
        if outcome == OUTCOME_IMPROVED:
            eng.apply(y, fy)
            lam = max(lam / F, 1.0)
        else:
            if outcome == OUTCOME_EQUAL:
                eng.apply(y, fy)
            lam = min(lam * growth, lam_cap)
        if lam > max_lambda:
            max_lambda = lam

    return {
        "x": np.frombuffer(bytes(eng.x), dtype=np.uint8).copy(),
        "fitness": eng.fitness,
        "evaluations": evaluations,
        "iterations": iterations,
        "max_lambda": max_lambda,
        "lambda": lam,
        "distance": eng.d,
        "state": rng.getstate(),
        "trace": rows,
    }


def offspring_fitness(kind, n, clause_vars, clause_signs, occ_offsets, occ_clauses, x, flips):
    fl = np.asarray(flips, dtype=np.int64)
    if fl.ndim != 2:
        raise ValueError("flips must be a 2-d index matrix")
    if fl.size and (fl.min() < 0 or fl.max() >= n):
        raise ValueError("flip index out of range")
    eng = Engine(kind, n, clause_vars, clause_signs, occ_offsets, occ_clauses, x, x)
    return np.array([eng.fitness_with(row) for row in fl.tolist()], dtype=np.int64)
