# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled optimizer kernel.

Mirrors ``_pykernel`` draw for draw: xoshiro256**, inverse-transform
binomial, Floyd sampling, reservoir tie-breaking.  Any change here must be
made there too; ``tests/test_kernel_parity.py`` enforces it.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, floor, pow
from libc.stdint cimport uint64_t, uint32_t, int64_t, int32_t, uint8_t

cnp.import_array()

NAME = "cython"

cdef enum:
    KIND_ONEMAX = 0
    KIND_CNF = 1
    ALGO_FIXED = 0
    ALGO_ADAPTIVE = 1
    ALGO_OPO = 2

cdef double TWO_POW_MINUS_53 = 1.0 / 9007199254740992.0
cdef double BINOMIAL_DIRECT_MEAN_LIMIT = 64.0


cdef struct Rng:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline uint64_t rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t next_u64(Rng* r) noexcept nogil:
    cdef uint64_t result = rotl(r.s1 * 5, 7) * 9
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = rotl(r.s3, 45)
    return result


cdef inline double next_double(Rng* r) noexcept nogil:
    return <double>(next_u64(r) >> 11) * TWO_POW_MINUS_53


cdef inline uint64_t randbelow(Rng* r, uint64_t k) noexcept nogil:
    # (2^64 - k) % k computed in 64-bit arithmetic
    cdef uint64_t threshold = (<uint64_t>0 - k) % k
    cdef uint64_t v
    while True:
        v = next_u64(r)
        if v >= threshold:
            return v % k


cdef int64_t binomial(Rng* r, int64_t n, double p) noexcept nogil:
    cdef double u, pmf, cdf, ratio, lp, lr
    cdef int64_t k
    if p == 0.0 or n == 0:
        return 0
    if p == 1.0:
        return n
    u = next_double(r)
    if <double>n * p <= BINOMIAL_DIRECT_MEAN_LIMIT:
        pmf = exp(<double>n * log1p(-p))
        if pmf > 0.0:
            ratio = p / (1.0 - p)
            k = 0
            cdf = pmf
            while u >= cdf and k < n:
                pmf *= (<double>(n - k) / (<double>k + 1.0)) * ratio
                k += 1
                cdf += pmf
            return k
    lp = <double>n * log1p(-p)
    lr = log(p) - log1p(-p)
    cdf = 0.0
    k = 0
    while True:
        cdf += exp(lp)
        if u < cdf or k == n:
            return k
        lp += log(<double>(n - k) / (<double>k + 1.0)) + lr
        k += 1


cdef inline void floyd(Rng* r, int64_t n, int64_t k, int64_t* out,
                       int64_t* mark, int64_t epoch) noexcept nogil:
    # mark[i] == epoch  <=>  i already chosen in this call
    cdef int64_t j, t, idx = 0
    for j in range(n - k, n):
        t = <int64_t>randbelow(r, <uint64_t>(j + 1))
        if mark[t] == epoch:
            t = j
        mark[t] = epoch
        out[idx] = t
        idx += 1


cdef inline int64_t round_half_up_c(double lam) noexcept nogil:
    cdef double f = floor(lam)
    if lam - f >= 0.5:
        return <int64_t>f + 1
    return <int64_t>f


def round_half_up(double lam):
    return round_half_up_c(lam)


cdef Rng rng_from_state(state):
    cdef Rng r
    r.s0 = <uint64_t>state[0]
    r.s1 = <uint64_t>state[1]
    r.s2 = <uint64_t>state[2]
    r.s3 = <uint64_t>state[3]
    return r


cdef tuple rng_state(Rng* r):
    return (r.s0, r.s1, r.s2, r.s3)


def generate_clauses(int64_t n, int64_t m, planted, state):
    cdef Rng r = rng_from_state(state)
    cdef const uint8_t[::1] pl = np.ascontiguousarray(planted, dtype=np.uint8)
    cv_arr = np.empty((m, 3), dtype=np.int32)
    cs_arr = np.empty((m, 3), dtype=np.uint8)
    cdef int32_t[:, ::1] cv = cv_arr
    cdef uint8_t[:, ::1] cs = cs_arr
    cdef int64_t i, j, t, a, b, c, tmp
    cdef int64_t chosen[3]
    cdef int64_t idx
    cdef uint64_t pattern, forbidden
    with nogil:
        for i in range(m):
            idx = 0
            for j in range(n - 3, n):
                t = <int64_t>randbelow(&r, <uint64_t>(j + 1))
                if (idx > 0 and chosen[0] == t) or (idx > 1 and chosen[1] == t):
                    t = j
                chosen[idx] = t
                idx += 1
            a = chosen[0]
            b = chosen[1]
            c = chosen[2]
            if a > b:
                tmp = a; a = b; b = tmp
            if b > c:
                tmp = b; b = c; c = tmp
            if a > b:
                tmp = a; a = b; b = tmp
            forbidden = (1 - pl[a]) | ((1 - pl[b]) << 1) | ((1 - pl[c]) << 2)
            pattern = randbelow(&r, 8)
            while pattern == forbidden:
                pattern = randbelow(&r, 8)
            cv[i, 0] = <int32_t>a
            cv[i, 1] = <int32_t>b
            cv[i, 2] = <int32_t>c
            cs[i, 0] = pattern & 1
            cs[i, 1] = (pattern >> 1) & 1
            cs[i, 2] = (pattern >> 2) & 1
    return cv_arr, cs_arr, rng_state(&r)


cdef struct Occ:
    # one clause as seen from the occurrence list of one of its variables
    int32_t a
    int32_t b
    int32_t c
    uint32_t signs      # bit j = sign of the j-th variable (1 = positive literal)


cdef struct Eng:
    int kind
    int64_t n
    int64_t m
    uint8_t* x
    const uint8_t* target
    const int64_t* offsets
    const Occ* occ
    uint8_t* flipped    # scratch marks, all zero between calls
    const uint8_t* zeros
    int64_t* mark
    int64_t mark_epoch
    int64_t fitness
    int64_t max_fitness
    int64_t d


cdef inline int64_t occ_unsat(const uint8_t* x, const uint8_t* fl, const Occ* o) noexcept nogil:
    # branch-free: a clause is unsatisfied iff each literal disagrees with its sign
    cdef uint32_t sg = o.signs
    return ((x[o.a] ^ fl[o.a] ^ (sg & 1)) & (x[o.b] ^ fl[o.b] ^ ((sg >> 1) & 1))
            & (x[o.c] ^ fl[o.c] ^ (sg >> 2)))


cdef int64_t fitness_with(Eng* e, int64_t* flips, int64_t k) noexcept nogil:
    cdef int64_t f, i, j, q, delta, skip
    cdef const Occ* o
    cdef const uint8_t* zero = e.zeros
    cdef const uint8_t* x = e.x
    cdef uint8_t* fl = e.flipped
    if e.kind == KIND_ONEMAX:
        f = e.fitness
        for q in range(k):
            f += 1 - 2 * <int64_t>x[flips[q]]
        return f
    if k == 0:
        return e.fitness
    for q in range(k):
        fl[flips[q]] = 1
    delta = 0
    for q in range(k):
        i = flips[q]
        for j in range(e.offsets[i], e.offsets[i + 1]):
            o = &e.occ[j]
            # visit each touched clause once: at its smallest flipped variable
            skip = ((o.a < i) & fl[o.a]) | ((o.b < i) & fl[o.b])
            delta += (occ_unsat(x, zero, o) - occ_unsat(x, fl, o)) * (1 - skip)
    for q in range(k):
        fl[flips[q]] = 0
    return e.fitness + delta


cdef void apply_flips(Eng* e, int64_t* flips, int64_t k, int64_t new_fitness) noexcept nogil:
    cdef int64_t q, i
    for q in range(k):
        i = flips[q]
        if e.x[i] == e.target[i]:
            e.d += 1
        else:
            e.d -= 1
        e.x[i] ^= 1
    e.fitness = new_fitness


cdef class _Engine:
    """Owns the arrays behind an ``Eng`` struct."""

    cdef Eng e
    cdef object x_arr, t_arr, off_arr, occ_arr, flipped_arr, zeros_arr, mark_arr

    def __cinit__(self, int kind, int64_t n, clause_vars, clause_signs, occ_offsets, occ_clauses,
                  target, x0):
        self.x_arr = np.ascontiguousarray(x0, dtype=np.uint8).copy()
        self.t_arr = np.ascontiguousarray(target, dtype=np.uint8)
        cv_arr = np.ascontiguousarray(clause_vars, dtype=np.int32).reshape(-1, 3)
        cs_arr = np.ascontiguousarray(clause_signs, dtype=np.uint8).reshape(-1, 3)
        cdef int64_t m = cv_arr.shape[0] if kind == KIND_CNF else 0
        off_arr = np.ascontiguousarray(occ_offsets, dtype=np.int64)
        if kind != KIND_CNF or off_arr.shape[0] < n + 1:
            off_arr = np.zeros(n + 1, dtype=np.int64)
        occ_idx = np.ascontiguousarray(occ_clauses, dtype=np.int64)
        # inline the clauses into the occurrence lists: 4 x int32 per entry
        occ_arr = np.zeros((max(occ_idx.shape[0], 1), 4), dtype=np.int32)
        if kind == KIND_CNF and occ_idx.shape[0]:
            occ_arr[:, :3] = cv_arr[occ_idx]
            signs = cs_arr.astype(np.int32)
            occ_arr[:, 3] = (signs[:, 0] | (signs[:, 1] << 1) | (signs[:, 2] << 2))[occ_idx]
        self.off_arr, self.occ_arr = off_arr, occ_arr
        self.flipped_arr = np.zeros(n, dtype=np.uint8)
        self.zeros_arr = np.zeros(n, dtype=np.uint8)
        self.mark_arr = np.zeros(n, dtype=np.int64)

        cdef uint8_t[::1] x_view = self.x_arr
        cdef const uint8_t[::1] t_view = self.t_arr
        cdef const int64_t[::1] off_view = self.off_arr
        cdef const int32_t[:, ::1] occ_view = self.occ_arr
        cdef uint8_t[::1] fl_view = self.flipped_arr
        cdef const uint8_t[::1] z_view = self.zeros_arr
        cdef int64_t[::1] mark_view = self.mark_arr

        cdef Eng* e = &self.e
        e.kind = kind
        e.n = n
        e.m = m
        e.x = &x_view[0]
        e.target = &t_view[0]
        e.offsets = &off_view[0]
        e.occ = <const Occ*>&occ_view[0, 0]
        e.flipped = &fl_view[0]
        e.zeros = &z_view[0]
        e.mark = &mark_view[0]
        e.mark_epoch = 0

        cdef int64_t i
        e.d = 0
        for i in range(n):
            if e.x[i] != e.target[i]:
                e.d += 1
        if kind == KIND_CNF:
            x = self.x_arr
            lit_true = x[cv_arr] == cs_arr
            e.fitness = int(np.count_nonzero(lit_true.any(axis=1)))
            e.max_fitness = m
        else:
            e.fitness = int(np.count_nonzero(self.x_arr))
            e.max_fitness = n


def offspring_fitness(int kind, int64_t n, clause_vars, clause_signs, occ_offsets, occ_clauses,
                      x, flips):
    """Fitness of ``x`` with each row of the ``(K, L)`` index matrix ``flips`` toggled."""
    cdef _Engine eng = _Engine(kind, n, clause_vars, clause_signs, occ_offsets, occ_clauses, x, x)
    fl = np.ascontiguousarray(flips, dtype=np.int64)
    if fl.ndim != 2:
        raise ValueError("flips must be a 2-d index matrix")
    cdef int64_t K = fl.shape[0], L = fl.shape[1], q
    out = np.empty(K, dtype=np.int64)
    if K == 0:
        return out
    if L == 0:
        out[:] = eng.e.fitness
        return out
    if fl.min() < 0 or fl.max() >= n:
        raise ValueError("flip index out of range")
    cdef const int64_t[:, ::1] fv = fl
    cdef int64_t[::1] ov = out
    with nogil:
        for q in range(K):
            ov[q] = fitness_with(&eng.e, <int64_t*>&fv[q, 0], L)
    return out


def run_engine(int kind, int64_t n, clause_vars, clause_signs, occ_offsets, occ_clauses,
               target, x0, state, int algo, double lam0, double lam_cap, double F, int U,
               int64_t budget, bint trace, int64_t trace_every):
    cdef Rng r = rng_from_state(state)
    cdef _Engine eng = _Engine(kind, n, clause_vars, clause_signs, occ_offsets, occ_clauses, target, x0)
    cdef Eng e = eng.e
    x_arr = eng.x_arr
    buf_arr = np.zeros(3 * n + 3, dtype=np.int64)
    cdef int64_t[::1] buf_view = buf_arr
    cdef int64_t i

    # three scratch slices: current mutant, best mutant, current/best crossover child
    cdef int64_t* cur = &buf_view[0]
    cdef int64_t* best = &buf_view[n + 1]
    cdef int64_t* work = &buf_view[2 * n + 2]
    cdef int64_t* swap
    cdef int64_t* ybuf
    ybuf_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] ybuf_view = ybuf_arr
    ybuf = &ybuf_view[0]

    cdef int64_t evaluations = 1
    cdef int64_t iterations = 0
    cdef double lam = lam0
    cdef double max_lambda = lam0
    cdef double growth = pow(F, 1.0 / (U - 1))
    cdef double p, cbias
    cdef int64_t lam_int, ell, q, best_f, best_y, ties, f, k_sel, k_y, fy
    cdef int outcome
    cdef int64_t every = trace_every if trace_every > 0 else 1
    rows = []

    while e.fitness < e.max_fitness and evaluations < budget:
        if trace and iterations % every == 0:
            rows.append((iterations + 1, evaluations, e.d, lam))
        iterations += 1
        with nogil:
            if algo == ALGO_OPO:
                ell = binomial(&r, n, 1.0 / <double>n)
                e.mark_epoch += 1
                floyd(&r, n, ell, cur, e.mark, e.mark_epoch)
                f = fitness_with(&e, cur, ell)
                if f >= e.fitness:
                    apply_flips(&e, cur, ell, f)
                evaluations += 1
                continue

            lam_int = round_half_up_c(lam)
            p = lam / <double>n
            if p > 1.0:
                p = 1.0
            cbias = 1.0 / lam
            ell = binomial(&r, n, p)

            best_f = -1
            ties = 0
            for q in range(lam_int):
                e.mark_epoch += 1
                floyd(&r, n, ell, cur, e.mark, e.mark_epoch)
                f = fitness_with(&e, cur, ell)
                if f > best_f:
                    best_f = f
                    ties = 1
                    swap = best; best = cur; cur = swap
                elif f == best_f:
                    ties += 1
                    if randbelow(&r, <uint64_t>ties) == 0:
                        swap = best; best = cur; cur = swap

            best_y = -1
            ties = 0
            k_y = 0
            for q in range(lam_int):
                k_sel = 0
                for i in range(ell):
                    if next_double(&r) < cbias:
                        work[k_sel] = best[i]
                        k_sel += 1
                f = fitness_with(&e, work, k_sel)
                if f > best_y:
                    best_y = f
                    ties = 1
                    swap = ybuf; ybuf = work; work = swap
                    k_y = k_sel
                elif f == best_y:
                    ties += 1
                    if randbelow(&r, <uint64_t>ties) == 0:
                        swap = ybuf; ybuf = work; work = swap
                        k_y = k_sel

            evaluations += 2 * lam_int
            if best_y > e.fitness:
                outcome = 1
            elif best_y == e.fitness:
                outcome = 0
            else:
                outcome = -1

            if algo == ALGO_FIXED:
                if outcome >= 0:
                    apply_flips(&e, ybuf, k_y, best_y)
            else:
                if outcome == 1:
                    apply_flips(&e, ybuf, k_y, best_y)
                    lam = lam / F
                    if lam < 1.0:
                        lam = 1.0
                else:
                    if outcome == 0:
                        apply_flips(&e, ybuf, k_y, best_y)
                    lam = lam * growth
                    if lam > lam_cap:
                        lam = lam_cap
                if lam > max_lambda:
                    max_lambda = lam

    return {
        "x": x_arr,
        "fitness": e.fitness,
        "evaluations": evaluations,
        "iterations": iterations,
        "max_lambda": max_lambda,
        "lambda": lam,
        "distance": e.d,
        "state": rng_state(&r),
        "trace": rows,
    }
