import csv
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from onell.analysis import (
    REPORT_COLUMNS,
    EmptyOffspringSet,
    avg_fitness,
    avg_fitness_gap,
    check_well_behaved,
    enumerate_or_sample_offspring,
    offspring_set_size,
    recommended_cap,
    sat_probability,
    wilson_radius,
    write_report_csv,
)
from onell.core import BitString, RandomSource
from onell.problems import random_planted_instance


def brute_sat_ratio(n: int, d: int) -> Fraction:
    """Fraction of the clauses satisfied by all-ones that an x with d zeros satisfies."""
    x = [0] * d + [1] * (n - d)
    total = hit = 0
    for vs in itertools.combinations(range(n), 3):
        for signs in itertools.product((0, 1), repeat=3):
            if not any(signs):  # the only pattern all-ones falsifies
                continue
            total += 1
            hit += any(x[v] == s for v, s in zip(vs, signs))
    return Fraction(hit, total)


# --- exact formulas ---------------------------------------------------------------


@pytest.mark.parametrize("n", [3, 4, 7, 10])
def test_sat_probability_brute_force(n):
    for d in range(n + 1):
        assert sat_probability(n, d) == brute_sat_ratio(n, d)


def test_sat_probability_examples():
    assert sat_probability(10, 0) == 1
    assert sat_probability(10, 10) == Fraction(6, 7)
    assert sat_probability(10, 3) == Fraction(755, 840)
    assert float(sat_probability(10, 3)) == pytest.approx(0.898810, abs=5e-7)


@given(st.integers(3, 500), st.data())
def test_sat_probability_real_projection_correctly_rounded(n, data):
    d = data.draw(st.integers(0, n))
    p = sat_probability(n, d)
    assert abs(Fraction(float(p)) - p) <= Fraction(math.ulp(float(p)))


@pytest.mark.parametrize("n, d", [(2, 0), (10, -1), (10, 11)])
def test_sat_probability_range_errors(n, d):
    with pytest.raises(ValueError):
        sat_probability(n, d)


@pytest.mark.parametrize("n", [3, 8, 50])
def test_sat_probability_monotone(n):
    values = [sat_probability(n, d) for d in range(n + 1)]
    for d in range(n):
        if n - d >= 3:
            assert values[d + 1] < values[d]
        else:
            assert values[d + 1] == values[d] == Fraction(6, 7)


def test_avg_fitness_examples():
    assert avg_fitness(10, 840, 0) == 840
    assert avg_fitness(10, 840, 3) == 755
    assert avg_fitness(10, 840, 10) == 720
    assert avg_fitness(10, 840, 3, exact=True) == Fraction(755)


def test_avg_fitness_gap_examples():
    assert avg_fitness_gap(10, 840, 3, 0) == 0
    assert avg_fitness_gap(10, 840, 3, 1) == 15
    # cross-check against enumeration
    oracle = 840 * (brute_sat_ratio(10, 3) - brute_sat_ratio(10, 4))
    assert avg_fitness_gap(10, 840, 3, 1, exact=True) == oracle


@pytest.mark.parametrize("n, d, ell", [(10, 8, 3), (10, -1, 1), (10, 2, -1)])
def test_avg_fitness_gap_range_errors(n, d, ell):
    with pytest.raises(ValueError):
        avg_fitness_gap(n, 100, d, ell)


@given(st.integers(3, 200), st.integers(0, 10**6), st.data())
def test_gap_telescopes(n, m, data):
    d = data.draw(st.integers(0, n))
    ell = data.draw(st.integers(0, n - d))
    total = avg_fitness_gap(n, m, d, ell, exact=True)
    assert total == sum(avg_fitness_gap(n, m, d + j, 1, exact=True) for j in range(ell))
    assert total == avg_fitness(n, m, d, exact=True) - avg_fitness(n, m, d + ell, exact=True)


def test_gap_scaling_probe():
    ratios = []
    for n in (50, 100, 200):
        m, d, ell = n * n, n // 10, 2
        ratios.append(avg_fitness_gap(n, m, d, ell) / (m * ell / n))
    assert all(0.3 <= r <= 3.0 for r in ratios)
    assert max(ratios) / min(ratios) < 1.2


@pytest.mark.parametrize("n", [40, 100, 400])
@pytest.mark.parametrize("frac", [0.0, 0.1, 0.25, 0.4])
def test_gap_constant_factor_envelope(n, frac):
    d = int(frac * n)
    m = 4 * n
    for ell in range(1, n // 10 + 1):
        r = avg_fitness_gap(n, m, d, ell) / (m * ell / n)
        assert 1 / 8 <= r <= 8


@pytest.mark.parametrize("frac", [0.1, 0.3, 0.5, 0.7])
def test_gap_ratio_tracks_agreeing_fraction(frac):
    # one more wrong bit loses exactly the clauses whose other two variables agree,
    # so the envelope constant shrinks like 3 (1 - d/n)^2 / 7 and dips below 1/8 at d = n/2
    n = 2000
    d = int(frac * n)
    one_step = avg_fitness_gap(n, 4 * n, d, 1, exact=True)
    assert one_step == Fraction(4 * n * math.comb(n - d - 1, 2), 7 * math.comb(n, 3))
    assert float(one_step) / 4 == pytest.approx(3 * (1 - frac) ** 2 / 7, rel=0.01)


# --- recommended cap ------------------------------------------------------------------


def test_recommended_cap_examples():
    assert recommended_cap(100, 100) == 1
    n = 2**13
    assert recommended_cap(n, int(4 * n * math.log(n))) == 2
    assert recommended_cap(16, 4096) == 4
    assert recommended_cap(16, 16 * 81) == 3  # exact fourth root, no float slip


def test_recommended_cap_bounded_by_log():
    # (m/n)^(1/4) huge, the logarithmic term binds
    assert recommended_cap(3, 3 * 10**12) == math.ceil(2 * math.log(4))


@given(st.integers(3, 10**4), st.integers(0, 10**7), st.integers(0, 10**7))
def test_recommended_cap_monotone_in_m(n, a, b):
    lo, hi = sorted((n + a, n + b))
    assert 1 <= recommended_cap(n, lo) <= recommended_cap(n, hi)


def test_recommended_cap_errors():
    with pytest.raises(ValueError):
        recommended_cap(10, 5)
    with pytest.raises(ValueError):
        recommended_cap(2, 100)


# --- offspring sets -------------------------------------------------------------------


def test_offspring_examples():
    x, planted = BitString("11100"), BitString("11111")
    bad = enumerate_or_sample_offspring(x, planted, 1, "bad")
    good = enumerate_or_sample_offspring(x, planted, 1, "good")
    assert bad.mode == "exact" and bad.size == 3
    assert sorted(bad) == [(0,), (1,), (2,)]
    assert good.size == 2 and sorted(good) == [(3,), (4,)]
    assert offspring_set_size(5, 2, 1, "good") == 2


def test_offspring_bitstrings():
    x, planted = BitString("11100"), BitString("11111")
    kids = list(enumerate_or_sample_offspring(x, planted, 2, "good").bitstrings())
    assert len(kids) == math.comb(5, 2) - math.comb(3, 2)
    assert all(sum(a != b for a, b in zip(k, x)) == 2 for k in kids)


def test_empty_bad_set_signalled():
    x, planted = BitString("11100"), BitString("11111")
    with pytest.raises(EmptyOffspringSet):
        enumerate_or_sample_offspring(x, planted, 4, "bad")


def test_offspring_argument_errors():
    x, planted = BitString("11100"), BitString("11111")
    with pytest.raises(ValueError):
        enumerate_or_sample_offspring(x, planted, 1, "ugly")
    with pytest.raises(ValueError):
        enumerate_or_sample_offspring(x, planted, 0, "bad")
    with pytest.raises(ValueError):
        enumerate_or_sample_offspring(x, planted, 1, "bad", force_sampling=True)  # no rng


@given(st.integers(0, 2**32), st.integers(1, 4))
def test_enumeration_matches_definition(seed, ell):
    rng = RandomSource(seed)
    n = 9
    planted = BitString.ones(n)
    x = planted.flipped(rng.sample_distinct(n, 1 + rng.randbelow(n - 1)))
    wrong = {i for i in range(n) if x[i] != planted[i]}
    all_sets = set(itertools.combinations(range(n), ell))
    expect_bad = {c for c in all_sets if not wrong & set(c)}
    for kind, expect in (("bad", expect_bad), ("good", all_sets - expect_bad)):
        if not expect:
            with pytest.raises(EmptyOffspringSet):
                enumerate_or_sample_offspring(x, planted, ell, kind)
            continue
        stream = enumerate_or_sample_offspring(x, planted, ell, kind)
        got = list(stream)
        assert set(got) == expect and len(got) == stream.size


def test_sampling_is_uniform_over_the_set():
    planted = BitString.ones(7)
    x = planted.flipped([1, 4])
    rng = RandomSource(3)
    for kind in ("bad", "good"):
        stream = enumerate_or_sample_offspring(x, planted, 2, kind, rng=rng, samples=20_000,
                                               force_sampling=True)
        assert stream.mode == "sampled"
        counts = {}
        for c in stream:
            key = tuple(sorted(c))
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == stream.size
        assert stats.chisquare(list(counts.values())).pvalue > 1e-3


def test_sampling_above_cap():
    planted = BitString.ones(30)
    x = planted.flipped([0])
    stream = enumerate_or_sample_offspring(x, planted, 3, "bad", cap=100, rng=RandomSource(1), samples=50)
    flips = list(stream)
    assert stream.mode == "sampled" and len(flips) == 50
    assert all(0 not in f and len(set(f)) == 3 for f in flips)


# --- well-behavedness ------------------------------------------------------------------


def brute_violations(inst, x, ell):
    """Independent count of the two violation kinds by direct enumeration."""
    n, m = inst.n, inst.m
    d = sum(a != b for a, b in zip(x, inst.planted))
    fx = inst.problem.evaluate(x)
    t = m * (sat_probability(n, d) - sat_probability(n, d + ell - 1))
    wrong = {i for i in range(n) if x[i] != inst.planted[i]}
    bad = good = bad_v = good_v = 0
    for c in itertools.combinations(range(n), ell):
        loss = fx - inst.problem.evaluate(x.flipped(c))
        if wrong & set(c):
            good += 1
            good_v += loss >= t
        else:
            bad += 1
            bad_v += loss <= t
    return bad, bad_v, good, good_v


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_checker_against_brute_force(seed):
    inst = random_planted_instance(10, 80, seed)
    rng = RandomSource(seed)
    x = inst.planted.flipped(rng.sample_distinct(10, 3))
    rep = check_well_behaved(inst, x, 4)
    assert rep.d == 3 and [v.ell for v in rep.per_ell] == [1, 2, 3, 4]
    for v in rep.per_ell:
        bad, bad_v, good, good_v = brute_violations(inst, x, v.ell)
        assert (v.bad_size, v.bad_violations, v.good_size, v.good_violations) == (bad, bad_v, good, good_v)
        assert v.bad_ok == (bad_v * 4 <= bad)
        assert v.good_ok == (2 * good_v <= good)
        assert v.verdict == ("pass" if v.bad_ok and v.good_ok else "fail")
    assert rep.well_behaved == all(v.verdict == "pass" for v in rep.per_ell)


def test_cap_one_bad_condition_vacuous():
    inst = random_planted_instance(12, 40, 7)
    x = inst.planted.flipped([0, 5, 9])
    rep = check_well_behaved(inst, x, 1)
    (v,) = rep.per_ell
    assert v.bad_ok and v.bad_bound == 1.0


def test_ell_one_threshold_is_zero():
    inst = random_planted_instance(12, 200, 8)
    x = inst.planted.flipped([2, 3])
    v = check_well_behaved(inst, x, 3).per_ell[0]
    assert v.ell == 1 and v.threshold == 0.0


def test_checker_preconditions():
    inst = random_planted_instance(8, 40, 1)
    with pytest.raises(ValueError):
        check_well_behaved(inst, inst.planted, 2)  # d = 0
    with pytest.raises(ValueError):
        check_well_behaved(inst, inst.planted.complement(), 2)  # d = n
    with pytest.raises(ValueError):
        check_well_behaved(inst, BitString("101"), 2)
    with pytest.raises(ValueError):
        check_well_behaved(inst, inst.planted.flipped([0]), 0)


def test_checker_skips_out_of_range_ell():
    inst = random_planted_instance(6, 40, 1)
    x = inst.planted.flipped([0, 1, 2, 3, 4])  # d = 5, only one agreeing bit
    rep = check_well_behaved(inst, x, 3)
    assert rep.per_ell[0].mode == "exact"
    assert "bad set empty" in rep.per_ell[1].note and rep.per_ell[1].verdict != "skip"
    assert rep.per_ell[2].verdict == "skip"  # d + ell - 1 = 7 > n


def test_sampled_agrees_with_exact():
    inst = random_planted_instance(16, 600, 4)
    x = inst.planted.flipped([1, 5, 9, 12, 14])
    exact = check_well_behaved(inst, x, 3)
    sampled = check_well_behaved(inst, x, 3, samples=4000, rng=RandomSource(9), force_sampling=True)
    for e, s in zip(exact.per_ell, sampled.per_ell):
        assert s.mode == "sampled" and s.samples == 8000 and s.ci_radius > 0
        for pe, ps in ((e.bad_frac, s.bad_frac), (e.good_frac, s.good_frac)):
            se = math.sqrt(max(pe * (1 - pe), 1e-12) / 4000)
            assert abs(ps - pe) <= 3 * se + 1e-12


def test_report_csv(tmp_path):
    inst = random_planted_instance(12, 300, 3)
    reps = [check_well_behaved(inst, inst.planted.flipped([i, i + 1]), 2) for i in range(3)]
    path = tmp_path / "report.csv"
    write_report_csv(reps, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0].keys()) == REPORT_COLUMNS
    assert len(rows) == 6
    assert {r["verdict"] for r in rows} <= {"pass", "fail", "skip"}
    assert all(r["mode"] == "exact" and float(r["ci_radius"]) == 0 for r in rows)


def test_wilson_radius():
    assert wilson_radius(0, 0) == 0.0
    r10, r1000 = wilson_radius(5, 10), wilson_radius(500, 1000)
    assert r1000 < r10 < 0.5
    # the interval is a valid probability range around p even at the edges
    assert 0 < wilson_radius(0, 100) < 0.05


def test_high_density_points_pass_quickly():
    # a small instance of the high-density regime: nearly every point passes
    passes = 0
    for k in range(2):
        inst = random_planted_instance(16, 4096, 500 + k)
        rng = RandomSource(k)
        for _ in range(5):
            d = 4 + rng.randbelow(5)
            x = inst.planted.flipped(rng.sample_distinct(16, d))
            passes += check_well_behaved(inst, x, 2).well_behaved
    assert passes >= 9
    assert np.isfinite(passes)
