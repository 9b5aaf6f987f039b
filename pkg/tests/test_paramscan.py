import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from puzzlepieces import paramscan as ps
from puzzlepieces import quad1d as q1
from puzzlepieces.errors import BudgetExceeded, HypothesisViolated, PrecisionExhausted

from oracles import en_count_dp, pliss_brute, translation_measure_brute


# ---------------------------------------------------------------------------
# window roots

def test_roots_decrease_inside_range():
    roots = [ps.root_a_m(m) for m in range(1, 21)]
    assert all(-2.0 <= r <= -1.5 for r in roots)
    assert all(x > y for x, y in zip(roots, roots[1:]))


def test_root_residual():
    for m in (1, 5, 12):
        a = ps.root_a_m(m)
        assert abs(a - q1.alpha_m(a, m)) <= 1e-12


def test_root_scaling():
    for m in range(3, 13):
        r = (ps.root_a_m(m) + 2) / (ps.root_a_m(m + 1) + 2)
        assert 3.5 <= r <= 4.5


def test_root_errors():
    with pytest.raises(ValueError):
        ps.root_a_m(0)
    with pytest.raises(PrecisionExhausted):
        ps.root_a_m(21)


@pytest.mark.parametrize("M", [6, 8, 10, 12])
def test_window_matches_return_time(M):
    lo, hi = ps.window(M)
    for f in (0.1, 0.5, 0.9):
        assert q1.build_context(lo + f * (hi - lo)).M == M


# ---------------------------------------------------------------------------
# scans

@pytest.fixture(scope="module")
def scan():
    lo, hi = ps.window(10)
    return ps.scan_sr(lo, hi, 3, 2000)


def test_scan_depth_zero_and_monotone(scan):
    assert scan.fraction(0) == 1.0
    fr = [scan.fraction(k) for k in range(4)]
    assert all(x >= y for x, y in zip(fr, fr[1:]))
    assert fr[3] > 0
    for r in scan.records:
        passed = [r.status(k) == q1.PASS for k in range(4)]
        assert passed == sorted(passed, reverse=True)


def test_scan_counts_exclude_indeterminate(scan):
    c = scan.counts(3)
    assert sum(c.values()) == len(scan.records)
    assert scan.fraction(3) == pytest.approx(c[q1.PASS] / (c[q1.PASS] + c[q1.FAIL]))


def test_scan_runs_partition_grid(scan):
    runs = scan.runs()
    assert runs[0][0] == 0 and runs[-1][1] == len(scan.records) - 1
    for (s0, e0, _), (s1, _, _) in zip(runs, runs[1:]):
        assert s1 == e0 + 1


def test_scan_threads_do_not_change_results():
    lo, hi = ps.window(8)
    one = ps.scan_sr(lo, hi, 2, 64, threads=1)
    four = ps.scan_sr(lo, hi, 2, 64, threads=4)
    assert one.records == four.records


def test_scan_rejects_two_windows():
    with pytest.raises(ValueError):
        ps.scan_sr(ps.window(9)[0], ps.window(8)[1], 1, 50)
    with pytest.raises(ValueError):
        ps.scan_sr(-1.9, -1.95, 1, 10)


def test_refine_transitions_bracket_changes():
    lo, hi = ps.window(10)
    res = ps.scan_sr(lo, hi, 1, 40)
    for left, right, sl, sr in ps.refine_transitions(res, 1, iters=20):
        assert left < right and sl != sr
        assert ps.scan_point(left, 1).status(1) == sl
        assert ps.scan_point(right, 1).status(1) == sr


# ---------------------------------------------------------------------------
# surviving set

@pytest.fixture(scope="module")
def sr_ctx():
    lo, hi = ps.window(10)
    return q1.build_context(lo + 0.2 * (hi - lo))


def test_pesin_measure_monotone(sr_ctx):
    assert ps.pesin_set_measure(sr_ctx, 0).measure == 1.0
    values = [ps.pesin_set_measure(sr_ctx, n) for n in (4, 8, 10, 12)]
    assert not any(v.truncated for v in values)
    ms = [v.measure for v in values]
    assert all(x >= y - 1e-12 for x, y in zip(ms, ms[1:]))
    assert 0 < ms[-1] < 1


def test_pesin_gap_set(sr_ctx):
    res = ps.pesin_set_measure(sr_ctx, 10)
    gs = res.gap_set(sr_ctx)
    assert gs.hull == sr_ctx.I_eps
    total = ps.gap_lp_sum(gs, 0.0)
    assert total == pytest.approx(gs.diameter - sum(b - a for a, b in res.intervals), abs=1e-12)
    assert math.isfinite(ps.gap_lp_sum(gs, 2 ** (-math.sqrt(10) - 3)))


def test_gap_lp_sum_examples():
    gs = ps.GapSet((0.0, 1.0), [(0.2, 0.3), (0.5, 0.55)])
    assert ps.gap_lp_sum(gs, 0.0) == pytest.approx(0.15)
    single = ps.GapSet((0.0, 1.0), [(0.2, 0.26)])
    assert ps.gap_lp_sum(single, 0.3) == pytest.approx(0.06 ** 0.7)
    with pytest.raises(ValueError):
        ps.gap_lp_sum(gs, 1.0)


def test_gapset_validation_and_text():
    with pytest.raises(ValueError):
        ps.GapSet((0.0, 1.0), [(0.2, 0.4), (0.3, 0.5)])
    with pytest.raises(ValueError):
        ps.GapSet((0.0, 1.0), [(0.9, 1.2)])
    gs = ps.GapSet((0.0, 1.0), [(0.5, 0.6), (0.1, 0.2)])
    assert ps.GapSet.from_text(gs.to_text()) == gs
    assert gs.components() == [(0.0, 0.1), (0.2, 0.5), (0.6, 1.0)]
    assert gs.measure() == pytest.approx(0.8)


# ---------------------------------------------------------------------------
# translation inclusion

def test_single_point_translates_everywhere():
    Kt = ps.GapSet((0.0, 1.0), [(0.3, 0.4)])
    K = ps.GapSet.from_points([0.25])
    assert ps.translation_measure(K, Kt) == pytest.approx(Kt.measure())


def test_no_gaps():
    K = ps.GapSet.from_points([0.0, 0.03, 0.1])
    Kt = ps.GapSet((0.0, 1.0))
    assert ps.translation_measure(K, Kt) >= 0.9 - 1e-12


def test_five_points_three_gaps():
    K = ps.GapSet.from_points(np.linspace(0.0, 0.1, 5))
    Kt = ps.GapSet((0.0, 1.0), [(0.3, 0.3001), (0.5, 0.5001), (0.7, 0.7001)])
    r = ps.bm13_inclusion(K, Kt, 0.5, 5.0)
    assert r.cond_ii
    assert r.measure > 0 and r.sweep_measure > 0


def test_translation_measure_matches_sweep():
    rng = random.Random(5)
    for _ in range(20):
        K = ps.GapSet.from_points(sorted(rng.uniform(0, 0.05) for _ in range(4)))
        cuts = sorted(rng.uniform(0.05, 0.95) for _ in range(6))
        Kt = ps.GapSet((0.0, 1.0), [(cuts[i], cuts[i] + 0.002) for i in range(0, 6, 2)])
        exact = ps.translation_measure(K, Kt)
        brute = translation_measure_brute(K.components(), K.hull, Kt.hull, Kt.gaps, n=50_000)
        assert exact == pytest.approx(brute, abs=2e-4)


def test_greedy_cover():
    assert ps.greedy_cover_count([(0.0, 1.0)], 0.25) == 2
    assert ps.greedy_cover_count([(0.0, 0.0), (0.1, 0.1), (0.6, 0.6)], 0.1) == 2
    assert ps.greedy_cover_count([(0.0, 0.0), (0.3, 0.3)], 0.1) == 2


def test_bm13_rejects_bad_d():
    K = ps.GapSet.from_points([0.0])
    with pytest.raises(ValueError):
        ps.bm13_inclusion(K, K, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Pliss times

def test_pliss_constant_sequence():
    assert ps.pliss_times([1.0] * 30, 2.0, 0.5, 1.0) == list(range(30))


def test_pliss_hypotheses():
    with pytest.raises(HypothesisViolated):
        ps.pliss_times([3.0, 0.0], 2.0, 0.5, 1.0)
    with pytest.raises(HypothesisViolated):
        ps.pliss_times([0.1, 0.1], 2.0, 0.5, 1.0)
    with pytest.raises(HypothesisViolated):
        ps.pliss_times([1.0], 2.0, 1.0, 0.5)


@given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=60), st.floats(0.05, 0.9))
def test_pliss_matches_brute(xs, c1):
    A, c2 = 2.0, 1.0
    if sum(xs) < c2 * len(xs) or c1 >= c2:
        return
    got = ps.pliss_times(xs, A, c1, c2)
    assert got == pliss_brute(xs, c1)
    assert len(got) >= ps.pliss_lower_bound(len(xs), A, c1, c2) - 1e-9


# ---------------------------------------------------------------------------
# signed compositions

def test_count_EN_empty_for_small_N():
    # at M = 8 the large parts must total 5, so N = 5 holds only +-5
    assert [ps.count_EN(N, 8)[0] for N in range(2, 7)] == [0, 0, 0, 2, 0]


def test_count_EN_matches_dp():
    for M in (6, 8, 10):
        for N in range(2, 21):
            assert ps.count_EN(N, M)[0] == en_count_dp(N, M)


def test_count_EN_below_bound():
    for N in range(2, 21):
        count, bound = ps.count_EN(N, 8)
        assert count <= bound


def test_count_EN_budget():
    with pytest.raises(BudgetExceeded):
        ps.count_EN(30, 8)
