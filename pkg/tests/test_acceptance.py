"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import random
import time

import numpy as np
import pytest

from puzzlepieces import henon2d as h2
from puzzlepieces import paramscan as ps
from puzzlepieces import quad1d as q1
from puzzlepieces.divisibility import (
    LeftSequence, divides, favorable_divisors, gcd_nu, ultrametric_dist,
)
from puzzlepieces.symbolic import (
    Simple, SymbolicContext, Word, enumerate_letters, enumerate_words, in_first_alphabet, parse_word,
)

from oracles import leb_g_quad, naive_divides, pliss_brute, translation_measure_brute

RESULTS = []


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


M8 = SymbolicContext(8)
M10 = SymbolicContext(10)


@pytest.fixture(scope="module")
def corpus():
    letters = enumerate_letters(M8, 3, 10, require_common=False)
    words = sorted(enumerate_words(M8, 10, letters=letters), key=lambda w: (w.order, str(w)))
    return words


@pytest.fixture(scope="module")
def naive_matrix(corpus):
    t0 = time.perf_counter()
    n = len(corpus)
    D = np.zeros((n, n), dtype=bool)
    for i, g in enumerate(corpus):
        for j, d in enumerate(corpus):
            D[i, j] = naive_divides(g, d)
    return D, time.perf_counter() - t0


# ---------------------------------------------------------------------------

def test_criterion_01_divides_matches_naive(corpus, naive_matrix):
    D, t_naive = naive_matrix
    t0 = time.perf_counter()
    mismatches = 0
    for i, g in enumerate(corpus):
        for j, d in enumerate(corpus):
            if divides(g, d) != D[i, j]:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    n = len(corpus)
    report(1, mismatches == 0 and elapsed < 60,
           f"{n * n} pairs over {n} words (M=8, order<=10), {mismatches} mismatches, "
           f"{elapsed:.1f}s (oracle {t_naive:.1f}s)")


def test_criterion_02_gcd_matches_exhaustive(corpus, naive_matrix):
    D, _ = naive_matrix
    orders = np.array([w.order for w in corpus])
    mismatches = 0
    for i, g in enumerate(corpus):
        common = D[i][None, :] & D
        weighted = np.where(common, orders[None, :], -1)
        best = weighted.max(axis=1)
        arg = weighted.argmax(axis=1)
        for j, h in enumerate(corpus):
            got, nu = gcd_nu(g, h)
            if nu != best[j] or got != corpus[arg[j]] or got.order != nu:
                mismatches += 1
    n = len(corpus)
    report(2, mismatches == 0, f"{n * n} pairs, {mismatches} mismatches against the exhaustive common divisor")


def test_criterion_03_order_axioms(corpus):
    rng = random.Random(2024)
    violations = []
    for _ in range(10_000):
        g, gp, gpp = (rng.choice(corpus) for _ in range(3))
        h = rng.choice(corpus[:200])
        if not divides(g, g):
            violations.append(("reflexive", g))
        if divides(g, gp) and divides(gp, g) and g != gp:
            violations.append(("antisymmetric", g, gp))
        if divides(g, gp) and divides(gp, gpp) and not divides(g, gpp):
            violations.append(("transitive", g, gp, gpp))
        if divides(g, gp) and (g.order < gp.order or (g.order == gp.order and g != gp)):
            violations.append(("order", g, gp))
        if divides(g, gp) and divides(g, gpp) and gp.order >= gpp.order and not divides(gp, gpp):
            violations.append(("chain", g, gp, gpp))
        if divides(g, gp) != divides(g + h, gp + h):
            violations.append(("right multiplication", g, gp, h))
        t, u, v = (LeftSequence(x) for x in (g, gp, gpp))
        for b in (0.01, 0.5):
            tv = ultrametric_dist(M8, t, v, b)
            bound = max(ultrametric_dist(M8, t, u, b), ultrametric_dist(M8, u, v, b))
            if tv > bound * (1 + 1e-12):
                violations.append(("ultrametric", g, gp, gpp, b))
    report(3, not violations, f"10000 random triples, {len(violations)} violations"
           + (f", first {violations[0]}" if violations else ""))


def test_criterion_04_favorable_divisors():
    rng = random.Random(99)
    letters = sorted(enumerate_letters(M10, 2, 40), key=lambda a: (a.order, str(a)))
    bad_unique = bad_gap = 0
    M = M10.M
    for _ in range(1000):
        t = LeftSequence(Word([rng.choice(letters) for _ in range(rng.randint(0, 6))]))
        fav = favorable_divisors(M10, t, t.suffix.order + 40)
        ones = [d for d in fav if len(d) == 1 and in_first_alphabet(d.letters[0])]
        if len(ones) != 1:
            bad_unique += 1
        for prev, cur in zip(fav, fav[1:]):
            if cur.order >= M + 2 and not (cur.order > prev.order >= cur.order / (M + 2)):
                bad_gap += 1
    report(4, bad_unique == 0 and bad_gap == 0,
           f"1000 sequences at M=10: {bad_unique} uniqueness and {bad_gap} gap-ratio violations")


def test_criterion_05_counting():
    lo, hi = ps.window(8)
    ctx = q1.build_context(lo + 0.2 * (hi - lo))
    words = q1.enumerate_realized_words(ctx, 14)
    orders = sorted(w.order for w in words)
    over = [(j, c) for j in range(15) if (c := sum(1 for o in orders if o <= j)) > 2 ** j]
    en_over = []
    feasible = 0
    for N in range(2, 21):
        count, bound = ps.count_EN(N, 8)
        feasible += count > 0
        if count > bound:
            en_over.append((N, count, bound))
    report(5, not over and not en_over,
           f"realized words by order <= j within 2^j for j<=14 ({len(words)} words); "
           f"E(N) within bound for N<=20 at M=8 ({feasible} non-empty)")


def test_criterion_06_root_scaling():
    t0 = time.perf_counter()
    roots = [ps.root_a_m(m) for m in range(3, 14)]
    ratios = [(x + 2) / (y + 2) for x, y in zip(roots, roots[1:])]
    decreasing = all(x > y for x, y in zip(roots, roots[1:]))
    elapsed = time.perf_counter() - t0
    ok = decreasing and all(3.5 <= r <= 4.5 for r in ratios) and elapsed < 5
    report(6, ok, f"ratios in [{min(ratios):.4f}, {max(ratios):.4f}], decreasing={decreasing}, {elapsed:.2f}s")


def test_criterion_07_dp_identity():
    rng = np.random.default_rng(7)
    a = rng.uniform(-2.0, -1.5, 10_000)
    beta = (1 + np.sqrt(1 - 4 * a)) / 2
    x = rng.uniform(-1, 1, 10_000) * beta * 0.999
    res = float(np.max(np.abs(q1.dp_identity_residual(a, x))))
    report(7, res <= 1e-9, f"max residual {res:.3e} over 10^4 samples")


def test_criterion_08_expansion():
    lo, hi = ps.window(10)
    margins = []
    strict = math.inf
    for f in (0.05, 0.2, 0.5, 0.8, 0.95):
        ctx = q1.build_context(lo + f * (hi - lo))
        margins.append(q1.verify_yoccoz_bounds(ctx, ["simple-expansion"], n_grid=2000)[0].margin)
        # the k = n term is identically 1; track the others separately
        for sg in (-1, 1):
            for n in range(2, ctx.M):
                p = q1.simple_piece(ctx, Simple(sg, n))
                logs = q1.log2_derivative_table(ctx, np.linspace(p.lo, p.hi, 2000), n)
                for k in range(n):
                    strict = min(strict, 2.0 ** float(np.min(logs[n] - logs[k] - (n - k) / 3.0)))
    report(8, min(margins) >= 1.0 and strict >= 1.0,
           f"worst expansion margin {min(margins):.6f} (k < n: {strict:.4f}) at M=10 (5 parameters)")


def test_criterion_09_scan():
    lo, hi = ps.window(10)
    coarse = ps.scan_sr(lo, hi, 3, 10_000, threads=4)
    fine = ps.scan_sr(lo, hi, 3, 20_000, threads=4)
    fr = [coarse.fraction(k) for k in range(4)]
    monotone = all(x >= y for x, y in zip(fr, fr[1:])) and all(
        [r.status(k) == q1.PASS for k in range(4)] == sorted([r.status(k) == q1.PASS for k in range(4)], reverse=True)
        for r in coarse.records)
    drift = abs(fine.fraction(3) - fr[3]) / fr[3]
    worst_ce = math.inf
    passing = [r for r in coarse.records if r.status(3) == q1.PASS]
    for r in passing:
        logs = q1.collet_eckmann(q1.build_context(r.a), 1000)
        worst_ce = min(worst_ce, float(logs[99:].min()))
    ok = len(passing) > 0 and monotone and drift < 0.05 and worst_ce >= 0.2
    report(9, ok, f"{len(passing)} passing of 10^4 (fraction {fr[3]:.4f}), monotone={monotone}, "
                  f"drift {100 * drift:.2f}%, worst CE slope {worst_ce:.3f}")


def test_criterion_10_pliss():
    rng = np.random.default_rng(10)
    failures = 0
    for _ in range(1000):
        k = int(rng.integers(1, 80))
        A = float(rng.uniform(1.0, 4.0))
        c2 = float(rng.uniform(0.2, A))
        c1 = float(rng.uniform(0.01, c2 * 0.99))
        X = rng.uniform(-A, A, k)
        X += max(0.0, c2 - X.mean())
        X = np.minimum(X, A)
        if X.sum() < c2 * k:
            X = np.full(k, c2)
        times = ps.pliss_times(X, A, c1, c2)
        tails_ok = all(X[n:m + 1].sum() >= c1 * (m - n + 1) - 1e-9 for n in times for m in range(n, k))
        if not tails_ok or len(times) < ps.pliss_lower_bound(k, A, c1, c2) - 1e-9:
            failures += 1
        elif times != pliss_brute(list(X), c1):
            failures += 1
    report(10, failures == 0, f"1000 random instances, {failures} failures")


def _bm13_instance(rng):
    n = rng.randint(1, 6)
    diam = rng.uniform(0.005, 0.08)
    pts = [0.0, diam] + [rng.uniform(0, diam) for _ in range(max(0, n - 2))]
    K = ps.GapSet.from_points(pts[:max(n, 1)])
    m = rng.randint(0, 6)
    cuts = sorted(rng.uniform(0.02, 0.98) for _ in range(m))
    gaps, prev = [], 0.0
    for c in cuts:
        ln = 10 ** rng.uniform(-5, -2.5)
        if c > prev and c + ln < 1.0:
            gaps.append((c, c + ln))
            prev = c + ln
    Kt = ps.GapSet((0.0, 1.0), gaps)
    return K, Kt, rng.uniform(0.2, 0.9), float(len(K.components()))


def test_criterion_11_bm13():
    rng = random.Random(13)
    checked = bad = 0
    while checked < 100:
        K, Kt, d, C_K = _bm13_instance(rng)
        r = ps.bm13_inclusion(K, Kt, d, C_K)
        if not (r.cond_i and r.cond_ii):
            continue
        checked += 1
        brute = translation_measure_brute(K.components(), K.hull, Kt.hull, Kt.gaps, n=20_000)
        if not (r.sweep_measure > 0 and r.measure > 0 and brute > 0):
            bad += 1
    report(11, bad == 0, f"{checked} configurations with both conditions, {bad} with zero translation measure")


def test_criterion_12_two_dimensional():
    lo, hi = ps.window(10)
    a = lo + 0.2 * (hi - lo)
    flat = h2.build_henon_context(a)
    quad = flat.quad
    words = ["s-2", "s+3", "s-10", "s+9", "s-3 s+2", "s+4 s-2 s-5"]
    err = 0.0
    # boxes
    named = h2.build_named_boxes(flat)
    for sg in (-1, 1):
        for n in range(2, 11):
            p = q1.realize_word(quad, parse_word(f"s{'+' if sg > 0 else '-'}{n}", quad.sym))
            bx = named[f"s{'+' if sg > 0 else '-'}{n}"]
            err = max(err, float(np.max(np.abs(bx.left - p.lo))), float(np.max(np.abs(bx.right - p.hi))))
    for text in words:
        w = parse_word(text, quad.sym)
        p, bx = q1.realize_word(quad, w), h2.realize_box(flat, w)
        err = max(err, float(np.max(np.abs(bx.left - p.lo))), float(np.max(np.abs(bx.right - p.hi))))
    # inverse branches
    for sg, bx in zip((-1, 1), h2.inverse_branches(flat, h2.y_eps(flat))):
        ends = sorted(q1.pullback(quad, (sg,), y) for y in (quad.alpha0, -quad.alpha0))
        err = max(err, float(np.max(np.abs(bx.left - ends[0]))), float(np.max(np.abs(bx.right - ends[1]))))
    # graph transform
    S = h2.HorizontalCurve.from_function(flat, lambda x: 0.01 * x, lambda x: 0.01 + 0 * x)
    err = max(err, float(np.max(np.abs(h2.graph_transform(flat, S, parse_word("s-2 s+3", quad.sym)).rho))))
    # parabolic segments
    inner = parse_word("s+3", quad.sym)
    seg = h2.parabolic_segments(flat, h2.HorizontalCurve.constant(flat), h2.y_eps(flat), h2.realize_box(flat, inner))
    for sg in (-1, 1):
        p = q1.parabolic_1d(quad, q1.identity_piece(quad), q1.realize_word(quad, inner), sg)
        lo_s, hi_s = sorted(seg.segments[sg])
        err = max(err, abs(lo_s - p.lo), abs(hi_s - p.hi))
    # affine-like chart
    box = h2.realize_box(flat, parse_word("s-3", quad.sym))
    rep = h2.affine_like(flat, box, ny=5, nx=33)
    expect = np.array([q1.pullback(quad, box.signs, x) for x in rep.x1])
    err = max(err, float(np.max(np.abs(rep.X0 - expect[None, :]))), float(np.max(np.abs(rep.Y1))))
    # strong regularity and critical position
    same_sr = [str(e.word) for e in h2.check_k_sr_2d(flat, 2).entries["e"]] == \
        [str(w) for w in q1.check_sr_1d(quad, 2).words]
    c1 = q1.check_sr_1d(quad, 1).words[0]
    same_sr = same_sr and h2.critical_position(flat, h2.HorizontalCurve.constant(flat),
                                               h2.realize_box(flat, c1)) == h2.IN_POSITION

    # perturbed: contraction and charts
    worst_c = 0.0
    worst_res = 0.0
    fd_ok = True
    simple = ["s-2", "s+2", "s-3", "s+4", "s-5", "s-2 s+2", "s+3 s-3", "s-2 s-2 s+4"]
    for family in ("henon", "poly"):
        ctx = h2.build_henon_context(a, family, 1e-6)
        S1 = h2.HorizontalCurve.constant(ctx, 0.0)
        S2 = h2.HorizontalCurve.from_function(ctx, lambda x: 0.02 + 0.01 * x, lambda x: 0.01 + 0 * x)
        d0 = S1.distance(S2)
        for text in simple:
            w = parse_word(text, ctx.quad.sym)
            ratio = h2.graph_transform(ctx, S1, w).distance(h2.graph_transform(ctx, S2, w)) / d0
            worst_c = max(worst_c, ratio / (100 * ctx.b ** (w.order / 3)))
            rep = h2.affine_like(ctx, h2.realize_box(ctx, w))
            worst_res = max(worst_res, rep.residual)
            fd_ok = fd_ok and rep.dx1_X0 <= rep.bound_dx1_X0
    ok = err <= 1e-10 and same_sr and worst_c <= 1 and worst_res <= 1e-8 and fd_ok
    report(12, ok, f"b=0 max deviation {err:.2e}, sr/critical agree={same_sr}; b=1e-6 worst contraction "
                   f"{worst_c:.2e} of allowance, chart residual {worst_res:.2e}, derivative bound held={fd_ok}")


def test_criterion_13_leb_g():
    rng = random.Random(17)
    lo, hi = ps.window(10)
    ctx = q1.build_context(lo + 0.3 * (hi - lo))
    b = ctx.beta
    worst = 0.0
    for _ in range(100):
        u, v = sorted(rng.uniform(-b * 0.999, b * 0.999) for _ in range(2))
        worst = max(worst, abs(q1.leb_g(ctx, [(u, v)]) - leb_g_quad(b, u, v)))
    report(13, worst <= 1e-10, f"max deviation {worst:.2e} over 100 intervals")
