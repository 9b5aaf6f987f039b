"""Parameter space harness: window roots, strong-regularity scans, the measure
of the surviving set, gap sums, translation inclusion, Pliss times and the
counting of signed compositions."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    BoundaryHit,
    BudgetExceeded,
    DegenerateParameter,
    DepthUnreachable,
    HypothesisViolated,
    NotAdmissible,
    PrecisionExhausted,
)
from .intervals import complement_in, merge_intervals
from .quad1d import (
    FAIL,
    INDETERMINATE,
    PASS,
    Itinerary,
    Piece1D,
    QuadContext,
    build_context,
    check_sr_1d,
    critical_itinerary,
    identity_piece,
    leb_g,
    realize_letter,
    realized_letters,
    star_1d,
)
from .symbolic import EMPTY, Word, in_Y0, is_common, is_complete, is_strongly_regular

Interval = Tuple[float, float]


# ---------------------------------------------------------------------------
# window roots

def _alpha_with_derivative(a: float, m: int) -> Tuple[float, float]:
    root = math.sqrt(1.0 - 4.0 * a)
    x = (1.0 - root) / 2.0
    dx = 1.0 / root
    for _ in range(m):
        x = -math.sqrt(-x - a)
        dx = (dx + 1.0) / (2.0 * abs(x))
    return x, dx


def root_a_m(m: int, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Unique root in [-2, -3/2] of a = alpha_m(a)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > 20:
        raise PrecisionExhausted("roots beyond m = 20 are below double resolution")
    F = lambda a: a - _alpha_with_derivative(a, m)[0]
    lo, hi = -2.0, -1.5
    if not (F(lo) < 0.0 < F(hi)):
        raise PrecisionExhausted(f"no sign change for m={m}")
    # bisection to a small bracket, then Newton kept inside the bracket
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        if F(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    for _ in range(max_iter):
        val, d = _alpha_with_derivative(a, m)
        f = a - val
        if f < 0.0:
            lo = a
        else:
            hi = a
        if f == 0.0:
            break
        nxt = a - f / (1.0 - d)
        if nxt == a:
            break
        if not (lo <= nxt <= hi):
            nxt = 0.5 * (lo + hi)
        a = nxt
    if abs(F(a)) > tol:
        raise PrecisionExhausted(f"residual {abs(F(a))} above {tol} for m={m}")
    return a


def window(M: int) -> Interval:
    """Parameters whose critical value first returns to I_eps after M steps."""
    return (root_a_m(M), root_a_m(M - 1))


# ---------------------------------------------------------------------------
# strong regularity scans

@dataclass
class ScanRecord:
    a: float
    M: int
    sr_depth: int
    statuses: Tuple[str, ...]
    words: Tuple[str, ...] = ()

    def status(self, k: int) -> str:
        if k <= 0:
            return PASS
        return self.statuses[k - 1]


@dataclass
class ScanResult:
    records: List[ScanRecord]
    depth: int

    def counts(self, k: int) -> Dict[str, int]:
        out = {PASS: 0, FAIL: 0, INDETERMINATE: 0}
        for r in self.records:
            out[r.status(k)] += 1
        return out

    def fraction(self, k: Optional[int] = None) -> float:
        """Share of decided grid points passing depth k (indeterminate excluded)."""
        k = self.depth if k is None else k
        c = self.counts(k)
        decided = c[PASS] + c[FAIL]
        return c[PASS] / decided if decided else float("nan")

    def runs(self) -> List[Tuple[int, int, Tuple[str, ...]]]:
        """Maximal runs of consecutive grid points sharing their critical words."""
        out = []
        start = 0
        for i in range(1, len(self.records) + 1):
            if i == len(self.records) or self.records[i].words != self.records[start].words:
                out.append((start, i - 1, self.records[start].words))
                start = i
        return out


def scan_point(a: float, K: int) -> ScanRecord:
    try:
        ctx = build_context(a)
    except DegenerateParameter:
        return ScanRecord(a, -1, 0, (INDETERMINATE,) * K)
    rep = check_sr_1d(ctx, K)
    statuses = tuple(rep.status_at(k) for k in range(1, K + 1))
    return ScanRecord(a, ctx.M, rep.depth_passed, statuses, tuple(str(w) for w in rep.words))


def _scan_chunk(args) -> List[ScanRecord]:
    values, K = args
    return [scan_point(a, K) for a in values]


def scan_grid(a_lo: float, a_hi: float, grid_n: int) -> np.ndarray:
    return a_lo + (a_hi - a_lo) * (np.arange(grid_n) + 0.5) / grid_n


def scan_sr(a_lo: float, a_hi: float, K: int, grid_n: int, threads: int = 1) -> ScanResult:
    """Evaluate the strong-regularity check on a midpoint grid of [a_lo, a_hi]."""
    if not a_lo < a_hi:
        raise ValueError("empty parameter interval")
    grid = [float(a) for a in scan_grid(a_lo, a_hi, grid_n)]
    if threads <= 1 or grid_n < 2 * threads:
        records = _scan_chunk((grid, K))
    else:
        size = -(-grid_n // threads)
        chunks = [(grid[i:i + size], K) for i in range(0, grid_n, size)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = [r for part in pool.map(_scan_chunk, chunks) for r in part]
    Ms = {r.M for r in records if r.M > 0}
    if len(Ms) > 1:
        raise ValueError(f"parameter interval spans several return times {sorted(Ms)}")
    return ScanResult(records, K)


def refine_transitions(result: ScanResult, k: Optional[int] = None,
                       iters: int = 30) -> List[Tuple[float, float, str, str]]:
    """Bisect every adjacent pair of grid points whose depth-k status differs."""
    k = result.depth if k is None else k
    out = []
    recs = result.records
    for left, right in zip(recs, recs[1:]):
        sl, sr = left.status(k), right.status(k)
        if sl == sr:
            continue
        lo, hi = left.a, right.a
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            sm = scan_point(mid, k).status(k)
            if sm == sl:
                lo = mid
            else:
                hi = mid
        out.append((lo, hi, sl, sr))
    return out


# ---------------------------------------------------------------------------
# surviving set of strongly regular common pieces

@dataclass
class GapSet:
    """A compact set given as its convex hull minus finitely many open gaps."""

    hull: Interval
    gaps: List[Interval] = field(default_factory=list)

    def __post_init__(self):
        lo, hi = self.hull
        if hi < lo:
            raise ValueError("hull must satisfy lo <= hi")
        gaps = sorted((float(g0), float(g1)) for g0, g1 in self.gaps)
        prev = lo
        for g0, g1 in gaps:
            if not (g0 < g1):
                raise ValueError(f"gap ({g0}, {g1}) is empty")
            if g0 < prev or g1 > hi:
                raise ValueError(f"gap ({g0}, {g1}) overlaps another gap or leaves the hull")
            prev = g1
        self.gaps = gaps

    @property
    def diameter(self) -> float:
        return self.hull[1] - self.hull[0]

    @property
    def lengths(self) -> List[float]:
        return [g1 - g0 for g0, g1 in self.gaps]

    def components(self) -> List[Interval]:
        """Closed components; points appear as degenerate intervals."""
        out, cur = [], self.hull[0]
        for g0, g1 in self.gaps:
            out.append((cur, g0))
            cur = g1
        out.append((cur, self.hull[1]))
        return out

    def measure(self) -> float:
        return self.diameter - sum(self.lengths)

    @classmethod
    def from_points(cls, points: Sequence[float]) -> "GapSet":
        pts = sorted(set(float(p) for p in points))
        if not pts:
            raise ValueError("need at least one point")
        return cls((pts[0], pts[-1]), [(p, q) for p, q in zip(pts, pts[1:])])

    @classmethod
    def from_text(cls, text: str) -> "GapSet":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        if not rows:
            raise ValueError("empty gap-set file")
        hull = (float(rows[0][0]), float(rows[0][1]))
        return cls(hull, [(float(r[0]), float(r[1])) for r in rows[1:]])

    @classmethod
    def read(cls, path: str) -> "GapSet":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = [f"{self.hull[0]:.17g} {self.hull[1]:.17g}"]
        lines += [f"{g0:.17g} {g1:.17g}" for g0, g1 in self.gaps]
        return "\n".join(lines) + "\n"


@dataclass
class PesinResult:
    measure: float
    intervals: List[Interval]
    n_pieces: int
    itinerary_depth: int
    truncated: bool

    def gap_set(self, ctx: QuadContext) -> GapSet:
        return GapSet(ctx.I_eps, [g for g in complement_in(ctx.I_eps, self.intervals) if g[1] > g[0]])


def surviving_pieces(ctx: QuadContext, max_order: int, depth: int = 3,
                     cap: int = 2_000_000) -> Tuple[List[Piece1D], int, bool]:
    """Realized complete words that are strongly regular and common and have order
    >= max_order while every proper complete prefix has smaller order."""
    sym = ctx.sym
    c = sym.sr_ratio
    truncated = False
    try:
        it = critical_itinerary(ctx, depth)
    except (BoundaryHit, DepthUnreachable) as exc:
        it = getattr(exc, "partial", None) or Itinerary([], [], [])
        truncated = True
    top = max_order + ctx.M + 1 + max([w.order for w in it.words] + [0])
    letters = []
    for a in sorted(realized_letters(ctx, it, top), key=lambda a: (a.order, str(a))):
        try:
            realize_letter(ctx, a)
            letters.append(a)
        except NotAdmissible:
            # inadmissible fold letters (shared left endpoint) carry no piece
            pass
    out: List[Piece1D] = []

    def rec(w: Word, piece: Piece1D, bad: int, done: int):
        # bad: non-simple time of the complete prefix, done: its order
        if w and is_complete(w) and w.order >= max_order:
            out.append(piece)
            if len(out) > cap:
                raise BudgetExceeded(f"more than {cap} pieces")
            return
        pending = w.order - done
        for a in letters:
            nw = w + a
            if not is_common(sym, nw):
                continue
            if a.is_simple:
                f = pending + a.order
                single = pending == 0 and in_Y0(sym, a)
                nbad = bad + (0 if single else f)
                if nbad > c * (done + f) * (1 + 1e-12):
                    continue
            else:
                f = pending + a.order + 2
                if bad + f > c * (done + f) * (1 + 1e-12):
                    continue
            try:
                np_ = star_1d(ctx, piece, realize_letter(ctx, a))
            except NotAdmissible:
                continue
            if a.is_simple:
                rec(nw, np_, nbad, nw.order)
            else:
                rec(nw, np_, bad, done)

    if max_order <= 0:
        return [identity_piece(ctx)], len(it.words), truncated
    rec(EMPTY, identity_piece(ctx), 0, 0)
    return out, len(it.words), truncated


def pesin_set_measure(ctx: QuadContext, max_order: int, depth: int = 3) -> PesinResult:
    """Relative Leb_g measure of the surviving set at level max_order."""
    pieces, got, truncated = surviving_pieces(ctx, max_order, depth)
    intervals = merge_intervals(p.interval for p in pieces)
    total = leb_g(ctx, [ctx.I_eps])
    value = leb_g(ctx, intervals) / total if intervals else 0.0
    return PesinResult(value, intervals, len(pieces), got, truncated)


def gap_lp_sum(gs: GapSet, d: float) -> float:
    if not 0.0 <= d < 1.0:
        raise ValueError("d must lie in [0, 1)")
    return float(sum(l ** (1.0 - d) for l in gs.lengths))


# ---------------------------------------------------------------------------
# translation inclusion

def greedy_cover_count(components: Sequence[Interval], eps: float) -> int:
    """Fewest closed eps-balls covering a finite union of closed intervals."""
    count = 0
    reach = -math.inf
    for u, v in sorted(components):
        if u > reach:
            count += 1
            reach = u + 2.0 * eps
        if v > reach:
            extra = math.ceil((v - reach) / (2.0 * eps))
            count += extra
            reach += extra * 2.0 * eps
    return count


def covering_condition(K: GapSet, d: float, C_K: float, levels: int = 40) -> bool:
    """Greedy cover counts against C_K eps^-d on eps = diam 2^-j, j < levels."""
    comps = K.components()
    top = K.diameter if K.diameter > 0 else 1.0
    spacing = min(K.lengths) if K.gaps else top
    all_points = all(u == v for u, v in comps)
    for j in range(levels):
        eps = top * 2.0 ** (-j)
        if greedy_cover_count(comps, eps) > C_K * eps ** (-d) * (1 + 1e-12):
            return False
        if all_points and eps < spacing / 4.0:
            break
    return True


def gap_condition(K: GapSet, Kt: GapSet, d: float, C_K: float) -> bool:
    dk = K.diameter
    lhs = sum(dk + l for l in Kt.lengths if l > dk)
    lhs += 2.0 * C_K * sum(l ** (1.0 - d) for l in Kt.lengths if l <= dk)
    return lhs < Kt.diameter - dk


def forbidden_translations(K: GapSet, Kt: GapSet) -> Tuple[Interval, List[Interval]]:
    """Range of admissible translations and the open sets each gap excludes."""
    comps = K.components()
    lo = Kt.hull[0] - K.hull[0]
    hi = Kt.hull[1] - K.hull[1]
    bad = [(g0 - v, g1 - u) for (u, v) in comps for (g0, g1) in Kt.gaps]
    return (lo, hi), bad


def translation_measure(K: GapSet, Kt: GapSet) -> float:
    """Exact Lebesgue measure of {tau : K + tau inside Kt}."""
    (lo, hi), bad = forbidden_translations(K, Kt)
    if hi <= lo:
        return 0.0
    clipped = [(max(a, lo), min(b, hi)) for a, b in bad if b > lo and a < hi]
    return (hi - lo) - sum(b - a for a, b in merge_intervals(clipped))


def translation_measure_sweep(K: GapSet, Kt: GapSet, step: Optional[float] = None,
                              max_samples: int = 4_000_000) -> float:
    """Grid estimate: count feasible translations on a uniform tau grid."""
    (lo, hi), _ = forbidden_translations(K, Kt)
    if hi <= lo:
        return 0.0
    if step is None:
        lens = Kt.lengths
        step = (min(lens) / 10.0) if lens else (hi - lo) / 1000.0
    n = int(math.ceil((hi - lo) / step))
    if n > max_samples:
        n = max_samples
        step = (hi - lo) / n
    tau = lo + (np.arange(n) + 0.5) * step
    ok = np.ones(n, dtype=bool)
    comps = np.array(K.components())
    for g0, g1 in Kt.gaps:
        # component [u, v] + tau meets (g0, g1) iff u + tau < g1 and v + tau > g0
        hit = np.zeros(n, dtype=bool)
        for u, v in comps:
            hit |= (u + tau < g1) & (v + tau > g0)
        ok &= ~hit
    return float(ok.sum() * step)


@dataclass
class BM13Result:
    cond_i: bool
    cond_ii: bool
    measure: float
    sweep_measure: float


def bm13_inclusion(K: GapSet, Kt: GapSet, d: float, C_K: float, sweep: bool = True) -> BM13Result:
    if not 0.0 < d < 1.0:
        raise ValueError("d must lie in (0, 1)")
    ci = covering_condition(K, d, C_K)
    cii = gap_condition(K, Kt, d, C_K)
    exact = translation_measure(K, Kt)
    approx = translation_measure_sweep(K, Kt) if sweep else float("nan")
    return BM13Result(ci, cii, exact, approx)


# ---------------------------------------------------------------------------
# Pliss times

def pliss_times(X: Sequence[float], A: float, c1: float, c2: float) -> List[int]:
    """All 0-based n whose tails keep averages >= c1: sum X[n..m] >= c1 (m - n + 1) for m >= n."""
    X = np.asarray(X, dtype=float)
    k = len(X)
    if not (A >= c2 > c1 > 0):
        raise HypothesisViolated("need A >= c2 > c1 > 0")
    if k == 0:
        raise HypothesisViolated("empty sequence")
    if np.any(X > A):
        raise HypothesisViolated("some X_i exceeds A")
    if X.sum() < c2 * k * (1 - 1e-12):
        raise HypothesisViolated("sum of X below c2 * k")
    T = np.concatenate([[0.0], np.cumsum(X - c1)])
    # n qualifies iff T[m + 1] >= T[n] for all m >= n
    suffix_min = np.minimum.accumulate(T[::-1])[::-1]
    slack = 1e-9 * (1.0 + np.abs(T))
    return [n for n in range(k) if suffix_min[n + 1] >= T[n] - slack[n]]


def pliss_lower_bound(k: int, A: float, c1: float, c2: float) -> float:
    return (c2 - c1) / (A - c1) * k


# ---------------------------------------------------------------------------
# counting signed compositions

def en_large_total(N: int, M: int) -> int:
    delta = 2.0 ** (-math.sqrt(2 * M))
    return int(math.floor(max(delta * N, M / 2.0))) + 1


def en_bound(N: int, M: int) -> float:
    delta = 2.0 ** (-math.sqrt(2 * M))
    Mp = M // 2
    return N ** 3 * 2.0 ** (N * (1 - delta)) * (math.e ** 2 * Mp ** 2 / delta) ** ((delta * N + 1) / Mp)


def count_EN(N: int, M: int, max_N: int = 22) -> Tuple[int, float]:
    """Exact size of E(N) by enumeration, with the closed-form upper bound."""
    if N > max_N:
        raise BudgetExceeded(f"N={N} above the enumeration limit {max_N}")
    R = en_large_total(N, M)
    half = M / 2.0
    count = 0
    # depth-first over the absolute values; each part carries two signs
    stack = [(N, R, 1)]
    while stack:
        rest, big, weight = stack.pop()
        if rest == 0:
            if big == 0:
                count += weight
            continue
        for p in range(2, rest + 1):
            nb = big - p if p > half else big
            if nb < 0:
                continue
            stack.append((rest - p, nb, 2 * weight))
    return count, en_bound(N, M)
