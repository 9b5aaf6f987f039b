"""One-dimensional layer for the quadratic family P_a(x) = x^2 + a.

Every piece is an interval together with the sign pattern of its branch: the
signs of ``x, P(x), ..., P^{n-1}(x)`` on the interior.  Knowing the signs,
preimages are obtained by composing exact square-root branches, which is
stable because inverse branches contract.  The critical orbit is followed in
multiprecision arithmetic so that the itinerary of ``P^{M+1}(0)`` is resolved
well past the double-precision horizon of ``4^M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from .errors import (
    BoundaryHit,
    BudgetExceeded,
    DegenerateParameter,
    DepthUnreachable,
    DerivativeVanishes,
    NotAdmissible,
    OutOfRange,
    PrecisionExhausted,
)
from .intervals import merge_intervals
from .symbolic import (
    EMPTY,
    Letter,
    Parabolic,
    Simple,
    SymbolicContext,
    Word,
    in_Y0,
    is_common,
    is_strongly_regular,
    simple_letters,
)

MAX_M = 20
DEFAULT_TOL = 1e-10
Interval = Tuple[float, float]


def alpha_table(a: float, m_max: int) -> List[float]:
    """alpha_0..alpha_{m_max}: alpha_0 the fixed point, alpha_{i+1} = -sqrt(-alpha_i - a)."""
    alphas = [(1.0 - math.sqrt(1.0 - 4.0 * a)) / 2.0]
    for _ in range(m_max):
        alphas.append(-math.sqrt(-alphas[-1] - a))
    return alphas


def alpha_m(a: float, m: int) -> float:
    return alpha_table(a, m)[m]


@dataclass(frozen=True)
class QuadContext:
    a: float
    beta: float
    alpha0: float
    alphas: Tuple[float, ...]
    alpha_tildes: Tuple[float, ...]
    M: int
    tol: float = DEFAULT_TOL
    _cache: Dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def I_eps(self) -> Interval:
        return (self.alpha0, -self.alpha0)

    @property
    def I_box(self) -> Interval:
        t = self.alpha_tildes[self.M]
        return (t, -t)

    @property
    def sym(self) -> SymbolicContext:
        return SymbolicContext(self.M)

    def P(self, x):
        return x * x + self.a

    def h(self, x):
        return 1.0 / np.sqrt(self.beta ** 2 - np.asarray(x, dtype=float) ** 2)

    @property
    def critical_value(self) -> float:
        """P^{M+1}(0) = P^M(a), evaluated with enough bits to be exact in doubles."""
        z = self._cache.get("critical_value")
        if z is None:
            with mpmath.workprec(80 + 2 * self.M):
                x = mpmath.mpf(self.a)
                for _ in range(self.M):
                    x = x * x + self.a
                z = float(x)
            self._cache["critical_value"] = z
        return z


def build_context(a: float, tol: float = DEFAULT_TOL, check_degenerate: bool = True) -> QuadContext:
    a = float(a)
    if not (-2.0 < a <= -1.5):
        raise OutOfRange(f"parameter a={a!r} outside (-2, -3/2]")
    root = math.sqrt(1.0 - 4.0 * a)
    beta = (1.0 + root) / 2.0
    alphas = [(1.0 - root) / 2.0]
    while alphas[-1] >= a:
        if len(alphas) > MAX_M + 1:
            raise PrecisionExhausted(f"first return time exceeds {MAX_M} in double precision")
        alphas.append(-math.sqrt(-alphas[-1] - a))
    M = len(alphas) - 1
    if check_degenerate:
        gap = alphas[M - 1] - alphas[M]
        if a - alphas[M] < tol * gap or alphas[M - 1] - a < tol * gap:
            raise DegenerateParameter(f"critical value of a={a!r} is within tol of the boundary of I_eps")
    tildes = [float("nan"), alphas[0]]
    for n in range(2, M + 1):
        tildes.append(-math.sqrt(alphas[n - 1] - a))
    return QuadContext(a=a, beta=beta, alpha0=alphas[0], alphas=tuple(alphas),
                       alpha_tildes=tuple(tildes), M=M, tol=tol)


def first_return_by_iteration(a: float, limit: int = 200) -> int:
    """Smallest j >= 1 with P^j(a) in I_eps, by plain iteration."""
    alpha0 = (1.0 - math.sqrt(1.0 - 4.0 * a)) / 2.0
    x = a
    for j in range(1, limit + 1):
        x = x * x + a
        if alpha0 < x < -alpha0:
            return j
    raise PrecisionExhausted("no return within limit")


# ---------------------------------------------------------------------------
# pieces

@dataclass(frozen=True)
class Piece1D:
    lo: float
    hi: float
    order: int
    word: Optional[Word]
    is_puzzle: bool
    signs: Tuple[int, ...] = field(repr=False, default=())
    image: Interval = field(repr=False, default=(0.0, 0.0))

    @property
    def interval(self) -> Interval:
        return (self.lo, self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def orientation(self) -> int:
        return -1 if sum(1 for sg in self.signs if sg < 0) % 2 else 1

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def pullback(ctx: QuadContext, signs: Sequence[int], y: float) -> float:
    x = y
    a = ctx.a
    for sg in reversed(signs):
        x = sg * math.sqrt(max(x - a, 0.0))
    return x


def push(ctx: QuadContext, n: int, x):
    for _ in range(n):
        x = x * x + ctx.a
    return x


def identity_piece(ctx: QuadContext) -> Piece1D:
    return Piece1D(ctx.alpha0, -ctx.alpha0, 0, EMPTY, True, (), ctx.I_eps)


def simple_signs(sign: int, n: int) -> Tuple[int, ...]:
    return (sign, -1) + (1,) * (n - 2)


def simple_piece(ctx: QuadContext, letter: Simple) -> Piece1D:
    n = letter.index
    if not 2 <= n <= ctx.M:
        raise ValueError(f"simple letter {letter} outside [2, {ctx.M}]")
    t0, t1 = ctx.alpha_tildes[n - 1], ctx.alpha_tildes[n]
    lo, hi = (t0, t1) if letter.sign < 0 else (-t1, -t0)
    return Piece1D(lo, hi, n, Word((letter,)), True, simple_signs(letter.sign, n), ctx.I_eps)


def _image_point(ctx: QuadContext, q: Piece1D, y: float) -> float:
    """P^{n_q}(y) for y in q, snapping q's endpoints to its known image."""
    left, right = (q.image if q.orientation > 0 else q.image[::-1])
    if y == q.lo:
        return left
    if y == q.hi:
        return right
    return push(ctx, q.order, y)


def star_1d(ctx: QuadContext, p: Piece1D, q: Piece1D) -> Piece1D:
    """The product (I, n) * (I', n') = (I cap P^-n(I'), n + n')."""
    ilo, ihi = p.image
    jlo, jhi = max(ilo, q.lo), min(ihi, q.hi)
    scale = max(1.0, abs(jlo), abs(jhi))
    if jhi - jlo <= 4 * np.finfo(float).eps * scale:
        raise NotAdmissible("image of the first piece misses the second")
    x1, x2 = pullback(ctx, p.signs, jlo), pullback(ctx, p.signs, jhi)
    lo, hi = min(x1, x2), max(x1, x2)
    full = (jlo - q.lo <= 4 * np.finfo(float).eps * scale
            and q.hi - jhi <= 4 * np.finfo(float).eps * scale)
    if full:
        image = q.image
    else:
        u, v = _image_point(ctx, q, jlo), _image_point(ctx, q, jhi)
        image = (min(u, v), max(u, v))
    word = None if p.word is None or q.word is None else p.word + q.word
    # onto exactly when q is onto and sits inside the image of p
    return Piece1D(lo, hi, p.order + q.order, word, q.is_puzzle and full,
                   p.signs + q.signs, image)


def parabolic_branch(ctx: QuadContext, sign: int) -> Tuple[int, ...]:
    """Sign pattern of P^{M+1} on the half of the central interval with the given sign."""
    return (sign, -1) + (1,) * (ctx.M - 1)


def parabolic_1d(ctx: QuadContext, I: Piece1D, I2: Piece1D, sign: int,
                 inner: Optional[Interval] = None) -> Piece1D:
    """Preimage of the left part of I minus I2 under the fold branch of P^{M+1}.

    ``inner`` is P^n(I2) when known exactly (n the order of I); otherwise it is
    obtained by iterating the endpoints of I2.
    """
    z = ctx.critical_value
    if not (I.is_puzzle and I2.is_puzzle):
        raise NotAdmissible("fold product needs two puzzle pieces")
    if not (I2.lo <= z <= I2.hi):
        raise NotAdmissible("critical value does not lie in the inner piece")
    if not (I.lo <= I2.lo and I2.hi <= I.hi):
        raise NotAdmissible("inner piece is not nested in the outer piece")
    if I2.lo - I.lo <= 4 * np.finfo(float).eps:
        raise NotAdmissible("nested pieces share their left endpoint")
    branch = parabolic_branch(ctx, sign)
    x1, x2 = pullback(ctx, branch, I.lo), pullback(ctx, branch, I2.lo)
    if inner is None:
        u, v = push(ctx, I.order, I2.lo), push(ctx, I.order, I2.hi)
        inner = (min(u, v), max(u, v))
    if I.orientation > 0:
        image = (ctx.alpha0, inner[0])
    else:
        image = (inner[1], -ctx.alpha0)
    word = None
    if I.word is not None and I2.word is not None:
        word = Word((Parabolic(sign, I.word, I2.word, ctx.M),))
    return Piece1D(min(x1, x2), max(x1, x2), ctx.M + 1 + I.order, word, False,
                   branch + I.signs, image)


def realize_letter(ctx: QuadContext, a: Letter) -> Piece1D:
    key = ("letter", a)
    piece = ctx._cache.get(key)
    if piece is None:
        if a.is_simple:
            piece = simple_piece(ctx, a)
        else:
            if a.M != ctx.M:
                raise NotAdmissible(f"letter {a} was built for M={a.M}, context has M={ctx.M}")
            outer = realize_word(ctx, a.base)
            inner_piece = realize_word(ctx, a.child)
            tail = realize_word(ctx, a.tail)
            piece = parabolic_1d(ctx, outer, inner_piece, a.sign, inner=tail.interval)
        ctx._cache[key] = piece
    return piece


def realize_word(ctx: QuadContext, w: Word) -> Piece1D:
    key = ("word", w)
    piece = ctx._cache.get(key)
    if piece is not None:
        return piece
    piece = identity_piece(ctx)
    for idx in range(len(w) - 1, -1, -1):
        try:
            piece = star_1d(ctx, realize_letter(ctx, w.letters[idx]), piece)
        except NotAdmissible as exc:
            raise NotAdmissible(f"letter {idx} ({w.letters[idx]}) of {w}: {exc}", index=idx) from exc
    ctx._cache[key] = piece
    return piece


# ---------------------------------------------------------------------------
# critical itinerary

@dataclass
class Itinerary:
    words: List[Word]
    strongly_regular: List[bool]
    common: List[bool]

    def passes(self, k: int) -> bool:
        return all(self.strongly_regular[:k]) and all(self.common[:k])


class _OutOfBudget(Exception):
    pass


def _near(x: float, lo: float, hi: float, tol: float) -> bool:
    slack = max(tol * (hi - lo), 64 * np.finfo(float).eps * max(1.0, abs(x)))
    return min(abs(x - lo), abs(x - hi)) < slack


def _run_itinerary(ctx: QuadContext, K: int, budget: int, stop_on_fail: bool) -> Itinerary:
    sym = ctx.sym
    M = ctx.M
    tabs = [abs(t) for t in ctx.alpha_tildes]
    tol = ctx.tol
    words: List[Word] = []
    sr: List[bool] = []
    cm: List[bool] = []
    known = [EMPTY]
    pieces = [identity_piece(ctx)]
    steps = 0
    with mpmath.workprec(96 + 2 * (budget + M + 1)):
        a = mpmath.mpf(ctx.a)
        x = a
        for _ in range(M):
            x = x * x + a

        def fail(exc):
            exc.partial = Itinerary(list(words), list(sr), list(cm))
            raise exc

        for k in range(1, K + 1):
            letters: List[Letter] = []
            while True:
                xf = float(x)
                ax = abs(xf)
                if ax > tabs[1]:
                    fail(BoundaryHit(f"orbit left I_eps at depth {k}"))
                if ax < tabs[M]:
                    if _near(ax, 0.0, tabs[M], tol) or xf == 0.0:
                        fail(BoundaryHit(f"orbit hits the boundary of the central interval at depth {k}"))
                    sign = 1 if xf > 0 else -1
                    y = x
                    for _ in range(M + 1):
                        y = y * y + a
                    yf = float(y)
                    j = 0
                    while j + 1 < len(pieces):
                        nxt = pieces[j + 1]
                        if _near(yf, nxt.lo, nxt.hi, tol):
                            fail(BoundaryHit(f"return lands on a boundary of {known[j + 1]}"))
                        if not nxt.contains(yf):
                            break
                        j += 1
                    if j + 1 >= len(pieces):
                        fail(DepthUnreachable(f"needs the depth-{j + 1} critical word while building depth {k}"))
                    letter = Parabolic(sign, known[j], known[j + 1], M)
                    x = y
                    n = known[j].order
                    steps += M + 1 + n
                    if steps > budget:
                        raise _OutOfBudget()
                    for _ in range(n):
                        x = x * x + a
                    letters.append(letter)
                    continue
                n = 2
                while n < M and ax < tabs[n]:
                    n += 1
                if _near(ax, tabs[n], tabs[n - 1], tol):
                    fail(BoundaryHit(f"orbit lands on a boundary of a simple piece at depth {k}"))
                steps += n
                if steps > budget:
                    raise _OutOfBudget()
                letters.append(Simple(1 if xf > 0 else -1, n))
                for _ in range(n):
                    x = x * x + a
                break
            c = known[-1] + Word(letters)
            known.append(c)
            words.append(c)
            sr.append(is_strongly_regular(sym, c))
            cm.append(is_common(sym, c))
            if stop_on_fail and not (sr[-1] and cm[-1]):
                break
            if k < K:
                try:
                    pieces.append(realize_word(ctx, c))
                except NotAdmissible as exc:
                    fail(BoundaryHit(f"critical word {c} failed to realize: {exc}"))
    return Itinerary(words, sr, cm)


def critical_itinerary(ctx: QuadContext, K: int, stop_on_fail: bool = False,
                       max_order: int = 4000) -> Itinerary:
    """The critical words c_1..c_K of the critical value P^{M+1}(0)."""
    if K < 0:
        raise ValueError("depth must be non-negative")
    if K == 0:
        return Itinerary([], [], [])
    budget = (2 * K + 1) * ctx.M
    while True:
        try:
            return _run_itinerary(ctx, K, budget, stop_on_fail)
        except _OutOfBudget:
            if budget >= max_order:
                raise DepthUnreachable(f"critical words exceed order {max_order}")
            budget = min(2 * budget, max_order)


PASS, FAIL, INDETERMINATE = "pass", "fail", "indeterminate"


@dataclass
class SRReport:
    status: str
    depth_passed: int
    words: List[Word]
    reason: str = ""

    def __bool__(self) -> bool:
        return self.status == PASS

    def status_at(self, k: int) -> str:
        if k <= self.depth_passed:
            return PASS
        return self.status


def check_sr_1d(ctx: QuadContext, K: int) -> SRReport:
    """Strong regularity of the critical words up to depth K."""
    try:
        it = critical_itinerary(ctx, K, stop_on_fail=True)
    except (BoundaryHit, DepthUnreachable) as exc:
        part = getattr(exc, "partial", None) or Itinerary([], [], [])
        return SRReport(INDETERMINATE, len(part.words), part.words, str(exc))
    for k in range(len(it.words)):
        if not (it.strongly_regular[k] and it.common[k]):
            what = "not strongly regular" if not it.strongly_regular[k] else "not common"
            return SRReport(FAIL, k, it.words, f"depth {k + 1} word {it.words[k]} is {what}")
    return SRReport(PASS, K, it.words)


# ---------------------------------------------------------------------------
# measures and estimates

def leb_g(ctx: QuadContext, intervals: Iterable[Interval]) -> float:
    """Measure of a union of intervals for the density (beta^2 - x^2)^(-1/2)."""
    b = ctx.beta
    total = 0.0
    for lo, hi in merge_intervals(intervals):
        if lo < -b * (1 + 1e-15) or hi > b * (1 + 1e-15):
            raise OutOfRange(f"interval [{lo}, {hi}] leaves [-beta, beta]")
        total += math.asin(min(1.0, hi / b)) - math.asin(max(-1.0, lo / b))
    return total


def collet_eckmann(ctx: QuadContext, N: int, tol: float = 1e-14) -> np.ndarray:
    """(1/n) log2 |DP^n(a)| for n = 1..N, accumulated in log space."""
    a = ctx.a
    x = a
    logs = np.empty(N)
    acc = 0.0
    for n in range(N):
        if abs(x) < tol:
            raise DerivativeVanishes(f"orbit of the critical value reaches 0 at step {n}")
        acc += math.log2(2.0 * abs(x))
        logs[n] = acc / (n + 1)
        x = x * x + a
    return logs


def log2_derivative_table(ctx: QuadContext, x: np.ndarray, n: int) -> np.ndarray:
    """Row k holds log2 |DP^k(x)| for k = 0..n."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((n + 1,) + x.shape)
    cur = x.copy()
    with np.errstate(divide="ignore"):
        for k in range(n):
            out[k + 1] = out[k] + np.log2(2.0 * np.abs(cur))
            cur = cur * cur + ctx.a
    return out


def dp_identity_residual(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """|DP(x)| minus the density-ratio expression, per sample."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    beta = (1.0 + np.sqrt(1.0 - 4.0 * a)) / 2.0
    h = lambda t: 1.0 / np.sqrt(beta ** 2 - t ** 2)
    px = x * x + a
    rhs = 2.0 * h(x) / h(px) / np.sqrt(1.0 + (beta + a) / x ** 2)
    return np.abs(2.0 * np.abs(x) - rhs)


@dataclass
class CheckResult:
    name: str
    margin: float
    passed: bool
    fitted_C: Optional[float] = None
    detail: str = ""


ALL_CHECKS = ("dp-identity", "dalpha", "beta-plus-critical", "alpha-tilde-scaling",
              "simple-expansion", "tail-expansion", "return-derivative", "log-distortion", "small-pieces-share")


def _piece_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


def _y0_letters(ctx: QuadContext) -> List[Simple]:
    sym = ctx.sym
    return [a for a in simple_letters(sym) if in_Y0(sym, a)]


def verify_yoccoz_bounds(ctx: QuadContext, which: Sequence[str] = ALL_CHECKS,
                         n_grid: int = 1000, seed: int = 0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    out: List[CheckResult] = []
    for name in which:
        if name not in ALL_CHECKS:
            raise ValueError(f"unknown check {name!r}")
        out.append(_CHECKS[name](ctx, n_grid, rng))
    return out


def _check_dp_identity(ctx, n_grid, rng):
    x = rng.uniform(-ctx.beta, ctx.beta, size=n_grid)
    x = x[np.abs(x) > 1e-12]
    res = float(np.max(dp_identity_residual(np.full_like(x, ctx.a), x)))
    return CheckResult("dp-identity", res, res <= 1e-9, detail="max |lhs - rhs|")


def _check_dalpha(ctx, n_grid, rng, m_max: int = 12):
    lo, hi = 1.0 / 3.0 - 0.02, 0.5 + 0.02
    grid = np.linspace(-2.0 + 1e-6, -1.5 - 1e-6, max(n_grid // 10, 10))
    step = 1e-6
    worst = math.inf
    for a in grid:
        up = alpha_table(a + step, m_max)
        dn = alpha_table(a - step, m_max)
        for m in range(m_max + 1):
            d = (up[m] - dn[m]) / (2 * step)
            worst = min(worst, d - lo, hi - d)
    return CheckResult("dalpha", worst, worst >= 0.0, detail="distance to the band [1/3-0.02, 1/2+0.02]")


def _check_beta_plus_critical(ctx, n_grid, rng):
    r = (ctx.beta + ctx.a) * 4.0 ** ctx.M
    C = max(r, 1.0 / r)
    return CheckResult("beta-plus-critical", r, True, fitted_C=C, detail="(beta + a) 4^M")


def _check_alpha_tilde(ctx, n_grid, rng):
    C = 1.0
    for n in range(1, ctx.M - 1):
        r = abs(ctx.alpha_tildes[n]) * 2.0 ** n
        C = max(C, r, 1.0 / r)
    return CheckResult("alpha-tilde-scaling", C, True, fitted_C=C, detail="max of |tilde alpha_n| 2^n and its inverse")


def _check_simple_expansion(ctx, n_grid, rng):
    worst = math.inf
    for letter in _y0_letters(ctx):
        p = simple_piece(ctx, letter)
        n = letter.index
        logs = log2_derivative_table(ctx, _piece_grid(p.lo, p.hi, n_grid), n)
        for k in range(n + 1):
            worst = min(worst, float(np.min(logs[n] - logs[k] - (n - k) / 3.0)))
    margin = 2.0 ** worst
    return CheckResult("simple-expansion", margin, margin >= 1.0 - 1e-12,
                       detail="min |DP^n| / (2^((n-k)/3) |DP^k|)")


def _check_tail_expansion(ctx, n_grid, rng):
    worst = math.inf
    for letter in _y0_letters(ctx):
        p = simple_piece(ctx, letter)
        n = letter.index
        logs = log2_derivative_table(ctx, _piece_grid(p.lo, p.hi, n_grid), n)
        for k in range(n + 1):
            worst = min(worst, float(np.min(logs[n] - logs[n - k] - k / 2.0)))
    margin = 2.0 ** worst
    return CheckResult("tail-expansion", margin, margin >= 1.0 - 1e-12,
                       detail="min |DP^n| / (2^(k/2) |DP^(n-k)|)")


def _check_return_derivative(ctx, n_grid, rng):
    M = ctx.M
    x = _piece_grid(ctx.alphas[M], ctx.alphas[M - 1], n_grid)
    logs = log2_derivative_table(ctx, x, M)[M]
    top = float(np.max(logs)) - 2 * M
    C = 2.0 ** (2 * M - float(np.min(logs)))
    return CheckResult("return-derivative", 2.0 ** (-top), top <= 1e-12, fitted_C=C,
                       detail="4^M / max |DP^M| on [alpha_M, alpha_(M-1)]")


def _check_log_distortion(ctx, n_grid, rng):
    C0 = 2.0 / abs(ctx.alphas[0] - ctx.alphas[1])
    worst = math.inf
    for letter in _y0_letters(ctx):
        p = simple_piece(ctx, letter)
        n = letter.index
        x = _piece_grid(p.lo, p.hi, n_grid)
        cur = x.copy()
        deriv = np.ones_like(x)
        dlog = np.zeros_like(x)
        for _ in range(n):
            dlog += deriv / cur
            deriv = deriv * 2.0 * cur
            cur = cur * cur + ctx.a
        ratio = C0 * np.abs(deriv) / np.abs(dlog)
        worst = min(worst, float(np.min(ratio)))
    return CheckResult("log-distortion", worst, worst >= 1.0, fitted_C=C0,
                       detail="min C0 |DP^n| / |D log |DP^n||")


def small_pieces_share(ctx: QuadContext) -> Tuple[float, float]:
    """Leb_g share of the simple pieces of order <= M/2, and its leading term."""
    half = ctx.M // 2
    pieces = [simple_piece(ctx, a).interval for a in _y0_letters(ctx) if a.index <= half]
    ratio = leb_g(ctx, pieces) / leb_g(ctx, [ctx.I_eps])
    lead = 2.0 * sum(2.0 ** (-n) for n in range(2, half + 1))
    return ratio, lead


def _check_small_pieces_share(ctx, n_grid, rng):
    ratio, lead = small_pieces_share(ctx)
    C = abs(ratio / lead - 1.0) * 2.0 ** ctx.M
    return CheckResult("small-pieces-share", ratio, True, fitted_C=C,
                       detail=f"share {ratio:.17g} against geometric leading term {lead:.17g}")


_CHECKS = {
    "dp-identity": _check_dp_identity,
    "dalpha": _check_dalpha,
    "beta-plus-critical": _check_beta_plus_critical,
    "alpha-tilde-scaling": _check_alpha_tilde,
    "simple-expansion": _check_simple_expansion,
    "tail-expansion": _check_tail_expansion,
    "return-derivative": _check_return_derivative,
    "log-distortion": _check_log_distortion,
    "small-pieces-share": _check_small_pieces_share,
}


def realized_letters(ctx: QuadContext, itinerary: Itinerary, max_order: int) -> List[Letter]:
    """Simple letters plus the fold letters attached to consecutive critical words."""
    letters: List[Letter] = list(simple_letters(ctx.sym, max_order))
    chain = [EMPTY] + list(itinerary.words)
    for j in range(len(chain) - 1):
        if ctx.M + 1 + chain[j].order > max_order:
            break
        for sg in (-1, 1):
            letters.append(Parabolic(sg, chain[j], chain[j + 1], ctx.M))
    return letters


def enumerate_realized_words(ctx: QuadContext, max_order: int, depth: int = 3,
                             cap: int = 2_000_000) -> List[Word]:
    """Admissible words over the realized alphabet with order <= max_order."""
    try:
        it = critical_itinerary(ctx, depth)
    except (BoundaryHit, DepthUnreachable) as exc:
        it = getattr(exc, "partial", None) or Itinerary([], [], [])
    letters = sorted(realized_letters(ctx, it, max_order), key=lambda a: (a.order, str(a)))
    usable = []
    for a in letters:
        try:
            realize_letter(ctx, a)
            usable.append(a)
        except NotAdmissible:
            pass
    out: List[Word] = []

    # extend on the right: admissibility of w.a only depends on the piece of w
    def rec(w: Word, piece: Piece1D):
        out.append(w)
        if len(out) > cap:
            raise BudgetExceeded(f"more than {cap} realized words")
        for a in usable:
            if w.order + a.order > max_order:
                break
            try:
                nxt = realize_word(ctx, w + a)
            except NotAdmissible:
                continue
            rec(w + a, nxt)

    rec(EMPTY, identity_piece(ctx))
    return out
