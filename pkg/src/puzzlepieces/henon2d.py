"""Henon-like maps f(x, y) = (x^2 + a, 0) + B(x, y).

Boxes are bounded by sampled vertical curves that are preimages of the local
stable arcs of the fixed point A near (alpha_0, 0).  Horizontal curves are
graphs over I_eps stored as Hermite data (rho, rho').  All solves are per
slice Newton iterations seeded by the exact one-dimensional branch preimages,
so at b = 0 every object coincides with its quad1d counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    BranchOverlap,
    FlatnessViolated,
    NotAdmissible,
    NotInDomain,
    OutOfRange,
    RootCountError,
    SolveFailure,
)
from .quad1d import QuadContext, build_context
from .symbolic import (
    EMPTY,
    S_MINUS,
    S_PLUS,
    Parabolic,
    Simple,
    Word,
    aleph,
    is_common,
    is_strongly_regular,
    s_minus_power,
)

N_CURVE = 512
N_Y = 128
DEFAULT_THETA = 0.05
TANGENCY_TOL = 1e-8
FLAT_K = 2.0
STEP_TOL = 1e-14

IN_POSITION = "in_position"
MISS = "miss"
BOTH_SIDES = "both_sides"
INDETERMINATE = "indeterminate"


# ---------------------------------------------------------------------------
# perturbations

Monomials = Tuple[Tuple[int, int, float], ...]


@dataclass(frozen=True)
class Perturbation:
    """B(x, y) = b * (sum c x^i y^j, sum d x^i y^j)."""

    name: str
    b: float
    first: Monomials = ()
    second: Monomials = ()

    @staticmethod
    def _eval(terms: Monomials, x, y):
        v = np.zeros(np.broadcast(x, y).shape)
        for i, j, c in terms:
            v = v + c * x ** i * y ** j
        return v

    @staticmethod
    def _dx(terms: Monomials) -> Monomials:
        return tuple((i - 1, j, c * i) for i, j, c in terms if i > 0)

    @staticmethod
    def _dy(terms: Monomials) -> Monomials:
        return tuple((i, j - 1, c * j) for i, j, c in terms if j > 0)

    def value(self, x, y):
        return self.b * self._eval(self.first, x, y), self.b * self._eval(self.second, x, y)

    def jacobian(self, x, y):
        b = self.b
        return (b * self._eval(self._dx(self.first), x, y), b * self._eval(self._dy(self.first), x, y),
                b * self._eval(self._dx(self.second), x, y), b * self._eval(self._dy(self.second), x, y))

    @property
    def bound(self) -> float:
        """C^2 size of B on [-3, 3]^2 (max of values and partials up to order two)."""
        if self.b == 0 or not (self.first or self.second):
            return 0.0
        g = np.linspace(-3.0, 3.0, 61)
        X, Y = np.meshgrid(g, g)
        best = 0.0
        for terms in (self.first, self.second):
            for t in (terms, self._dx(terms), self._dy(terms), self._dx(self._dx(terms)),
                      self._dx(self._dy(terms)), self._dy(self._dy(terms))):
                if t:
                    best = max(best, float(np.max(np.abs(self._eval(t, X, Y)))))
        return abs(self.b) * best


def zero_perturbation() -> Perturbation:
    return Perturbation("zero", 0.0)


def henon_perturbation(b: float, sign: int = 1) -> Perturbation:
    """B(x, y) = (b y, +-b x): conjugate to the classical Henon map."""
    return Perturbation("henon", b, ((0, 1, 1.0),), ((1, 0, float(sign)),))


DEFAULT_POLY = (((0, 1, 0.5), (1, 1, 0.2), (2, 0, 0.1)), ((1, 0, 1.0), (0, 1, 0.3), (1, 1, 0.1)))


def poly_perturbation(b: float, first: Monomials = DEFAULT_POLY[0],
                      second: Monomials = DEFAULT_POLY[1]) -> Perturbation:
    return Perturbation("poly", b, tuple(first), tuple(second))


FAMILIES = {"zero": lambda b, sign=1: zero_perturbation(),
            "henon": lambda b, sign=1: henon_perturbation(b, sign),
            "poly": lambda b, sign=1: poly_perturbation(b)}


# ---------------------------------------------------------------------------
# context

@dataclass(frozen=True, eq=False)
class HenonContext:
    quad: QuadContext
    pert: Perturbation
    theta: float = DEFAULT_THETA
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise OutOfRange("theta must lie in (0, 1)")
        if not self.b_bound < self.theta:
            raise OutOfRange(f"perturbation size {self.b_bound:.3g} is not below theta={self.theta}")

    @property
    def a(self) -> float:
        return self.quad.a

    @property
    def M(self) -> int:
        return self.quad.M

    @property
    def b(self) -> float:
        return abs(self.pert.b)

    @property
    def b_bound(self) -> float:
        v = self._cache.get("b_bound")
        if v is None:
            v = self._cache["b_bound"] = self.pert.bound
        return v

    @property
    def ynodes(self) -> np.ndarray:
        return np.linspace(-self.theta, self.theta, N_Y)

    @property
    def xgrid(self) -> np.ndarray:
        return np.linspace(self.quad.alpha0, -self.quad.alpha0, N_CURVE)

    def f(self, x, y):
        b1, b2 = self.pert.value(x, y)
        return x * x + self.a + b1, b2

    def iterate(self, x, y, n: int):
        """(F1, F2, A, B, C, D): f^n and its Jacobian [[A, B], [C, D]]."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float) + np.zeros_like(x)
        A = np.ones_like(x)
        B = np.zeros_like(x)
        C = np.zeros_like(x)
        D = np.ones_like(x)
        for _ in range(n):
            b1x, b1y, b2x, b2y = self.pert.jacobian(x, y)
            fx = 2.0 * x + b1x
            A, B, C, D = fx * A + b1y * C, fx * B + b1y * D, b2x * A + b2y * C, b2x * B + b2y * D
            x, y = self.f(x, y)
        return x, y, A, B, C, D


def build_henon_context(a: float, family: str = "zero", b: float = 0.0,
                        theta: float = DEFAULT_THETA, sign: int = 1, **kw) -> HenonContext:
    if family not in FAMILIES:
        raise ValueError(f"unknown perturbation family {family!r}")
    pert = FAMILIES[family](b, sign)
    return HenonContext(build_context(a, **kw), pert, theta)


# ---------------------------------------------------------------------------
# sampled curves

def pullback_vec(ctx: HenonContext, signs: Sequence[int], y) -> np.ndarray:
    x = np.asarray(y, dtype=float).copy()
    for sg in reversed(signs):
        x = sg * np.sqrt(np.maximum(x - ctx.a, 0.0))
    return x


class VerticalCurve:
    """x = psi(y) on [-theta, theta], cubic spline through the y-nodes."""

    def __init__(self, ynodes: np.ndarray, values: np.ndarray):
        self.ynodes = ynodes
        self.values = np.asarray(values, dtype=float)
        self._const = bool(np.all(self.values == self.values[0]))
        self._spline = None if self._const else CubicSpline(ynodes, self.values)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self._const:
            return np.full(y.shape, self.values[0]), np.zeros(y.shape)
        return self._spline(y), self._spline(y, 1)


def _newton(residual, x: np.ndarray, n: int, what: str, max_iter: int = 60) -> np.ndarray:
    """Vectorized Newton; residual(x) returns (value, slope).  A node stops when
    its step reaches rounding level or its residual reaches the floor set by
    n-fold amplification of rounding errors."""
    floor = 1e-16 * 4.0 ** n
    done = np.zeros(np.shape(x), dtype=bool)
    for _ in range(max_iter):
        r, d = residual(x)
        ok = d != 0.0
        step = np.where(ok, r / np.where(ok, d, 1.0), 0.0)
        x = x - step
        done = (np.abs(r) <= floor) | (np.abs(step) <= STEP_TOL * (1.0 + np.abs(x)))
        if done.all():
            return x
    bad = [tuple(int(v) for v in idx) if len(idx) > 1 else int(idx[0]) for idx in np.argwhere(~done)]
    raise SolveFailure(f"{len(bad)} {what} did not converge", bad)


def _solve_on_branch(ctx: HenonContext, signs: Sequence[int], y0: np.ndarray,
                     target: VerticalCurve, max_iter: int = 60) -> np.ndarray:
    """x0 per node with f^n(x0, y0) on the curve x = target(y) along the branch."""
    n = len(signs)
    y0 = np.asarray(y0, dtype=float)
    if n == 0:
        return target(y0)[0]
    x = pullback_vec(ctx, signs, target(np.zeros_like(y0))[0])

    def residual(x):
        X, Y, A, B, C, D = ctx.iterate(x, y0, n)
        p, dp = target(Y)
        return X - p, A - dp * C

    return _newton(residual, x, n, "slice solves", max_iter)


# ---------------------------------------------------------------------------
# boxes

@dataclass(eq=False)
class Box2D:
    ynodes: np.ndarray
    left: np.ndarray
    right: np.ndarray
    order: int
    word: Optional[Word] = None
    signs: Tuple[int, ...] = ()
    is_puzzle: bool = True

    def __post_init__(self):
        if np.any(self.left >= self.right):
            raise BranchOverlap("box sides cross")
        self._sides = (VerticalCurve(self.ynodes, self.left), VerticalCurve(self.ynodes, self.right))

    @property
    def left_curve(self) -> VerticalCurve:
        return self._sides[0]

    @property
    def right_curve(self) -> VerticalCurve:
        return self._sides[1]

    def contains(self, x, y, tol: float = 0.0):
        lo, hi = self._sides[0](y)[0], self._sides[1](y)[0]
        return (lo - tol <= x) & (x <= hi + tol)

    @property
    def orientation(self) -> int:
        return -1 if sum(1 for sg in self.signs if sg < 0) % 2 else 1

    def slice_at(self, y: float) -> Tuple[float, float]:
        return float(self._sides[0](y)[0]), float(self._sides[1](y)[0])

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(float(y), float(l), float(r)) for y, l, r in zip(self.ynodes, self.left, self.right)]


def _stable_arc(ctx: HenonContext, tol: float = 1e-15, max_iter: int = 200) -> np.ndarray:
    """Local stable arc of the fixed point near (alpha_0, 0): the curve invariant
    under the negative inverse branch."""
    ys = ctx.ynodes
    w = np.full(ys.shape, ctx.quad.alpha0)
    if ctx.b_bound == 0.0:
        return w
    for _ in range(max_iter):
        nxt = _solve_on_branch(ctx, (-1,), ys, VerticalCurve(ys, w))
        if np.max(np.abs(nxt - w)) <= tol:
            return nxt
        w = nxt
    raise SolveFailure("stable arc iteration did not converge", [])


def y_eps(ctx: HenonContext) -> Box2D:
    box = ctx._cache.get("Y_eps")
    if box is None:
        ys = ctx.ynodes
        left = _stable_arc(ctx)
        if ctx.b_bound == 0.0:
            right = np.full(ys.shape, -ctx.quad.alpha0)
        else:
            right = _solve_on_branch(ctx, (1,), ys, VerticalCurve(ys, left))
        box = ctx._cache["Y_eps"] = Box2D(ys, left, right, 0, EMPTY, ())
    return box


def _pull_box(ctx: HenonContext, signs: Tuple[int, ...], q: Box2D, order: int,
              word: Optional[Word], is_puzzle: bool) -> Box2D:
    ys = ctx.ynodes
    u = _solve_on_branch(ctx, signs, ys, q.left_curve)
    v = _solve_on_branch(ctx, signs, ys, q.right_curve)
    return Box2D(ys, np.minimum(u, v), np.maximum(u, v), order, word, signs + q.signs, is_puzzle)


def inverse_branches(ctx: HenonContext, Y: Box2D) -> Tuple[Box2D, Box2D]:
    """The preimage boxes g_-(Y) and g_+(Y)."""
    if np.min(Y.left) < ctx.a + 2.0 * ctx.b:
        raise BranchOverlap("box reaches below a + 2b; its preimage is not two boxes")
    out = []
    for sg in (-1, 1):
        out.append(_pull_box(ctx, (sg,), Y, Y.order + 1, None, Y.is_puzzle))
    return out[0], out[1]


@dataclass(eq=False)
class NamedBoxes:
    boxes: Dict[str, Box2D]
    cover_residual: float
    seam_gap: float
    box_in_tau: bool
    box_in_tau_margin: float

    def __getitem__(self, key: str) -> Box2D:
        return self.boxes[key]


def _tau_signs(M: int) -> Tuple[int, ...]:
    return (-1,) + (1,) * (M - 1)


def build_named_boxes(ctx: HenonContext) -> NamedBoxes:
    cached = ctx._cache.get("named")
    if cached is not None:
        return cached
    M = ctx.M
    eps = y_eps(ctx)
    boxes: Dict[str, Box2D] = {"e": eps}
    chain = [eps]
    for _ in range(M - 1):
        chain.append(inverse_branches(ctx, chain[-1])[1])
    for i in range(M - 1):
        h = inverse_branches(ctx, chain[i])[0]
        lo, hi = inverse_branches(ctx, h)
        n = i + 2
        for sg, bx in ((-1, lo), (1, hi)):
            letter = Simple(sg, n)
            bx.order = n
            bx.word = Word((letter,))
            boxes[str(letter)] = bx
    tau = inverse_branches(ctx, chain[M - 1])[0]
    tau.order = M
    tau.word = None
    boxes["tau"] = tau
    ys = ctx.ynodes
    boxes["box"] = Box2D(ys, boxes[f"s-{M}"].right.copy(), boxes[f"s+{M}"].left.copy(), M + 1,
                         None, (), False)

    # tiling: simple boxes and the central box fill Y_eps slice by slice
    ordered = [boxes[f"s-{n}"] for n in range(2, M + 1)] + [boxes["box"]] + \
              [boxes[f"s+{n}"] for n in range(M, 1, -1)]
    width = sum(bx.right - bx.left for bx in ordered)
    cover = float(np.max(np.abs(width - (eps.right - eps.left))))
    seams = [np.max(np.abs(p.right - q.left)) for p, q in zip(ordered, ordered[1:])]
    seams.append(np.max(np.abs(ordered[0].left - eps.left)))
    seams.append(np.max(np.abs(ordered[-1].right - eps.right)))
    seam = float(max(seams))

    # f(Y_box) inside Y_tau on the box boundary and a coarse interior grid
    bx = boxes["box"]
    pts_x, pts_y = [], []
    for frac in np.linspace(0.0, 1.0, 17):
        pts_x.append(bx.left + frac * (bx.right - bx.left))
        pts_y.append(ys)
    X, Y = ctx.f(np.concatenate(pts_x), np.concatenate(pts_y))
    lo, hi = tau.left_curve(Y)[0], tau.right_curve(Y)[0]
    clearance = float(np.min(np.minimum(X - lo, hi - X)))
    scale = 1e-12 * max(1.0, float(np.max(np.abs(X))))
    result = NamedBoxes(boxes, cover, seam, clearance >= -scale, clearance)
    ctx._cache["named"] = result
    return result


def star_2d(ctx: HenonContext, p: Box2D, q: Box2D) -> Box2D:
    """The product Y'' = Y cap f^-n(Y') computed slice by slice."""
    if not p.is_puzzle:
        raise NotAdmissible("the first factor must be a puzzle box")
    if p.order == 0:
        return q
    eps = y_eps(ctx)
    left = np.maximum(q.left, eps.left)
    right = np.minimum(q.right, eps.right)
    if np.all(right <= left):
        raise NotAdmissible("second box lies outside the image of the first")
    clipped = bool(np.any(left != q.left) or np.any(right != q.right))
    ys = ctx.ynodes
    target = Box2D(ys, left, right, q.order, q.word, q.signs, q.is_puzzle) if clipped else q
    word = None if p.word is None or q.word is None else p.word + q.word
    out = _pull_box(ctx, p.signs, target, p.order + q.order, word, p.is_puzzle and q.is_puzzle and not clipped)
    return out


def realize_box(ctx: HenonContext, w: Word) -> Box2D:
    """Box of a word over the simple letters, built right to left."""
    key = ("box", w)
    box = ctx._cache.get(key)
    if box is not None:
        return box
    named = build_named_boxes(ctx)
    box = y_eps(ctx)
    for idx in range(len(w) - 1, -1, -1):
        a = w.letters[idx]
        if not a.is_simple:
            raise NotAdmissible(f"letter {idx} ({a}) is a fold letter and has no box", index=idx)
        if a.index > ctx.M:
            raise NotAdmissible(f"letter {idx} ({a}) exceeds the return time {ctx.M}", index=idx)
        box = star_2d(ctx, named[str(a)], box)
    box.word = w
    ctx._cache[key] = box
    return box


# ---------------------------------------------------------------------------
# horizontal curves

@dataclass(eq=False)
class HorizontalCurve:
    grid: np.ndarray
    rho: np.ndarray
    drho: np.ndarray

    def __post_init__(self):
        self._spline = CubicHermiteSpline(self.grid, self.rho, self.drho, extrapolate=True)

    @classmethod
    def constant(cls, ctx: HenonContext, value: float = 0.0) -> "HorizontalCurve":
        g = ctx.xgrid
        return cls(g, np.full(g.shape, float(value)), np.zeros(g.shape))

    @classmethod
    def from_function(cls, ctx: HenonContext, fn, dfn) -> "HorizontalCurve":
        g = ctx.xgrid
        return cls(g, np.asarray(fn(g), dtype=float), np.asarray(dfn(g), dtype=float))

    def __call__(self, x):
        return self._spline(x), self._spline(x, 1)

    def distance(self, other: "HorizontalCurve") -> float:
        r2, d2 = other(self.grid)
        return float(np.max(np.abs(self.rho - r2) + np.abs(self.drho - d2)))

    def flatness(self) -> Tuple[float, float, float]:
        lip = np.max(np.abs(np.diff(self.drho) / np.diff(self.grid))) if len(self.grid) > 1 else 0.0
        return float(np.max(np.abs(self.rho))), float(np.max(np.abs(self.drho))), float(lip)

    def is_flat(self, theta: float, slack: float = 1e-12) -> bool:
        r, d, lip = self.flatness()
        return r <= theta + slack and d <= theta + slack and lip <= (1 + FLAT_K * theta) * theta + slack

    def rows(self) -> List[Tuple[float, float]]:
        return [(float(x), float(r)) for x, r in zip(self.grid, self.rho)]


def _invert_along(ctx: HenonContext, S: HorizontalCurve, n: int, x1: np.ndarray,
                  seed: np.ndarray, max_iter: int = 60):
    """Points t of S with first coordinate of f^n(t, rho(t)) equal to x1."""

    def residual(t):
        r, dr = S(t)
        X, Y, A, B, C, D = ctx.iterate(t, r, n)
        return X - x1, A + B * dr

    t = _newton(residual, np.asarray(seed, dtype=float).copy(), n, "curve nodes", max_iter)
    r, dr = S(t)
    X, Y, A, B, C, D = ctx.iterate(t, r, n)
    return t, Y, (C + D * dr) / (A + B * dr)


def _check_curve(ctx: HenonContext, S: HorizontalCurve, strict: bool) -> HorizontalCurve:
    if strict and not S.is_flat(ctx.theta):
        r, d, lip = S.flatness()
        raise FlatnessViolated(f"curve leaves the horizontal class (|rho|={r:.3g}, |rho'|={d:.3g}, lip={lip:.3g})")
    return S


def transform_simple(ctx: HenonContext, S: HorizontalCurve, w: Word, strict: bool = True) -> HorizontalCurve:
    box = realize_box(ctx, w)
    x1 = ctx.xgrid
    _, rho, drho = _invert_along(ctx, S, box.order, x1, pullback_vec(ctx, box.signs, x1))
    return _check_curve(ctx, HorizontalCurve(x1, rho, drho), strict)


def graph_transform(ctx: HenonContext, S: HorizontalCurve, w: Word, strict: bool = True) -> HorizontalCurve:
    """S -> f^n(Y_w cap S), letter by letter; fold letters use the extension algorithm."""
    run: List = []
    for a in w.letters:
        if a.is_simple:
            run.append(a)
            continue
        if run:
            S = transform_simple(ctx, S, Word(tuple(run)), strict)
            run = []
        S = parabolic_segments(ctx, S, realize_box(ctx, a.base), realize_box(ctx, a.child),
                               base_word=a.base).curves[a.sign]
        S = _check_curve(ctx, S, strict)
    if run:
        S = transform_simple(ctx, S, Word(tuple(run)), strict)
    return S


def unstable_curve(ctx: HenonContext, tol: float = 1e-14, max_iter: int = 80) -> HorizontalCurve:
    """Fixed point of the s- transform: the half unstable manifold of A."""
    S = HorizontalCurve.constant(ctx)
    w = Word((S_MINUS,))
    for _ in range(max_iter):
        nxt = graph_transform(ctx, S, w)
        if nxt.distance(S) <= tol:
            return nxt
        S = nxt
    return S


def distortion(ctx: HenonContext, S: HorizontalCurve, w: Word, samples: int = 2001) -> float:
    """Sup of |d log |d_S f^n| / d(image length)| along S cap Y_w."""
    box = realize_box(ctx, w)
    x1 = np.linspace(ctx.quad.alpha0, -ctx.quad.alpha0, samples)
    t, _, _ = _invert_along(ctx, S, box.order, x1, pullback_vec(ctx, box.signs, x1))
    r, dr = S(t)
    X, Y, A, B, C, D = ctx.iterate(t, r, box.order)
    norm = np.hypot(1.0, dr)
    speed = np.hypot(A + B * dr, C + D * dr) / norm
    logs = np.log(speed)
    arc = np.hypot(np.diff(X), np.diff(Y))
    return float(np.max(np.abs(np.diff(logs)) / arc))


# ---------------------------------------------------------------------------
# fold image and critical position

def _box_segment(ctx: HenonContext, S: HorizontalCurve) -> Tuple[float, float]:
    """Parameters where S crosses the sides of the central box."""
    bx = build_named_boxes(ctx)["box"]
    out = []
    for side in (bx.left_curve, bx.right_curve):
        t = float(side(np.array(0.0))[0])
        for _ in range(50):
            nxt = float(side(np.array(float(S(t)[0])))[0])
            if abs(nxt - t) <= 1e-16:
                break
            t = nxt
        out.append(t)
    return out[0], out[1]


@dataclass
class FoldImage:
    """The curve t -> f^(M+1)(t, rho(t)) for t in S cap Y_box."""

    ctx: HenonContext
    S: HorizontalCurve
    t_lo: float
    t_hi: float

    def point(self, t, extra: int = 0):
        r, dr = self.S(t)
        X, Y, A, B, C, D = self.ctx.iterate(t, r, self.ctx.M + 1 + extra)
        return X, Y, A + B * dr, C + D * dr

    def gap(self, side: VerticalCurve, t):
        X, Y, _, _ = self.point(np.asarray(t, dtype=float))
        return X - side(Y)[0]

    def peak(self, side: VerticalCurve) -> Tuple[float, float]:
        fun = lambda t: -float(self.gap(side, t))
        res = minimize_scalar(fun, bounds=(self.t_lo, self.t_hi), method="bounded",
                              options={"xatol": 1e-14})
        t = float(res.x)
        best = -fun(t)
        for cand in (0.0,):
            if self.t_lo <= cand <= self.t_hi and -fun(cand) > best:
                t, best = cand, -fun(cand)
        return t, best

    def curvature(self, side: VerticalCurve, t: float) -> float:
        h = 1e-4 * (self.t_hi - self.t_lo)
        g = [float(self.gap(side, t + k * h)) for k in (-1, 0, 1)]
        return abs(g[0] - 2 * g[1] + g[2]) / (2 * h * h)

    def crossings(self, side: VerticalCurve) -> List[float]:
        t0, peak = self.peak(side)
        if peak < 0:
            return []
        tol = 1e-15 * 4.0 ** (self.ctx.M + 1)
        pad = 0.01 * (self.t_hi - self.t_lo)
        g = lambda t: float(self.gap(side, t))
        out = []
        for end, outer in ((self.t_lo, self.t_lo - pad), (self.t_hi, self.t_hi + pad)):
            ge = g(end)
            # the fold image ends on the sides of Y_eps, so endpoint zeros are expected
            if abs(ge) <= tol:
                out.append(end)
                continue
            lo, hi = (end, t0) if ge < 0 else (outer, end)
            if g(lo) * g(hi) > 0:
                continue
            out.append(brentq(g, min(lo, hi), max(lo, hi), xtol=1e-17, rtol=1e-15))
        return out


def fold_image(ctx: HenonContext, S: HorizontalCurve) -> FoldImage:
    lo, hi = _box_segment(ctx, S)
    return FoldImage(ctx, S, lo, hi)


def collars(ctx: HenonContext, Y: Box2D) -> Tuple[Optional[Box2D], Optional[Box2D]]:
    """The two neighbourhoods of the stable sides of a puzzle box used by the
    position test; a collar of zero depth on the s- side is empty."""
    if Y.word is None:
        raise NotAdmissible("collars need a box with a known word")
    j = aleph_n(ctx, Y.order)
    minus = None if j == 0 else realize_box(ctx, Y.word + s_minus_power(j))
    plus = realize_box(ctx, Y.word + Word((S_PLUS,)) + s_minus_power(j))
    return minus, plus


def aleph_n(ctx: HenonContext, n: int) -> int:
    return (2 * n + ctx.M) // 24


def _spatial_inner_sides(Y: Box2D, minus: Optional[Box2D], plus: Box2D):
    """Inner sides of the left and right collars, by position at y = 0."""
    mid = 0.5 * (Y.left + Y.right)
    plus_is_right = float(np.mean(plus.left + plus.right) / 2) > float(np.mean(mid))
    if plus_is_right:
        left_inner = minus.right_curve if minus is not None else Y.left_curve
        right_inner = plus.left_curve
    else:
        left_inner = plus.right_curve
        right_inner = minus.left_curve if minus is not None else Y.right_curve
    return left_inner, right_inner


def critical_position(ctx: HenonContext, S: HorizontalCurve, Y: Box2D,
                      tangency_tol: float = TANGENCY_TOL) -> str:
    """Classify how the fold image of S meets the puzzle box Y."""
    fold = fold_image(ctx, S)
    minus, plus = collars(ctx, Y)
    left_inner, right_inner = _spatial_inner_sides(Y, minus, plus)
    floor = 1e-15 * 4.0 ** (ctx.M + 1)
    verdicts = []
    for side in (Y.left_curve, left_inner, right_inner):
        t0, m = fold.peak(side)
        band = max(fold.curvature(side, t0) * (tangency_tol / 2) ** 2, floor)
        if abs(m) <= band:
            return INDETERMINATE
        verdicts.append(m > 0)
    reach_box, reach_core, reach_right = verdicts
    if not reach_box or not reach_core:
        return MISS
    if reach_right:
        return BOTH_SIDES
    return IN_POSITION


# ---------------------------------------------------------------------------
# parabolic segments and their extension

@dataclass(eq=False)
class ParabolicSegments:
    segments: Dict[int, Tuple[float, float]]
    curves: Dict[int, HorizontalCurve]
    x_box: Dict[int, float]
    closeness: Dict[int, float]
    closeness_scale: float


def _affine_point(ctx: HenonContext, signs: Tuple[int, ...], y0: float, x1: np.ndarray):
    """Y1(y0, x1) and d/dx1 Y1 on the branch given by signs."""
    n = len(signs)
    x = pullback_vec(ctx, signs, x1)
    y = np.full(x.shape, float(y0))

    def residual(x):
        X, Y, A, B, C, D = ctx.iterate(x, y, n)
        return X - x1, A

    x = _newton(residual, x, n, "chart nodes")
    X, Y, A, B, C, D = ctx.iterate(x, y, n)
    return Y, C / A


def parabolic_segments(ctx: HenonContext, S: HorizontalCurve, Y: Box2D, Yp: Box2D,
                       base_word: Optional[Word] = None) -> ParabolicSegments:
    """The two pieces of S whose fold image lies in cl(Y minus Y') left of Y',
    and their extended stretched images under f^(M+1+n)."""
    if Yp.word is None or Y.word is None:
        raise NotAdmissible("both boxes need words")
    if np.max(np.abs(Y.left - Yp.left)) <= 1e-15:
        raise NotInDomain("the two boxes share their left side")
    pos = critical_position(ctx, S, Yp)
    if pos != IN_POSITION:
        raise NotInDomain(f"curve is not in critical position with the inner box ({pos})")
    fold = fold_image(ctx, S)
    outer = fold.crossings(Y.left_curve)
    inner = fold.crossings(Yp.left_curve)
    if len(outer) != 2 or len(inner) != 2:
        raise RootCountError(f"expected two crossings per side, found {len(outer)} and {len(inner)}")
    segs = {-1: (outer[0], inner[0]), 1: (inner[1], outer[1])}
    n = Y.order
    total = ctx.M + 1 + n
    tilde_signs = _tau_signs(ctx.M) + Y.signs
    x1 = ctx.xgrid
    curves, xbox, close = {}, {}, {}
    reference = transform_simple(ctx, S, Y.word, strict=False) if base_word is None or \
        all(a.is_simple for a in base_word.letters) else None
    for sg, (ta, tb) in segs.items():
        t_in = inner[0] if sg < 0 else inner[1]
        ts = np.linspace(ta, tb, 4097)
        Xs = fold.point(ts, n)[0]
        x_in = float(fold.point(np.array(t_in), n)[0])
        lo, hi = float(np.min(Xs)), float(np.max(Xs))
        order = np.argsort(Xs)
        seed = np.interp(x1, Xs[order], ts[order])
        inside = (x1 >= lo) & (x1 <= hi)
        rho = np.empty_like(x1)
        drho = np.empty_like(x1)
        if inside.any():
            _, r_in, d_in = _invert_along(ctx, S, total, x1[inside], seed[inside])
            rho[inside], drho[inside] = r_in, d_in
        # slope of the fold branch at x_box
        _, r_box, d_box = _invert_along(ctx, S, total, np.array([x_in]), np.array([t_in]))
        r0 = float(S(np.array(t_in))[0])
        _, y_star = ctx.f(np.array(t_in), np.array(r0))
        y_star = float(y_star)
        base_val, base_slope = _affine_point(ctx, tilde_signs, y_star, np.array([x_in]))
        c0 = float(r_box[0] - base_val[0])
        c1 = float(d_box[0] - base_slope[0])
        outside = ~inside
        if outside.any():
            ext, ext_slope = _affine_point(ctx, tilde_signs, y_star, x1[outside])
            rho[outside] = ext + c0 + c1 * (x1[outside] - x_in)
            drho[outside] = ext_slope + c1
        curve = HorizontalCurve(x1.copy(), rho, drho)
        curves[sg] = curve
        xbox[sg] = x_in
        close[sg] = curve.distance(reference) if reference is not None else float("nan")
    scale = ctx.theta * ctx.b ** (n / 3.0)
    return ParabolicSegments(segs, curves, xbox, close, scale)


# ---------------------------------------------------------------------------
# affine-like charts

@dataclass(eq=False)
class AffineLikeRep:
    y0: np.ndarray
    x1: np.ndarray
    X0: np.ndarray
    Y1: np.ndarray
    order: int
    residual: float
    dx1_X0: float
    dx1_Y1: float
    dy0_X0: float
    bound_dx1_X0: float
    bound_dx1_Y1: float
    fitted_K: float

    @property
    def ok(self) -> bool:
        return self.dx1_X0 <= self.bound_dx1_X0 * (1 + 1e-9) and self.dx1_Y1 <= self.bound_dx1_Y1 + 1e-15


def affine_like(ctx: HenonContext, box: Box2D, n: Optional[int] = None,
                ny: int = 33, nx: int = 129, max_iter: int = 60) -> AffineLikeRep:
    """Sample (X0, Y1) on a (y0, x1) grid by solving f^n(., y0) = x1 per node."""
    n = box.order if n is None else n
    if n != len(box.signs):
        raise NotAdmissible("order does not match the branch data of the box")
    y0 = np.linspace(-ctx.theta, ctx.theta, ny)
    x1 = ctx.xgrid if nx == N_CURVE else np.linspace(ctx.quad.alpha0, -ctx.quad.alpha0, nx)
    YY, XX = np.meshgrid(y0, x1, indexing="ij")
    x = pullback_vec(ctx, box.signs, XX)

    def residual(x):
        X, Y, A, B, C, D = ctx.iterate(x, YY, n)
        return X - XX, A

    x = _newton(residual, x, n, "chart nodes", max_iter)
    X, Y, A, B, C, D = ctx.iterate(x, YY, n)
    roundtrip = float(np.max(np.abs(X - XX)))
    d_x1_X0 = float(np.max(np.abs(np.gradient(x, x1, axis=1))))
    d_x1_Y1 = float(np.max(np.abs(np.gradient(Y, x1, axis=1))))
    d_y0_X0 = float(np.max(np.abs(np.gradient(x, y0, axis=0))))
    K = d_y0_X0 / ctx.b_bound ** (2.0 / 3.0) if ctx.b_bound > 0 else 0.0
    return AffineLikeRep(y0, x1, x, Y, n, roundtrip, d_x1_X0, d_x1_Y1, d_y0_X0,
                         math.sqrt(1 + ctx.theta ** 2) * 2.0 ** (-n / 3.0), ctx.b_bound, K)


# ---------------------------------------------------------------------------
# piece conditions

@dataclass
class PieceMargins:
    inside: bool
    clearance: float
    expansion: float
    lower: float
    cone_h: float
    cone_v: float

    @property
    def ok(self) -> bool:
        return self.inside and min(self.expansion, self.lower, self.cone_h, self.cone_v) >= 1.0 - 1e-12


def verify_piece_conditions(ctx: HenonContext, box: Box2D, n: Optional[int] = None,
                            nx: int = 33, ny: int = 9) -> PieceMargins:
    """Sampled margins of the image, expansion and cone conditions on a box.

    Expansion uses the ratio |D f^n w| / (2^(m/3) |D f^(n-m) w|) at the same
    base point, the form that holds for simple pieces of the quadratic map.
    """
    n = box.order if n is None else n
    ys = np.linspace(-ctx.theta, ctx.theta, ny)
    fr = np.linspace(0.0, 1.0, nx)
    pts_x, pts_y = [], []
    for y in ys:
        lo, hi = box.slice_at(y)
        pts_x.append(lo + fr * (hi - lo))
        pts_y.append(np.full(nx, y))
    x = np.concatenate(pts_x)
    y = np.concatenate(pts_y)
    th = ctx.theta
    vecs = [np.array([1.0, th]), np.array([1.0, -th]), np.array([1.0, 0.0])]
    jacs = []
    xx, yy = x.copy(), y.copy()
    A = np.ones_like(x); B = np.zeros_like(x); C = np.zeros_like(x); D = np.ones_like(x)
    jacs.append((A, B, C, D))
    for _ in range(n):
        b1x, b1y, b2x, b2y = ctx.pert.jacobian(xx, yy)
        fx = 2.0 * xx + b1x
        A, B, C, D = fx * A + b1y * C, fx * B + b1y * D, b2x * A + b2y * C, b2x * B + b2y * D
        jacs.append((A, B, C, D))
        xx, yy = ctx.f(xx, yy)
    eps = y_eps(ctx)
    lo, hi = eps.left_curve(yy)[0], eps.right_curve(yy)[0]
    clearance = float(np.min(np.minimum(xx - lo, hi - xx)))
    inside = clearance >= -1e-9

    def apply(J, w):
        A, B, C, D = J
        return A * w[0] + B * w[1], C * w[0] + D * w[1]

    expansion = math.inf
    lower = math.inf
    bb = ctx.b_bound
    for w in vecs:
        wn = float(np.hypot(*w))
        nrm = [np.hypot(*apply(J, w)) for J in jacs]
        for m in range(1, n + 1):
            denom = 2.0 ** (m / 3.0) * nrm[n - m]
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(denom > 0, nrm[n] / denom, math.inf)
            expansion = min(expansion, float(np.min(r)))
            scale = bb ** (m / 6.0) * wn
            if scale > 0:
                lower = min(lower, float(np.min(nrm[m] / scale)))
    A, B, C, D = jacs[n]
    cone_h = math.inf
    for w in vecs[:2]:
        u, v = apply(jacs[n], w)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(v != 0, th * np.abs(u) / np.abs(v), math.inf)
        cone_h = min(cone_h, float(np.min(r)))
    cone_v = math.inf
    for e in (np.array([th, 1.0]), np.array([-th, 1.0])):
        # adjugate preimage: direction of J^-1 e, also valid when det J = 0
        ux = D * e[0] - B * e[1]
        uy = -C * e[0] + A * e[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(ux != 0, th * np.abs(uy) / np.abs(ux), math.inf)
        cone_v = min(cone_v, float(np.min(r)))
    return PieceMargins(inside, clearance, expansion, lower, cone_h, cone_v)


# ---------------------------------------------------------------------------
# strong regularity at small depth

@dataclass
class SR2DEntry:
    depth: int
    status: str
    word: Optional[Word]
    reason: str = ""


@dataclass
class SR2DReport:
    entries: Dict[str, List[SR2DEntry]]

    @property
    def status(self) -> str:
        flat = [e.status for v in self.entries.values() for e in v]
        if any(s == "fail" for s in flat):
            return "fail"
        if any(s == INDETERMINATE for s in flat):
            return INDETERMINATE
        return "pass"


def probe_curve(ctx: HenonContext, generator: Word) -> HorizontalCurve:
    """Approximation of the unstable curve indexed by ... s- s- . generator."""
    S = unstable_curve(ctx)
    if generator:
        S = graph_transform(ctx, S, generator)
    return S


def check_k_sr_2d(ctx: HenonContext, k: int, generators: Sequence[Word] = (EMPTY,)) -> SR2DReport:
    """Depth-by-depth search for the unique box in critical position with each test curve."""
    if k > 3:
        raise ValueError("depth above 3 is out of reach for the box search")
    letters = [Simple(sg, n) for n in range(2, ctx.M + 1) for sg in (-1, 1)]
    out: Dict[str, List[SR2DEntry]] = {}
    for gen in generators:
        entries: List[SR2DEntry] = []
        out[str(gen)] = entries
        if k <= 0:
            continue
        S = probe_curve(ctx, gen)
        prev = EMPTY
        for j in range(1, k + 1):
            found, unsure = [], []
            for a in letters:
                cand = prev + a
                try:
                    pos = critical_position(ctx, S, realize_box(ctx, cand))
                except (NotAdmissible, SolveFailure, BranchOverlap):
                    unsure.append(cand)
                    continue
                if pos == IN_POSITION:
                    found.append(cand)
                elif pos == INDETERMINATE:
                    unsure.append(cand)
            if len(found) > 1:
                entries.append(SR2DEntry(j, "fail", None, "several boxes in critical position"))
                break
            if unsure and not found:
                entries.append(SR2DEntry(j, INDETERMINATE, None, "tangency or solve failure near a candidate"))
                break
            if not found:
                reason = "no box in critical position"
                if prev and _tip_in_box(ctx, S, prev):
                    reason = "fold letter required"
                    entries.append(SR2DEntry(j, INDETERMINATE, None, reason))
                else:
                    entries.append(SR2DEntry(j, "fail", None, reason))
                break
            c = found[0]
            sym = ctx.quad.sym
            if not is_strongly_regular(sym, c):
                entries.append(SR2DEntry(j, "fail", c, "not strongly regular"))
                break
            if not is_common(sym, c):
                entries.append(SR2DEntry(j, "fail", c, "not common"))
                break
            entries.append(SR2DEntry(j, "pass", c))
            prev = c
    return SR2DReport(out)


def _tip_in_box(ctx: HenonContext, S: HorizontalCurve, prev: Word) -> bool:
    try:
        central = star_2d(ctx, realize_box(ctx, prev), build_named_boxes(ctx)["box"])
    except NotAdmissible:
        return False
    fold = fold_image(ctx, S)
    lo, hi = (central.left_curve, central.right_curve)
    return fold.peak(lo)[1] >= 0 and fold.peak(hi)[1] < 0
