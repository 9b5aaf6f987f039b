"""Command line entry point: ``pzd <group> <command> [options]``.

Settings resolve as flags > PZD_* environment variables > config file
("key = value" lines, path from --config or PZD_CONFIG) > built-in defaults.
Exit codes: 0 success, 1 precondition error, 2 indeterminate results
dominate, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import divisibility as dv
from . import henon2d as h2
from . import paramscan as ps
from . import quad1d as q1
from .errors import PuzzleError
from .symbolic import EMPTY, SymbolicContext, Word, classify, parse_word

EXIT_OK, EXIT_PRECONDITION, EXIT_INDETERMINATE, EXIT_USAGE = 0, 1, 2, 64

DEFAULTS = {
    "M": "8",
    "a": "",
    "b": "0",
    "family": "zero",
    "theta": str(h2.DEFAULT_THETA),
    "tol": str(q1.DEFAULT_TOL),
    "out": "text",
    "seed": "0",
    "threads": "1",
}
SETTINGS = tuple(DEFAULTS)


class UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser):
        super().__init__(message)
        self.parser = parser


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


# ---------------------------------------------------------------------------
# configuration

def read_config(path: Optional[str]) -> Dict[str, str]:
    if not path:
        return {}
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


class Config:
    def __init__(self, args: argparse.Namespace, env=os.environ):
        self.args = args
        self.env = env
        self.file = read_config(getattr(args, "config", None) or env.get("PZD_CONFIG"))

    def raw(self, key: str) -> str:
        flag = getattr(self.args, key, None)
        if flag is not None:
            return str(flag)
        env = self.env.get(f"PZD_{key.upper()}")
        if env is not None:
            return env
        if key in self.file:
            return self.file[key]
        return DEFAULTS[key]

    def int(self, key: str) -> int:
        return int(self.raw(key))

    def float(self, key: str) -> float:
        return float(self.raw(key))

    def a(self) -> float:
        text = self.raw("a")
        if text:
            return float(text)
        lo, hi = ps.window(self.int("M"))
        return 0.5 * (lo + hi)

    def sym(self) -> SymbolicContext:
        return SymbolicContext(self.int("M"))


# ---------------------------------------------------------------------------
# output

def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "none"
    return str(v)


class Output:
    def __init__(self, kind: str, stream):
        if kind not in ("text", "csv"):
            raise ValueError(f"output format must be text or csv, got {kind!r}")
        self.kind = kind
        self.stream = stream
        self.header: Optional[List[str]] = None

    def record(self, **fields):
        if self.kind == "csv":
            if self.header is None:
                self.header = list(fields)
                self._csv(self.header)
            self._csv([fmt(fields.get(k)) for k in self.header])
        else:
            self.stream.write(" ".join(f"{k}={_quote(fmt(v))}" for k, v in fields.items()) + "\n")

    def _csv(self, row):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(row)
        self.stream.write(buf.getvalue())


def _quote(s: str) -> str:
    return f'"{s}"' if (" " in s or not s) else s


# ---------------------------------------------------------------------------
# word commands

def cmd_word_div(cfg, out, args):
    sym = cfg.sym()
    g, d = parse_word(args.g, sym), parse_word(args.d, sym)
    out.record(divides=dv.divides(g, d))


def cmd_word_gcd(cfg, out, args):
    sym = cfg.sym()
    g, nu = dv.gcd_nu(parse_word(args.g, sym), parse_word(args.h, sym))
    out.record(gcd=g, nu=nu)


def cmd_word_dist(cfg, out, args):
    sym = cfg.sym()
    t = dv.parse_left_sequence(args.t, sym)
    u = dv.parse_left_sequence(args.u, sym)
    b = args.base
    out.record(nu=dv.nu(sym, t, u), dist=dv.ultrametric_dist(sym, t, u, b))


def cmd_word_fav(cfg, out, args):
    sym = cfg.sym()
    t = dv.parse_left_sequence(args.t, sym)
    for w in dv.favorable_divisors(sym, t, args.max_order):
        out.record(divisor=w, order=w.order)


def cmd_word_pi(cfg, out, args):
    sym = cfg.sym()
    t = dv.parse_left_sequence(args.t, sym)
    out.record(projection=dv.project_pi(sym, t, args.budget))


def cmd_word_classify(cfg, out, args):
    sym = cfg.sym()
    w = parse_word(args.w, sym)
    flags = classify(sym, w)
    out.record(word=w, order=w.order, **vars(flags))


# ---------------------------------------------------------------------------
# quad commands

def quad_ctx(cfg):
    return q1.build_context(cfg.a(), tol=cfg.float("tol"))


def cmd_quad_context(cfg, out, args):
    ctx = quad_ctx(cfg)
    out.record(a=ctx.a, M=ctx.M, beta=ctx.beta, alpha0=ctx.alpha0,
               critical_value=ctx.critical_value, alpha_M1=ctx.alphas[ctx.M - 1], alpha_M=ctx.alphas[ctx.M])


def cmd_quad_piece(cfg, out, args):
    ctx = quad_ctx(cfg)
    w = parse_word(args.word, ctx.sym)
    p = q1.realize_word(ctx, w)
    out.record(word=w, order=p.order, lo=p.lo, hi=p.hi, puzzle=p.is_puzzle,
               leb_g=q1.leb_g(ctx, [p.interval]))


def cmd_quad_itinerary(cfg, out, args):
    ctx = quad_ctx(cfg)
    it = q1.critical_itinerary(ctx, args.depth)
    for j, w in enumerate(it.words, 1):
        out.record(depth=j, word=w, order=w.order, strongly_regular=it.strongly_regular[j - 1],
                   common=it.common[j - 1])


def cmd_quad_sr(cfg, out, args):
    ctx = quad_ctx(cfg)
    rep = q1.check_sr_1d(ctx, args.depth)
    out.record(a=ctx.a, M=ctx.M, status=rep.status, depth_passed=rep.depth_passed,
               words=" ; ".join(str(w) for w in rep.words), reason=rep.reason)
    return EXIT_INDETERMINATE if rep.status == q1.INDETERMINATE else EXIT_OK


def cmd_quad_bounds(cfg, out, args):
    ctx = quad_ctx(cfg)
    names = q1.ALL_CHECKS if args.checks == "all" else [c.strip() for c in args.checks.split(",") if c.strip()]
    results = q1.verify_yoccoz_bounds(ctx, names, n_grid=args.grid, seed=cfg.int("seed"))
    for r in results:
        out.record(name=r.name, margin=r.margin, passed=r.passed, fitted_C=r.fitted_C, detail=r.detail)
    return EXIT_OK if all(r.passed for r in results) else EXIT_PRECONDITION


def cmd_quad_ce(cfg, out, args):
    ctx = quad_ctx(cfg)
    logs = q1.collet_eckmann(ctx, args.n)
    step = max(1, args.n // args.rows)
    for n in range(step, args.n + 1, step):
        out.record(n=n, log2_derivative_rate=logs[n - 1])


# ---------------------------------------------------------------------------
# henon commands

def henon_ctx(cfg):
    return h2.build_henon_context(cfg.a(), cfg.raw("family"), cfg.float("b"),
                                  theta=cfg.float("theta"), tol=cfg.float("tol"))


def _box_for(ctx, text: str):
    named = h2.build_named_boxes(ctx)
    if text in ("box", "tau", "e"):
        return named[text]
    return h2.realize_box(ctx, parse_word(text, ctx.quad.sym))


def cmd_henon_boxes(cfg, out, args):
    ctx = henon_ctx(cfg)
    named = h2.build_named_boxes(ctx)
    if args.dump:
        for y, l, r in named[args.dump].rows():
            out.record(y=y, left=l, right=r)
        return
    for name, bx in named.boxes.items():
        lo, hi = bx.slice_at(0.0)
        out.record(name=name, order=bx.order, left=lo, right=hi, puzzle=bx.is_puzzle)
    out.record(name="summary", cover_residual=named.cover_residual, seam_gap=named.seam_gap,
               image_in_tau=named.box_in_tau)


def cmd_henon_transform(cfg, out, args):
    ctx = henon_ctx(cfg)
    w = parse_word(args.word, ctx.quad.sym)
    S = h2.HorizontalCurve.constant(ctx, args.start)
    prev = S
    for i in range(args.iters):
        S = h2.graph_transform(ctx, S, w)
        if args.trace:
            out.record(iteration=i + 1, step=S.distance(prev))
        prev = S
    if not args.trace:
        for x, r in S.rows():
            out.record(x=x, rho=r)


def cmd_henon_affine(cfg, out, args):
    ctx = henon_ctx(cfg)
    rep = h2.affine_like(ctx, _box_for(ctx, args.word))
    out.record(order=rep.order, roundtrip=rep.residual, dx1_X0=rep.dx1_X0, bound_dx1_X0=rep.bound_dx1_X0,
               dx1_Y1=rep.dx1_Y1, bound_dx1_Y1=rep.bound_dx1_Y1, dy0_X0=rep.dy0_X0, fitted_K=rep.fitted_K,
               ok=rep.ok)


def cmd_henon_critical(cfg, out, args):
    ctx = henon_ctx(cfg)
    gen = parse_word(args.word, ctx.quad.sym) if args.word else EMPTY
    S = h2.probe_curve(ctx, gen)
    target = parse_word(args.target, ctx.quad.sym)
    pos = h2.critical_position(ctx, S, h2.realize_box(ctx, target))
    out.record(generator=gen, target=target, position=pos)
    return EXIT_INDETERMINATE if pos == h2.INDETERMINATE else EXIT_OK


def cmd_henon_verify(cfg, out, args):
    ctx = henon_ctx(cfg)
    bx = _box_for(ctx, args.word)
    m = h2.verify_piece_conditions(ctx, bx, args.n)
    out.record(word=args.word, order=bx.order if args.n is None else args.n, inside=m.inside,
               clearance=m.clearance, expansion=m.expansion, lower=m.lower, cone_h=m.cone_h,
               cone_v=m.cone_v, ok=m.ok)


def cmd_henon_sr(cfg, out, args):
    ctx = henon_ctx(cfg)
    gens = [parse_word(g, ctx.quad.sym) for g in args.generator] or [EMPTY]
    rep = h2.check_k_sr_2d(ctx, args.depth, gens)
    for gen, entries in rep.entries.items():
        for e in entries:
            out.record(generator=gen, depth=e.depth, status=e.status, word=e.word, reason=e.reason)
    out.record(generator="all", status=rep.status)
    return EXIT_INDETERMINATE if rep.status == h2.INDETERMINATE else EXIT_OK


# ---------------------------------------------------------------------------
# scan commands

def cmd_scan_roots(cfg, out, args):
    for m in range(1, args.m_max + 1):
        out.record(m=m, a_m=ps.root_a_m(m))


def cmd_scan_sr(cfg, out, args):
    lo, hi = ps.window(cfg.int("M"))
    a_lo = lo if args.a_lo is None else args.a_lo
    a_hi = hi if args.a_hi is None else args.a_hi
    res = ps.scan_sr(a_lo, a_hi, args.depth, args.n, threads=cfg.int("threads"))
    for r in res.records:
        out.record(a=r.a, M=r.M, sr_depth=r.sr_depth, status=r.status(args.depth),
                   words=" ; ".join(r.words))
    c = res.counts(args.depth)
    return EXIT_INDETERMINATE if c[q1.INDETERMINATE] > c[q1.PASS] + c[q1.FAIL] else EXIT_OK


def cmd_scan_pesin(cfg, out, args):
    ctx = quad_ctx(cfg)
    res = ps.pesin_set_measure(ctx, args.order, depth=args.depth)
    if args.gaps:
        out.stream.write(res.gap_set(ctx).to_text())
        return
    out.record(a=ctx.a, M=ctx.M, order=args.order, measure=res.measure, pieces=res.n_pieces,
               itinerary_depth=res.itinerary_depth, truncated=res.truncated)


def cmd_scan_gaps(cfg, out, args):
    gs = ps.GapSet.read(args.input)
    out.record(gaps=len(gs.gaps), diameter=gs.diameter, measure=gs.measure(), d=args.d,
               lp_sum=ps.gap_lp_sum(gs, args.d))


def cmd_scan_bm13(cfg, out, args):
    K, Kt = ps.GapSet.read(args.k), ps.GapSet.read(args.ktilde)
    r = ps.bm13_inclusion(K, Kt, args.d, args.ck, sweep=not args.no_sweep)
    out.record(cond_i=r.cond_i, cond_ii=r.cond_ii, measure=r.measure, sweep_measure=r.sweep_measure)


def cmd_scan_pliss(cfg, out, args):
    if args.input:
        X = np.loadtxt(args.input, ndmin=1)
    else:
        rng = np.random.default_rng(cfg.int("seed"))
        X = rng.uniform(0.0, args.A, size=args.k)
        X *= max(1.0, args.c2 * len(X) / X.sum())
        X = np.minimum(X, args.A)
    times = ps.pliss_times(X, args.A, args.c1, args.c2)
    out.record(k=len(X), count=len(times), lower_bound=ps.pliss_lower_bound(len(X), args.A, args.c1, args.c2),
               times=" ".join(str(t) for t in times))


def cmd_scan_count_en(cfg, out, args):
    M = cfg.int("M")
    for N in range(args.n_min, args.n + 1):
        count, bound = ps.count_EN(N, M)
        out.record(N=N, M=M, count=count, bound=bound, within=count <= bound)


# ---------------------------------------------------------------------------
# parser

def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("settings")
    g.add_argument("--M", type=int, default=None, help="first return time for word parsing and windows")
    g.add_argument("--a", type=float, default=None, help="parameter (default: middle of the M window)")
    g.add_argument("--b", type=float, default=None, help="perturbation size")
    g.add_argument("--family", choices=sorted(h2.FAMILIES), default=None)
    g.add_argument("--theta", type=float, default=None)
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--out", choices=("text", "csv"), default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--threads", type=int, default=None)
    g.add_argument("--config", default=None, help="file of 'key = value' lines")


def build_parser() -> argparse.ArgumentParser:
    root = Parser(prog="pzd", description="Puzzle pieces for quadratic and Henon-like maps.")
    groups = root.add_subparsers(dest="group", metavar="{word,quad,henon,scan}", parser_class=Parser)
    groups.required = True

    def leaf(sub, name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        p.set_defaults(fn=fn)
        return p

    word = groups.add_parser("word", help="word arithmetic").add_subparsers(dest="cmd", parser_class=Parser)
    word.required = True
    p = leaf(word, "div", cmd_word_div, "does D right-divide G")
    p.add_argument("g"); p.add_argument("d")
    p = leaf(word, "gcd", cmd_word_gcd, "greatest common right divisor")
    p.add_argument("g"); p.add_argument("h")
    p = leaf(word, "dist", cmd_word_dist, "ultrametric distance of two left sequences")
    p.add_argument("t"); p.add_argument("u")
    p.add_argument("--base", type=float, default=0.5, help="base of the distance b^(nu/4)")
    p = leaf(word, "fav", cmd_word_fav, "favorable divisors of a left sequence")
    p.add_argument("t"); p.add_argument("--max-order", type=int, default=64)
    p = leaf(word, "pi", cmd_word_pi, "projection onto the largest favorable divisor within a budget")
    p.add_argument("t"); p.add_argument("--budget", type=int, required=True)
    p = leaf(word, "classify", cmd_word_classify, "word predicates")
    p.add_argument("w")

    quad = groups.add_parser("quad", help="one-dimensional pieces").add_subparsers(dest="cmd", parser_class=Parser)
    quad.required = True
    leaf(quad, "context", cmd_quad_context, "fixed point data and return time")
    p = leaf(quad, "piece", cmd_quad_piece, "realize a word as an interval")
    p.add_argument("--word", required=True)
    p = leaf(quad, "itinerary", cmd_quad_itinerary, "critical words")
    p.add_argument("--depth", type=int, default=3)
    p = leaf(quad, "sr", cmd_quad_sr, "strong regularity up to a depth")
    p.add_argument("--depth", type=int, default=3)
    p = leaf(quad, "bounds", cmd_quad_bounds, "numerical checks of the expansion and geometry bounds")
    p.add_argument("--checks", default="all", help="comma separated names or 'all': " + ",".join(q1.ALL_CHECKS))
    p.add_argument("--grid", type=int, default=1000)
    p = leaf(quad, "ce", cmd_quad_ce, "growth rate of the derivative along the critical orbit")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--rows", type=int, default=10)

    henon = groups.add_parser("henon", help="two-dimensional boxes and curves").add_subparsers(dest="cmd", parser_class=Parser)
    henon.required = True
    p = leaf(henon, "boxes", cmd_henon_boxes, "named boxes (or dump one as y, left, right rows)")
    p.add_argument("--dump", default=None, help="box name: e, tau, box, s-2, ...")
    p = leaf(henon, "transform", cmd_henon_transform, "iterate a graph transform from a constant curve")
    p.add_argument("--word", required=True)
    p.add_argument("--iters", type=int, default=1)
    p.add_argument("--start", type=float, default=0.0, help="height of the initial constant curve")
    p.add_argument("--trace", action="store_true", help="print successive distances instead of the curve")
    p = leaf(henon, "affine", cmd_henon_affine, "affine-like chart diagnostics")
    p.add_argument("--word", required=True)
    p = leaf(henon, "critical", cmd_henon_critical, "position of a test curve relative to a box")
    p.add_argument("--word", default="", help="generator of the test curve (empty: unstable curve)")
    p.add_argument("--target", required=True)
    p = leaf(henon, "verify", cmd_henon_verify, "sampled piece conditions")
    p.add_argument("--word", required=True)
    p.add_argument("--n", type=int, default=None)
    p = leaf(henon, "sr", cmd_henon_sr, "critical position search up to a depth")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--generator", action="append", default=[])

    scan = groups.add_parser("scan", help="parameter scans and estimates").add_subparsers(dest="cmd", parser_class=Parser)
    scan.required = True
    p = leaf(scan, "roots", cmd_scan_roots, "parameters where the critical value hits alpha_m")
    p.add_argument("--m-max", type=int, default=12)
    p = leaf(scan, "sr", cmd_scan_sr, "strong regularity on a parameter grid")
    p.add_argument("--a-lo", type=float, default=None)
    p.add_argument("--a-hi", type=float, default=None)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--n", type=int, default=1000)
    p = leaf(scan, "pesin", cmd_scan_pesin, "measure of the surviving strongly regular pieces")
    p.add_argument("--order", type=int, default=10)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--gaps", action="store_true", help="print the surviving set as a gap-set file")
    p = leaf(scan, "gaps", cmd_scan_gaps, "sum of gap lengths to the power d")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--d", type=float, required=True)
    p = leaf(scan, "bm13", cmd_scan_bm13, "translation inclusion test for two gap sets")
    p.add_argument("--k", required=True)
    p.add_argument("--ktilde", required=True)
    p.add_argument("--d", type=float, default=0.5)
    p.add_argument("--ck", type=float, default=1.0)
    p.add_argument("--no-sweep", action="store_true")
    p = leaf(scan, "pliss", cmd_scan_pliss, "times whose tail averages stay above c1")
    p.add_argument("--in", dest="input", default=None, help="file of numbers (default: random sample)")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--A", type=float, default=2.0)
    p.add_argument("--c1", type=float, default=0.5)
    p.add_argument("--c2", type=float, default=1.0)
    p = leaf(scan, "count-en", cmd_scan_count_en, "exact count of signed compositions with the bound")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--n-min", type=int, default=2)
    return root


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(f"usage error: {exc}\n")
        stderr.write(exc.parser.format_help())
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        cfg = Config(args)
        out = Output(cfg.raw("out"), stdout)
        code = args.fn(cfg, out, args)
    except (PuzzleError, ValueError, OSError) as exc:
        stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_PRECONDITION
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
