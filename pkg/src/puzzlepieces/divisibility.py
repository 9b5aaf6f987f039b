"""Right divisibility of words, greatest common divisors and the left-infinite
sequences padded by repeated ``s-2`` letters.

A word ``d`` divides ``g`` on the right when ``d = x . g[i+1:]`` for some
position ``i`` where ``x`` is either the letter ``g[i]`` itself or, for a fold
letter, a divisor of its base.  Divisors of a fixed word form a chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import FrozenSet, List, Optional, Tuple

from .symbolic import (
    EMPTY,
    S_MINUS,
    Letter,
    SymbolicContext,
    Word,
    is_favorable,
    parse_word,
    s_minus_power,
)
from .errors import ParseError


def letter_divides(a: Letter, x: Word) -> bool:
    if not x:
        return True
    if len(x) == 1 and x.letters[0] is a:
        return True
    return (not a.is_simple) and divides(a.base, x)


def divides(g: Word, d: Word) -> bool:
    """True when ``d`` right-divides ``g``."""
    if not d:
        return True
    if not g:
        return False
    gl, dl = g.letters, d.letters
    lg, ld = len(gl), len(dl)
    for m in range(lg):
        if letter_divides(gl[lg - 1 - m], Word(dl[:ld - m])):
            return True
        if m >= ld - 1 or gl[lg - 1 - m] is not dl[ld - 1 - m]:
            break
    return False


@lru_cache(maxsize=200_000)
def letter_divisor_set(a: Letter) -> FrozenSet[Word]:
    out = {Word((a,))}
    if not a.is_simple:
        out |= divisor_set(a.base)
    return frozenset(out)


@lru_cache(maxsize=200_000)
def divisor_set(w: Word) -> FrozenSet[Word]:
    """Every right divisor of ``w`` (a chain under divisibility)."""
    out = {EMPTY}
    letters = w.letters
    for i, a in enumerate(letters):
        rest = letters[i + 1:]
        for x in letter_divisor_set(a):
            out.add(Word(x.letters + rest))
    return frozenset(out)


def divisor_chain(w: Word) -> List[Word]:
    """Divisors sorted by increasing order."""
    return sorted(divisor_set(w), key=lambda d: d.order)


def gcd_nu(g: Word, h: Word) -> Tuple[Word, int]:
    common = divisor_set(g) & divisor_set(h)
    best = max(common, key=lambda d: d.order)
    return best, best.order


# ---------------------------------------------------------------------------
# left-infinite sequences

@dataclass(frozen=True)
class LeftSequence:
    """The sequence ``... s-2 s-2 . suffix``; leading ``s-2`` letters are absorbed."""

    suffix: Word = EMPTY

    def __post_init__(self):
        letters = self.suffix.letters
        k = 0
        while k < len(letters) and letters[k] is S_MINUS:
            k += 1
        if k:
            object.__setattr__(self, "suffix", Word(letters[k:]))

    def truncation(self, pad: int) -> Word:
        return s_minus_power(pad) + self.suffix

    def __str__(self) -> str:
        return f"tA . {self.suffix}"


TAIL = LeftSequence(EMPTY)


def parse_left_sequence(text: str, ctx: SymbolicContext) -> LeftSequence:
    text = text.strip()
    if not text.startswith("tA"):
        raise ParseError(f"left sequence must start with 'tA': {text!r}")
    rest = text[2:].strip()
    if not rest:
        return TAIL
    if not rest.startswith("."):
        raise ParseError(f"expected '.' after 'tA' in {text!r}")
    return LeftSequence(parse_word(rest[1:], ctx))


def _default_pad(ctx: SymbolicContext, *seqs: LeftSequence) -> int:
    return max(t.suffix.order for t in seqs) + 4 * ctx.M


def nu(ctx: SymbolicContext, t: LeftSequence, u: LeftSequence, max_doublings: int = 6) -> float:
    """Order of the common divisor of two sequences; ``inf`` when they coincide."""
    if t == u:
        return math.inf
    pad = _default_pad(ctx, t, u)
    value = gcd_nu(t.truncation(pad), u.truncation(pad))[1]
    for _ in range(max_doublings):
        pad *= 2
        nxt = gcd_nu(t.truncation(pad), u.truncation(pad))[1]
        if nxt == value:
            return float(value)
        value = nxt
    raise RuntimeError("divisor order did not stabilize under truncation doubling")


def ultrametric_dist(ctx: SymbolicContext, t: LeftSequence, u: LeftSequence, b: float) -> float:
    if not 0.0 < b < 1.0:
        raise ValueError("b must lie in (0, 1)")
    v = nu(ctx, t, u)
    if math.isinf(v):
        return 0.0
    return b ** (v / 4.0)


def sequence_divisors(t: LeftSequence, max_order: int) -> List[Word]:
    """Right divisors of ``t`` of order <= max_order, by increasing order."""
    pad = max_order // 2 + 1
    divs = [d for d in divisor_set(t.truncation(pad)) if d.order <= max_order]
    return sorted(divs, key=lambda d: d.order)


def favorable_divisors(ctx: SymbolicContext, t: LeftSequence, max_order: int) -> List[Word]:
    return [d for d in sequence_divisors(t, max_order) if is_favorable(ctx, d)]


def project_pi(ctx: SymbolicContext, t: LeftSequence, budget: int) -> LeftSequence:
    """Keep the favorable divisor of largest order within ``budget``."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    fav = favorable_divisors(ctx, t, budget)
    if not fav:
        return TAIL
    return LeftSequence(fav[-1])


def project_pi_scaled(ctx: SymbolicContext, t: LeftSequence, k: int) -> LeftSequence:
    """Projection with the budget ``k * 2**-M`` (degenerate unless k is huge)."""
    return project_pi(ctx, t, int(math.floor(k * 2.0 ** (-ctx.M))))
