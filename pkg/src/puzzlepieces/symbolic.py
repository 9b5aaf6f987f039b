"""Graded word monoid: letters, words, orders and the combinatorial predicates.

Letters come in two kinds.  ``Simple(sign, i)`` has order ``i`` and models the
simple pieces next to the fixed point.  ``Parabolic(sign, base, child)`` models
the fold piece built from the difference of two nested pieces; its order is
``M + 1 + order(base)``.  Letters are interned, so equality is identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .errors import BudgetExceeded, InvalidLetter, NotComplete, NotGreatlyRegular, ParseError

# relative slack on the irrational thresholds 2^-sqrt(M) and 2^-sqrt(2M)
SLACK = 1e-12


@dataclass(frozen=True)
class SymbolicContext:
    M: int

    def __post_init__(self):
        if not isinstance(self.M, int) or self.M < 6:
            raise ValueError(f"M must be an integer >= 6, got {self.M!r}")

    @property
    def sr_ratio(self) -> float:
        """Time fraction allowed to non-simple prime factors."""
        return 2.0 ** (-math.sqrt(self.M))

    @property
    def delta(self) -> float:
        return 2.0 ** (-math.sqrt(2 * self.M))


class Letter:
    __slots__ = ()
    is_simple = False

    def __repr__(self) -> str:
        return f"Letter({self})"


class Simple(Letter):
    """Letter of order ``index`` with a sign, interned on (sign, index)."""

    __slots__ = ("sign", "index")
    is_simple = True
    _cache: Dict[Tuple[int, int], "Simple"] = {}

    def __new__(cls, sign: int, index: int):
        key = (sign, index)
        obj = cls._cache.get(key)
        if obj is None:
            if sign not in (-1, 1):
                raise InvalidLetter(f"sign must be +1 or -1, got {sign}")
            if index < 2:
                raise InvalidLetter(f"simple letter index must be >= 2, got {index}")
            obj = object.__new__(cls)
            object.__setattr__(obj, "sign", sign)
            object.__setattr__(obj, "index", index)
            cls._cache[key] = obj
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("letters are immutable")

    def __reduce__(self):
        return (Simple, (self.sign, self.index))

    @property
    def order(self) -> int:
        return self.index

    def __str__(self) -> str:
        return f"s{'+' if self.sign > 0 else '-'}{self.index}"


class Parabolic(Letter):
    """Fold letter attached to the pair (base, child), interned structurally."""

    __slots__ = ("sign", "base", "child", "M", "order")
    _cache: Dict[tuple, "Parabolic"] = {}

    def __new__(cls, sign: int, base: "Word", child: "Word", M: int):
        key = (sign, base.letters, child.letters, M)
        obj = cls._cache.get(key)
        if obj is None:
            if sign not in (-1, 1):
                raise InvalidLetter(f"sign must be +1 or -1, got {sign}")
            obj = object.__new__(cls)
            object.__setattr__(obj, "sign", sign)
            object.__setattr__(obj, "base", base)
            object.__setattr__(obj, "child", child)
            object.__setattr__(obj, "M", M)
            object.__setattr__(obj, "order", M + 1 + base.order)
            cls._cache[key] = obj
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("letters are immutable")

    def __reduce__(self):
        return (Parabolic, (self.sign, self.base, self.child, self.M))

    @property
    def tail(self) -> "Word":
        """The prime complete word g'' with child = base . g''."""
        return self.child[len(self.base):]

    def __str__(self) -> str:
        return f"[{'+' if self.sign > 0 else '-'}{self.base}|{self.child}]"


S_MINUS = Simple(-1, 2)
S_PLUS = Simple(1, 2)


class Word:
    """Immutable finite sequence of letters with cached order and depth."""

    __slots__ = ("letters", "order", "depth", "_hash")

    def __init__(self, letters: Iterable[Letter] = ()):
        letters = tuple(letters)
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "order", sum(a.order for a in letters))
        object.__setattr__(self, "depth", sum(1 for a in letters if a.is_simple))
        object.__setattr__(self, "_hash", hash(letters))

    def __setattr__(self, name, value):
        raise AttributeError("words are immutable")

    def __reduce__(self):
        return (Word, (self.letters,))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Word(self.letters[item])
        return self.letters[item]

    def __add__(self, other: "Word") -> "Word":
        if isinstance(other, Letter):
            return Word(self.letters + (other,))
        return Word(self.letters + other.letters)

    def __eq__(self, other) -> bool:
        return isinstance(other, Word) and self._hash == other._hash and self.letters == other.letters

    def __hash__(self) -> int:
        return self._hash

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __str__(self) -> str:
        if not self.letters:
            return "e"
        return " ".join(str(a) for a in self.letters)

    def __repr__(self) -> str:
        return f"Word({str(self)!r})"

    def endswith(self, other: "Word") -> bool:
        k = len(other.letters)
        return k == 0 or (k <= len(self.letters) and self.letters[-k:] == other.letters)

    def startswith(self, other: "Word") -> bool:
        k = len(other.letters)
        return self.letters[:k] == other.letters


EMPTY = Word()


def word_key(w: Word) -> Tuple[int, str]:
    """Deterministic sort key."""
    return (w.order, str(w))


def s(sign: int, index: int) -> Word:
    """One-letter word of a simple letter."""
    return Word((Simple(sign, index),))


def s_minus_power(k: int) -> Word:
    return Word((S_MINUS,) * k)


# ---------------------------------------------------------------------------
# predicates

def aleph(ctx: SymbolicContext, n: int) -> int:
    return (2 * n + ctx.M) // 24


def in_Y0(ctx: SymbolicContext, a: Letter) -> bool:
    return a.is_simple and a.index <= ctx.M - 1


def is_prime(w: Word) -> bool:
    return len(w) > 0 and not any(a.is_simple for a in w.letters[:-1])


def is_complete(w: Word) -> bool:
    return len(w) > 0 and w.letters[-1].is_simple


def _ratio_ok(part: float, total: float, c: float) -> bool:
    return part <= c * total * (1.0 + SLACK)


def prime_decomposition(w: Word) -> List[Word]:
    if not w:
        return []
    if not is_complete(w):
        raise NotComplete(f"word {w} does not end with a simple letter")
    factors, start = [], 0
    for i, a in enumerate(w.letters):
        if a.is_simple:
            factors.append(Word(w.letters[start:i + 1]))
            start = i + 1
    return factors


def _tail_inequality(ctx: SymbolicContext, w: Word) -> bool:
    bound = 2 ** ctx.M
    total = 0
    for j, a in enumerate(w.letters):
        if j > 0 and a.order > bound * total:
            return False
        total += a.order
    return True


def is_regular(ctx: SymbolicContext, w: Word) -> bool:
    return len(w) > 0 and w.letters[0].is_simple and _tail_inequality(ctx, w)


def is_weakly_regular(ctx: SymbolicContext, w: Word) -> bool:
    return len(w) > 0 and w.letters[0].order <= ctx.M * 2 ** ctx.M and _tail_inequality(ctx, w)


def non_simple_time(ctx: SymbolicContext, w: Word) -> int:
    """Total order of the prime factors that are not single letters of Y_0."""
    total = 0
    for f in prime_decomposition(w):
        if not (len(f) == 1 and in_Y0(ctx, f.letters[0])):
            total += f.order
    return total


def is_strongly_regular(ctx: SymbolicContext, w: Word) -> bool:
    if not is_complete(w):
        return False
    c = ctx.sr_ratio
    bad = total = 0
    for f in prime_decomposition(w):
        total += f.order
        if not (len(f) == 1 and in_Y0(ctx, f.letters[0])):
            bad += f.order
        if not _ratio_ok(bad, total, c):
            return False
    return True


def is_common(ctx: SymbolicContext, w: Word) -> bool:
    letters = w.letters
    m = len(letters)
    prefix = 0
    for j in range(m + 1):
        if j > 0:
            prefix += letters[j - 1].order
            if not letters[j - 1].is_simple:
                continue
        mp = aleph(ctx, prefix)
        if mp >= 1 and m >= mp + j:
            if all(letters[j + i] is S_MINUS for i in range(mp)):
                return False
        if m >= mp + 1 + j and letters[j] is S_PLUS:
            if all(letters[j + 1 + i] is S_MINUS for i in range(mp)):
                return False
    return True


def big_letter_time(ctx: SymbolicContext, w: Word) -> int:
    """Total order carried by letters of order > M/2."""
    return sum(a.order for a in w.letters if 2 * a.order > ctx.M)


def is_greatly_regular(ctx: SymbolicContext, w: Word) -> bool:
    d = ctx.delta
    big = total = 0
    for a in w.letters:
        total += a.order
        if 2 * a.order > ctx.M:
            big += a.order
        if not _ratio_ok(big, total, d):
            return False
    return True


def is_perfect(ctx: SymbolicContext, w: Word) -> bool:
    after = 0
    for a in reversed(w.letters):
        if not a.is_simple and after < 16 * a.order:
            return False
        after += a.order
    return True


def in_first_alphabet(a: Letter) -> bool:
    """Membership in the depth-one alphabet: simple, or parabolic with empty base."""
    return a.is_simple or len(a.base) == 0


def is_favorable(ctx: SymbolicContext, w: Word) -> bool:
    return len(w) > 0 and in_first_alphabet(w.letters[0]) and is_weakly_regular(ctx, w)


@dataclass(frozen=True)
class WordFlags:
    prime: bool
    complete: bool
    regular: bool
    weakly_regular: bool
    strongly_regular: bool
    common: bool
    greatly_regular: bool
    perfect: bool
    favorable: bool
    depth: int


def classify(ctx: SymbolicContext, w: Word) -> WordFlags:
    return WordFlags(
        prime=is_prime(w),
        complete=is_complete(w),
        regular=is_regular(ctx, w),
        weakly_regular=is_weakly_regular(ctx, w),
        strongly_regular=is_strongly_regular(ctx, w),
        common=is_common(ctx, w),
        greatly_regular=is_greatly_regular(ctx, w),
        perfect=is_perfect(ctx, w),
        favorable=is_favorable(ctx, w),
        depth=w.depth,
    )


def capital_N(ctx: SymbolicContext, w: Word) -> int:
    """Smallest N >= n_w + floor(M/2) + 1 with N - n_w + big(w) > delta * N."""
    if not is_greatly_regular(ctx, w):
        raise NotGreatlyRegular(f"word {w} is not greatly regular")
    n = w.order
    big = big_letter_time(ctx, w)
    d = ctx.delta
    N = max(n + ctx.M // 2 + 1, int(math.floor((n - big) / (1.0 - d))) - 1)
    while not (N - n + big > d * N):
        N += 1
    return N


def capital_N_bounds(ctx: SymbolicContext, w: Word) -> Tuple[int, int]:
    """The two upper bounds max(2 delta n, M'+1) + n and (m+1) M' + 1."""
    half = ctx.M // 2
    n = w.order
    first = max(2 * ctx.delta * n, half + 1) + n
    second = (len(w) + 1) * half + 1
    return first, second


def canonical_injection(w: Word) -> List[int]:
    return [a.sign * a.order for a in w.letters]


# ---------------------------------------------------------------------------
# letter construction and parsing

def make_parabolic(ctx: SymbolicContext, sign: int, base: Word, child: Word,
                   validate: bool = True, require_common: bool = True) -> Parabolic:
    """Build the fold letter for the pair (base, child), checking its invariants."""
    if validate:
        if base and not is_complete(base):
            raise InvalidLetter(f"base {base} must be empty or complete")
        if not child.startswith(base) or len(child) == len(base):
            raise InvalidLetter(f"child {child} must extend base {base}")
        tail = child[len(base):]
        if not (is_prime(tail) and is_complete(tail)):
            raise InvalidLetter(f"child {child} must equal base times a prime complete word")
        if not is_strongly_regular(ctx, child):
            raise InvalidLetter(f"child {child} is not strongly regular")
        if require_common and not is_common(ctx, child):
            raise InvalidLetter(f"child {child} is not common")
        for a in child.letters:
            if a.is_simple and a.index > ctx.M:
                raise InvalidLetter(f"simple letter {a} exceeds M={ctx.M}")
    return Parabolic(sign, base, child, ctx.M)


class _Parser:
    def __init__(self, text: str, ctx: SymbolicContext, validate: bool):
        self.text = text
        self.i = 0
        self.ctx = ctx
        self.validate = validate

    def error(self, msg: str):
        raise ParseError(f"{msg} at position {self.i} in {self.text!r}")

    def skip(self):
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        return self.text[self.i] if self.i < len(self.text) else ""

    def word(self) -> Word:
        self.skip()
        if self.peek() == "e":
            nxt = self.text[self.i + 1:self.i + 2]
            if nxt in ("", "|", "]") or nxt.isspace():
                self.i += 1
                return EMPTY
        letters = []
        while True:
            self.skip()
            if self.peek() in ("", "|", "]"):
                break
            letters.append(self.letter())
        if not letters:
            self.error("empty word must be spelled 'e'")
        return Word(letters)

    def sign(self) -> int:
        c = self.peek()
        if c not in "+-" or not c:
            self.error("expected sign")
        self.i += 1
        return 1 if c == "+" else -1

    def letter(self) -> Letter:
        c = self.peek()
        if c == "s":
            self.i += 1
            sign = self.sign()
            start = self.i
            while self.peek().isdigit():
                self.i += 1
            if start == self.i:
                self.error("expected index")
            index = int(self.text[start:self.i])
            if index < 2 or index > self.ctx.M:
                self.error(f"simple index {index} outside [2, {self.ctx.M}]")
            return Simple(sign, index)
        if c == "[":
            self.i += 1
            sign = self.sign()
            base = self.word()
            if self.peek() != "|":
                self.error("expected '|'")
            self.i += 1
            child = self.word()
            if self.peek() != "]":
                self.error("expected ']'")
            self.i += 1
            try:
                return make_parabolic(self.ctx, sign, base, child, validate=self.validate)
            except InvalidLetter as exc:
                raise ParseError(str(exc)) from exc
        self.error(f"unexpected character {c!r}")


def parse_word(text: str, ctx: SymbolicContext, validate: bool = True) -> Word:
    p = _Parser(text.strip(), ctx, validate)
    w = p.word()
    p.skip()
    if p.i != len(p.text):
        p.error("trailing characters")
    return w


# ---------------------------------------------------------------------------
# enumeration

def simple_letters(ctx: SymbolicContext, max_order: Optional[int] = None) -> List[Simple]:
    top = ctx.M if max_order is None else min(ctx.M, max_order)
    return [Simple(sg, i) for i in range(2, top + 1) for sg in (-1, 1)]


def _words_dfs(letters: Sequence[Letter], max_order: int, keep: Callable[[Word], bool],
               prune: Callable[[Word], bool], cap: int) -> List[Word]:
    letters = sorted(letters, key=lambda a: (a.order, str(a)))
    out: List[Word] = []

    def rec(prefix: Tuple[Letter, ...], order: int):
        w = Word(prefix)
        if keep(w):
            out.append(w)
            if len(out) > cap:
                raise BudgetExceeded(f"more than {cap} words")
        for a in letters:
            if order + a.order > max_order:
                break
            nxt = prefix + (a,)
            if prune(Word(nxt)):
                rec(nxt, order + a.order)

    rec((), 0)
    return out


def enumerate_words(ctx: SymbolicContext, j: int, constraint: Optional[Callable[[Word], bool]] = None,
                    letters: Optional[Iterable[Letter]] = None, prefix_closed: bool = False,
                    cap: int = 2_000_000) -> List[Word]:
    """All words of order <= j over ``letters`` passing ``constraint``.

    ``letters`` defaults to the alphabet of every letter of order <= j.  When
    ``prefix_closed`` is set the constraint is also used to prune prefixes.
    """
    if letters is None:
        letters = enumerate_letters(ctx, max(j, 0), j)
    keep = constraint or (lambda w: True)
    prune = keep if prefix_closed else (lambda w: True)
    return _words_dfs(list(letters), j, keep, prune, cap)


def _sr_common_prefix_ok(ctx: SymbolicContext, require_common: bool) -> Callable[[Word], bool]:
    def ok(w: Word) -> bool:
        if require_common and not is_common(ctx, w):
            return False
        if is_complete(w):
            return is_strongly_regular(ctx, w)
        return True
    return ok


@lru_cache(maxsize=None)
def _letters_cached(M: int, k: int, j: int, require_common: bool) -> frozenset:
    ctx = SymbolicContext(M)
    base_letters = frozenset(simple_letters(ctx, j))
    if k == 0 or j < M + 1:
        return base_letters
    prev = _letters_cached(M, k - 1, j, require_common)
    prev_sorted = sorted(prev, key=lambda a: (a.order, str(a)))
    c = ctx.sr_ratio
    ok = _sr_common_prefix_ok(ctx, require_common)
    # candidate bases: empty or complete strongly regular (and common) words of depth < k
    base_budget = j - M - 1
    bases = [EMPTY] + _words_dfs(prev_sorted, base_budget, lambda w: is_complete(w) and ok(w),
                                 lambda w: w.depth <= k - 1 and ok(w), 10 ** 7)
    result = set(base_letters)
    for g1 in bases:
        tail_budget = max(M - 1, int(math.floor(c * g1.order / (1.0 - c) * (1 + SLACK))))
        parabolic_prev = [a for a in prev_sorted if not a.is_simple and a.order <= tail_budget]
        simple_prev = [a for a in prev_sorted if a.is_simple and a.order <= tail_budget]

        def tails(prefix: Tuple[Letter, ...], order: int):
            for a in simple_prev:
                if order + a.order <= tail_budget:
                    yield prefix + (a,)
            for a in parabolic_prev:
                if order + a.order <= tail_budget:
                    yield from tails(prefix + (a,), order + a.order)

        for t in tails((), 0):
            child = g1 + Word(t)
            if child.depth > k:
                continue
            if not is_strongly_regular(ctx, child):
                continue
            if require_common and not is_common(ctx, child):
                continue
            for sg in (-1, 1):
                letter = Parabolic(sg, g1, child, M)
                if letter.order <= j:
                    result.add(letter)
    return frozenset(result)


def enumerate_letters(ctx: SymbolicContext, k: int, j: int, require_common: bool = True) -> frozenset:
    """Letters of the depth-k alphabet with order <= j.

    Fold letters need a strongly regular child; with ``require_common`` (the
    default) the child must also be common.  Turning it off gives the smaller
    closed-form alphabets that ignore the common condition.
    """
    if k < 0 or j < 0:
        raise ValueError("k and j must be non-negative")
    return _letters_cached(ctx.M, k, j, require_common)
