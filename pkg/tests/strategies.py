"""Hypothesis strategies for words with nested fold letters."""

from hypothesis import strategies as st

from puzzlepieces.symbolic import EMPTY, Parabolic, Simple, Word


def simple_letter(M):
    return st.builds(Simple, st.sampled_from((-1, 1)), st.integers(2, M))


def words(M, max_letters=6, nesting=2):
    """Random words; fold letters are built structurally (no validity checks)."""
    letter = simple_letter(M)
    for _ in range(nesting):
        letter = st.one_of(simple_letter(M), _fold(M, letter))
    return st.lists(letter, max_size=max_letters).map(Word)


def _fold(M, inner):
    @st.composite
    def build(draw):
        base_letters = draw(st.lists(inner, max_size=3))
        if base_letters:
            base_letters.append(draw(simple_letter(M)))
        base = Word(base_letters)
        tail = draw(st.lists(inner.filter(lambda a: not a.is_simple), max_size=1))
        tail.append(draw(simple_letter(M)))
        child = base + Word(tail)
        return Parabolic(draw(st.sampled_from((-1, 1))), base, child, M)
    return build()


def simple_words(M, max_letters=8):
    return st.lists(simple_letter(M), max_size=max_letters).map(Word)
