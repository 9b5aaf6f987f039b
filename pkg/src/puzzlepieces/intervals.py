"""Small helpers for finite unions of closed intervals."""

from typing import Iterable, List, Tuple

Interval = Tuple[float, float]


def merge_intervals(intervals: Iterable[Interval]) -> List[Interval]:
    """Sorted, pairwise disjoint union of the given intervals."""
    items = sorted((min(lo, hi), max(lo, hi)) for lo, hi in intervals)
    out: List[Interval] = []
    for lo, hi in items:
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def total_length(intervals: Iterable[Interval]) -> float:
    return sum(hi - lo for lo, hi in merge_intervals(intervals))


def complement_in(hull: Interval, intervals: Iterable[Interval]) -> List[Interval]:
    """Open gaps of ``hull`` left uncovered by ``intervals`` (as closed pairs)."""
    lo, hi = hull
    gaps: List[Interval] = []
    cur = lo
    for a, b in merge_intervals(intervals):
        a, b = max(a, lo), min(b, hi)
        if b <= a:
            continue
        if a > cur:
            gaps.append((cur, a))
        cur = max(cur, b)
    if cur < hi:
        gaps.append((cur, hi))
    return gaps
