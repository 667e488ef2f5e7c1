"""
Fixed-size chunk fan-out over worker threads with a deterministic reduction.

Chunk boundaries depend only on the number of points and the chunk size, never on the
number of workers, and partial results are combined by a fixed pairwise tree. Results are
therefore bit-identical for any worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def chunk_slices(n: int, chunk_size: int) -> List[slice]:
    if n <= 0:
        return []
    return [slice(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]


def map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Apply fn to every item; results come back in item order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def tree_sum(values: Sequence):
    """Pairwise sum in a fixed tree shape: ((v0+v1)+(v2+v3))+..."""
    level = list(values)
    if not level:
        raise ValueError("tree_sum needs at least one value")
    while len(level) > 1:
        paired = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]
