"""
Seeded mini-batch iteration.
"""

from typing import Iterator, List, Sequence, TypeVar

from errors import ParameterError
from numerics.rng import RngState

T = TypeVar("T")

DEFAULT_BATCH_SIZE = 32


def batch_iterator(
    items: Sequence[T],
    batch_size: int = DEFAULT_BATCH_SIZE,
    rng: RngState = None,
    shuffle: bool = True,
) -> Iterator[List[T]]:
    """
    Yield batches covering every item exactly once.

    The final partial batch is emitted. Shuffling draws one permutation from
    ``rng``, so the same seed reproduces the same batch order.
    """
    if batch_size < 1:
        raise ParameterError(f"batch size must be >= 1, got {batch_size}")
    n = len(items)
    if n == 0:
        return
    if shuffle:
        if rng is None:
            raise ParameterError("shuffled batching requires an RngState")
        order = rng.permutation(n)
    else:
        order = range(n)
    order = list(order)
    for start in range(0, n, batch_size):
        yield [items[i] for i in order[start:start + batch_size]]
