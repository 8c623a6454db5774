"""Fixed-chunk thread pool helper.

Work is always cut into the same chunks whatever the worker count, and results
come back in chunk order, so serial and parallel runs are bitwise identical.
numpy releases the GIL inside its kernels, which is what makes threads useful here.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads=None):
    """Return the worker count to use; ``None`` means all available cores."""
    if threads is None:
        return os.cpu_count() or 1
    return max(1, int(threads))


def chunk_slices(total, chunk_size):
    """Split ``range(total)`` into consecutive slices of at most ``chunk_size``."""
    chunk_size = max(1, int(chunk_size))
    return [slice(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def map_chunks(fn, total, chunk_size, threads=None):
    """Apply ``fn`` to every chunk slice of ``range(total)`` and return results in order.

    Args:
        fn: Callable taking a ``slice``.
        total: Number of items.
        chunk_size: Items per chunk. Independent of ``threads``.
        threads: Worker count, ``None`` for all cores.

    Returns:
        List with one result per chunk.
    """
    slices = chunk_slices(total, chunk_size)
    workers = min(resolve_threads(threads), max(1, len(slices)))
    if workers == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))
