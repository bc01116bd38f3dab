"""Counter-based random streams.

Every Monte Carlo routine splits its paths into fixed-size blocks and draws
block ``b`` from a Philox generator keyed by ``(seed, b)``. Results therefore
depend only on the seed and path count, never on how blocks are scheduled.
"""
import numpy as np

BLOCK = 8192
_MASK64 = (1 << 64) - 1


def substream(seed, index):
    """Independent Philox stream for ``(seed, index)``."""
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def blocks(seed, n_paths, block=BLOCK):
    """Yield ``(start, count, generator)`` covering ``n_paths`` paths."""
    for b, start in enumerate(range(0, n_paths, block)):
        yield start, min(block, n_paths - start), substream(seed, b)
