"""Counter-based random streams keyed by (seed, stream, block).

Work is split into fixed-size blocks of independent units (realizations or
trajectories).  Each block owns a Philox generator derived from the key, so
results do not depend on how blocks are scheduled across threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 256

STREAM_MODES = 1
STREAM_SDE = 2
STREAM_INIT = 3
STREAM_POINTS = 4
STREAM_BRIDGE = 5


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def blocks(n: int, block_size: int = BLOCK):
    """Yield (block index, start, stop) covering ``range(n)``."""
    for b, start in enumerate(range(0, n, block_size)):
        yield b, start, min(start + block_size, n)


def map_blocks(func, n: int, threads: int = 1, block_size: int = BLOCK) -> list:
    """Apply ``func(block, start, stop)`` to every block; results in block order."""
    spans = list(blocks(n, block_size))
    if threads <= 1 or len(spans) <= 1:
        return [func(*s) for s in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: func(*s), spans))
