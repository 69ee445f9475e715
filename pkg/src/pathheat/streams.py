"""Counter-based random streams.

Every Monte-Carlo sample in this package draws from its own Philox stream,
keyed by the master seed with the sample index placed in the upper half of
the 256-bit counter.  Streams are therefore a pure function of
``(master_seed, index)``: an ensemble partitioned across workers by sample
index reproduces the single-threaded result bit for bit, whatever the
partition.
"""

from __future__ import annotations

import numpy as np

__all__ = ["sample_stream", "substream"]

# Each stream owns a disjoint 2^128 counter block.
_BLOCK_SHIFT = 128


def sample_stream(master_seed: int, index: int) -> np.random.Generator:
    """Return the generator for sample ``index`` under ``master_seed``."""
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    bg = np.random.Philox(key=int(master_seed) & ((1 << 128) - 1),
                          counter=index << _BLOCK_SHIFT)
    return np.random.Generator(bg)


def substream(master_seed: int, kind: int, index: int) -> np.random.Generator:
    """A stream family disjoint from :func:`sample_stream` (e.g. inner loops).

    ``kind`` selects the family; index blocks within a family do not overlap
    sample-stream blocks because the kind tag lands in counter bits above
    any realistic sample count.
    """
    if kind <= 0:
        raise ValueError("kind must be positive (0 is the plain sample family)")
    return sample_stream(master_seed, (kind << 56) + index)
