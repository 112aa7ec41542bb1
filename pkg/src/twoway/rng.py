"""Seeded random streams.

Every random quantity in the package is drawn from a stream identified by a
64-bit seed and a tuple of non-negative integer keys. Streams are built from
``numpy.random.SeedSequence(seed, spawn_key=key)``, so two different keys
give statistically independent generators and the same (seed, key) always
gives the same bits, whatever process or thread draws them.

Key layout used across the package:

* ``(r,)`` for Monte Carlo replication ``r`` of a cell seeded with ``seed``.
* Cell seeds inside a grid come from :func:`cell_seed`, which mixes the
  master seed with the cell's coordinates (not its position), so adding or
  reordering cells leaves existing cells untouched.
"""

from __future__ import annotations

import struct

import numpy as np

SEED_MAX = 2**64 - 1
_CELL_TAG = 0xCE11


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of ``seed``."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def _float_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x) + 0.0))[0]


def cell_seed(master_seed: int, delta: float, n_factors: int, phi: float) -> int:
    """Derive the seed of grid cell (delta, J, phi) from the master seed.

    The float coordinates enter through their IEEE-754 bit patterns
    (``-0.0`` is folded onto ``0.0``).
    """
    key = (_CELL_TAG, _float_bits(delta), int(n_factors), _float_bits(phi))
    seq = np.random.SeedSequence(check_seed(master_seed), spawn_key=key)
    lo, hi = seq.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)
