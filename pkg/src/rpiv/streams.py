"""Deterministic random streams.

All randomness flows through Philox, a counter-based 64-bit generator.  The
128-bit Philox key is split into (seed, stream): the seed identifies the
run, the stream identifies the consumer.  Separate consumers therefore
never share or shift each other's streams, which is what makes replication
results independent of evaluation order and thread count.

``derive_seed`` folds structured integers (master seed, replication index,
purpose tag, ...) into a single child seed with splitmix64 mixing.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 finalizer: bijective avalanche on 64-bit words."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(*parts: int) -> int:
    """Fold integer parts into a nonnegative 63-bit child seed.

    Order-sensitive: ``derive_seed(a, b) != derive_seed(b, a)`` in general.
    """
    acc = _GOLDEN
    for part in parts:
        acc = _mix64(acc + _GOLDEN + (int(part) & _MASK64))
    return acc >> 1


def generator(seed: int, stream: int) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    key = np.empty(2, dtype=np.uint64)
    key[0] = np.uint64(int(seed) & _MASK64)
    key[1] = np.uint64(int(stream) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))
