"""Counter-based Philox4x64-10 usable inside numba kernels.

Each draw is a pure function of ``(key, counter)``, so every bond of every
replica owns an independent, replayable stream: the key holds
``(seed, replica)`` and the counter holds ``(bond, draw index)``.  The
output matches :class:`numpy.random.Philox` for the same key and counter.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    a0, a1 = a & _MASK32, a >> _S32
    b0, b1 = b & _MASK32, b >> _S32
    p0, p1, p2, p3 = a0 * b0, a0 * b1, a1 * b0, a1 * b1
    mid = (p0 >> _S32) + (p1 & _MASK32) + (p2 & _MASK32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, lo


@njit(cache=True)
def philox4x64(k0, k1, c0, c1, c2, c3):
    """Ten rounds of Philox4x64; all arguments and results are ``uint64``."""
    for r in range(10):
        if r:
            k0 += _W0
            k1 += _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def to_unit(x):
    """Uniform on ``[0, 1)`` from the top 53 bits."""
    return (x >> _S11) * _INV53


@njit(cache=True)
def block(k0, k1, stream, index):
    """Four uniforms in ``[0, 1)`` for ``(stream, index)`` under key ``(k0, k1)``."""
    o0, o1, o2, o3 = philox4x64(k0, k1, np.uint64(stream), np.uint64(index), np.uint64(0), np.uint64(0))
    return to_unit(o0), to_unit(o1), to_unit(o2), to_unit(o3)


def replica_key(seed: int, replica: int) -> tuple[np.uint64, np.uint64]:
    return np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(replica & 0xFFFFFFFFFFFFFFFF)


def reference_block(k0: int, k1: int, c0: int, c1: int, c2: int = 0, c3: int = 0) -> np.ndarray:
    """The same block computed by numpy's Philox, for cross-checking."""
    # numpy increments the counter before producing a block
    value = (c0 | c1 << 64 | c2 << 128 | c3 << 192) - 1
    value %= 1 << 256
    counter = np.array([(value >> (64 * i)) & 0xFFFFFFFFFFFFFFFF for i in range(4)], dtype=np.uint64)
    bg = np.random.Philox(key=np.array([k0, k1], dtype=np.uint64), counter=counter)
    return bg.random_raw(4)
