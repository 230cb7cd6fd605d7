"""Counter-based random streams (splitmix64-style).

Every trajectory gets its own key derived from (seed, trajectory index), and
every 64-bit word in a trajectory's stream is a pure function of (key, word
index).  Parallel and serial execution therefore enumerate identical
randomness, which is what makes ensemble runs reproducible regardless of the
worker count.  The numba kernels re-implement the same three functions
scalar-wise; tests pin the two implementations against each other.

Word k of stream t is interpreted as 64 fair bits, most significant first:
bit j (0-based) of the trajectory's binary expansion is bit 63 - (j % 64) of
word j // 64.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = (1 << 64) - 1


def mix64(z):
    """splitmix64 finalizer on uint64 scalars or arrays (wraparound intended)."""
    z = np.uint64(z) if np.isscalar(z) else np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def stream_key(seed, t):
    """Key for trajectory t under the given master seed."""
    seed = np.uint64(int(seed) & _U64)
    t = np.asarray(t, dtype=np.uint64) if not np.isscalar(t) else np.uint64(t)
    with np.errstate(over="ignore"):
        return mix64(mix64(seed) + (t + np.uint64(1)) * GOLDEN)


def words(key, k0, count):
    """Words k0 .. k0+count-1 of the stream with the given key (vectorized)."""
    k = np.arange(k0, k0 + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) + (k + np.uint64(1)) * GOLDEN)


def word(key, k):
    """Single word k of the stream with the given key."""
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) + (np.uint64(k) + np.uint64(1)) * GOLDEN)


def bit_stream(seed, t, nbits):
    """First nbits fair bits of trajectory t as a uint8 array (MSB-first)."""
    nwords = (nbits + 63) // 64
    w = words(stream_key(seed, t), 0, nwords)
    shifts = np.uint64(63) - np.arange(64, dtype=np.uint64)
    bits = (w[:, None] >> shifts[None, :]) & np.uint64(1)
    return bits.reshape(-1)[:nbits].astype(np.uint8)


def uniforms(seed, t, count):
    """count uniforms in [0,1) for trajectory t (53-bit mantissa)."""
    w = words(stream_key(seed, t), 0, count)
    return (w >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
