"""Counter-based normal variates (Philox4x32-10).

Every draw is a pure function of ``(seed, substream, path, index)``, so a
path's increments do not depend on how many paths are simulated alongside it,
on chunking, or on thread count.

Counter layout per 128-bit block: ``(index, path_lo, path_hi, substream)``;
the 64-bit seed is the key. Each block yields two 53-bit uniforms.
"""

from __future__ import annotations

import numba
import numpy as np
from scipy.special import ndtri

ROUNDS = 10

_M0 = 0xD2511F53
_M1 = 0xCD9E8D57
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = 0xFFFFFFFF

# well-known substreams; training batches use their own iteration index
VALIDATION_STREAM = 0xFFFFFFFF
PILOT_STREAM = 0xFFFFFFFE
BENCHMARK_STREAM = 0xFFFFFFFD


def philox4x32(counter, key, rounds=ROUNDS):
    """Philox4x32 block function in plain numpy (reference implementation).

    ``counter`` is four broadcastable uint32 word arrays, ``key`` a pair of
    uint32 words. Returns four uint32 arrays.
    """
    lo = np.uint64(_MASK)
    s32 = np.uint64(32)
    c0, c1, c2, c3 = np.broadcast_arrays(
        *(np.asarray(c, dtype=np.uint64) & lo for c in counter)
    )
    k0 = np.uint64(key[0]) & lo
    k1 = np.uint64(key[1]) & lo
    for _ in range(rounds):
        p0 = c0 * np.uint64(_M0)
        p1 = c2 * np.uint64(_M1)
        c0, c1, c2, c3 = (p1 >> s32) ^ c1 ^ k0, p1 & lo, (p0 >> s32) ^ c3 ^ k1, p0 & lo
        k0 = (k0 + np.uint64(_W0)) & lo
        k1 = (k1 + np.uint64(_W1)) & lo
    return tuple(c.astype(np.uint32) for c in (c0, c1, c2, c3))


@numba.njit(cache=True, nogil=True)
def _fill_uniforms(out, paths, substream, key0, key1):
    lo = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    m0 = np.uint64(0xD2511F53)
    m1 = np.uint64(0xCD9E8D57)
    w0 = np.uint64(0x9E3779B9)
    w1 = np.uint64(0xBB67AE85)
    sub = np.uint64(substream) & lo
    count = out.shape[1]
    for j in range(out.shape[0]):
        p = paths[j]
        p_lo = p & lo
        p_hi = p >> s32
        for b in range((count + 1) // 2):
            c0 = np.uint64(b)
            c1 = p_lo
            c2 = p_hi
            c3 = sub
            k0 = np.uint64(key0)
            k1 = np.uint64(key1)
            for _ in range(10):
                q0 = c0 * m0
                q1 = c2 * m1
                c0 = (q1 >> s32) ^ c1 ^ k0
                c1 = q1 & lo
                c2 = (q0 >> s32) ^ c3 ^ k1
                c3 = q0 & lo
                k0 = (k0 + w0) & lo
                k1 = (k1 + w1) & lo
            out[j, 2 * b] = (
                (c0 >> np.uint64(5)) * 67108864.0 + (c1 >> np.uint64(6)) + 0.5
            ) / 9007199254740992.0
            if 2 * b + 1 < count:
                out[j, 2 * b + 1] = (
                    (c2 >> np.uint64(5)) * 67108864.0 + (c3 >> np.uint64(6)) + 0.5
                ) / 9007199254740992.0


def _split_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed & _MASK, seed >> 32


def uniforms(seed, substream, paths, count):
    """Uniforms strictly inside (0, 1), shape ``(len(paths), count)``.

    Row ``j`` depends only on ``(seed, substream, paths[j])``.
    """
    key0, key1 = _split_seed(seed)
    paths = np.ascontiguousarray(paths, dtype=np.uint64).reshape(-1)
    out = np.empty((paths.size, int(count)))
    _fill_uniforms(out, paths, int(substream), key0, key1)
    return out


def standard_normals(seed, substream, paths, count):
    """Standard normals by inverse-CDF transform of :func:`uniforms`."""
    u = uniforms(seed, substream, paths, count)
    return ndtri(u, out=u)
