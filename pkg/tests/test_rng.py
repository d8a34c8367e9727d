import numpy as np
from hypothesis import given, strategies as st

from fbsde_pricing.rng import philox4x32, standard_normals, uniforms

WORDS = np.uint32


def _block(counter, key):
    out = philox4x32([np.array([c], WORDS) for c in counter], key)
    return [int(w[0]) for w in out]


def test_philox_known_answers():
    assert _block([0, 0, 0, 0], [0, 0]) == [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]
    ones = 0xFFFFFFFF
    assert _block([ones] * 4, [ones, ones]) == [0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD]
    pi = [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344]
    assert _block(pi, [0xA4093822, 0x299F31D0]) == [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1]


def _reference_uniforms(seed, substream, paths, count):
    key = (seed & 0xFFFFFFFF, seed >> 32)
    paths = np.asarray(paths, dtype=np.uint64)
    blocks = (count + 1) // 2
    idx = np.arange(blocks, dtype=np.uint64)[None, :]
    c = [np.broadcast_to(idx, (paths.size, blocks)),
         (paths & np.uint64(0xFFFFFFFF))[:, None],
         (paths >> np.uint64(32))[:, None],
         np.uint64(substream)]
    w = [x.astype(np.uint64) for x in philox4x32(c, key)]
    pairs = []
    for hi, lo in ((w[0], w[1]), (w[2], w[3])):
        bits = (hi >> np.uint64(5)) * np.uint64(1 << 26) + (lo >> np.uint64(6))
        pairs.append((bits.astype(float) + 0.5) / 2.0**53)
    out = np.stack(pairs, axis=-1).reshape(paths.size, 2 * blocks)
    return out[:, :count]


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**32 - 1),
       st.lists(st.integers(0, 2**40), min_size=1, max_size=5), st.integers(1, 9))
def test_kernel_matches_reference(seed, substream, paths, count):
    fast = uniforms(seed, substream, paths, count)
    assert fast.shape == (len(paths), count)
    assert np.all((fast > 0) & (fast < 1))
    np.testing.assert_array_equal(fast, _reference_uniforms(seed, substream, paths, count))


def test_rows_depend_only_on_path_index():
    a = uniforms(42, 3, np.arange(100), 7)
    b = uniforms(42, 3, [17, 99, 0], 7)
    np.testing.assert_array_equal(a[[17, 99, 0]], b)


def test_streams_and_seeds_differ():
    base = uniforms(1, 0, [0], 8)
    assert not np.array_equal(base, uniforms(2, 0, [0], 8))
    assert not np.array_equal(base, uniforms(1, 1, [0], 8))


def test_normal_moments():
    z = standard_normals(9, 0, np.arange(20000), 10).ravel()
    se = 1 / np.sqrt(z.size)
    assert abs(z.mean()) < 5 * se
    assert abs(z.var() - 1) < 5 * np.sqrt(2) * se
