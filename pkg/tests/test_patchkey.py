import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mldict.errors import FormatError, InputError
from mldict.imgproc import BinaryImage, pad_to_16
from mldict.patchkey import (
    block_to_key, format_key, key_to_block, keys_to_bits, parse_key, split_key, tile_keys,
)


def naive_key(block):
    """Recursive definition straight from the quadrant order, no vectorization."""
    n = len(block)
    if n == 2:
        b1, b2, b3, b4 = block[0][0], block[0][1], block[1][0], block[1][1]
        return "0123456789ABCDEF"[8 * b1 + 4 * b2 + 2 * b3 + b4]
    h = n // 2
    quads = [[row[:h] for row in block[:h]], [row[h:] for row in block[:h]],
             [row[:h] for row in block[h:]], [row[h:] for row in block[h:]]]
    return "".join(naive_key(q) for q in quads)


def test_all_ones():
    assert block_to_key([[1, 1], [1, 1]]) == "F"


def test_anti_diagonal_is_six():
    assert block_to_key([[0, 1], [1, 0]]) == "6"


def test_top_left_quadrant():
    b = np.zeros((4, 4), np.uint8)
    b[:2, :2] = 1
    assert block_to_key(b) == "F000"


def test_key_to_block_small():
    assert key_to_block("0").tolist() == [[0, 0], [0, 0]]
    assert key_to_block("9").tolist() == [[1, 0], [0, 1]]


def test_level2_exhaustive():
    for bits in itertools.product([0, 1], repeat=4):
        block = [list(bits[:2]), list(bits[2:])]
        key = block_to_key(block)
        assert key == naive_key(block)
        assert key_to_block(key).tolist() == block


def test_level4_exhaustive_bijection():
    vals = np.arange(1 << 16, dtype=np.uint32)
    blocks = ((vals[:, None] >> np.arange(15, -1, -1)) & 1).astype(np.uint8).reshape(-1, 4, 4)
    # lay the blocks out as one tall image and tile it
    keys = tile_keys(blocks.reshape(-1, 4), 4)
    assert len(set(keys)) == 1 << 16
    back = keys_to_bits(keys, 4, 4, 4 * len(keys)).reshape(-1, 4, 4)
    assert np.array_equal(back, blocks)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([8, 16]), st.integers(0, 2**32 - 1))
def test_random_levels_match_naive(n, seed):
    block = np.random.default_rng(seed).integers(0, 2, (n, n)).astype(np.uint8)
    key = block_to_key(block)
    assert key == naive_key(block.tolist())
    assert np.array_equal(key_to_block(key), block)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([4, 8, 16]), st.integers(0, 2**32 - 1))
def test_split_matches_quadrants(n, seed):
    block = np.random.default_rng(seed).integers(0, 2, (n, n)).astype(np.uint8)
    h = n // 2
    direct = [block_to_key(block[:h, :h]), block_to_key(block[:h, h:]),
              block_to_key(block[h:, :h]), block_to_key(block[h:, h:])]
    parts = split_key(block_to_key(block))
    assert parts == direct
    assert "".join(parts) == block_to_key(block)


def test_split_simple():
    assert split_key("F000") == ["F", "0", "0", "0"]
    with pytest.raises(ValueError):
        split_key("F")


def test_tile_keys_blank():
    img = pad_to_16(BinaryImage(np.zeros((32, 32), np.uint8)))
    assert tile_keys(img, 16) == ["0" * 64] * 4
    assert len(tile_keys(np.zeros((16, 16), np.uint8), 16)) == 1


def test_tile_order_and_round_trip(rng):
    bits = rng.integers(0, 2, (32, 48)).astype(np.uint8)
    keys = tile_keys(bits, 8)
    assert len(keys) == 4 * 6
    # raster block order: second key is the block right of the first
    assert keys[1] == block_to_key(bits[0:8, 8:16])
    assert keys[6] == block_to_key(bits[8:16, 0:8])
    for n in (2, 4, 8, 16):
        assert np.array_equal(keys_to_bits(tile_keys(bits, n), n, 48, 32), bits)


def test_errors():
    with pytest.raises(InputError):
        tile_keys(np.zeros((10, 16), np.uint8), 4)
    with pytest.raises(InputError):
        block_to_key(np.zeros((3, 3)))
    with pytest.raises(InputError):
        block_to_key([[0, 2], [1, 1]])
    with pytest.raises(FormatError):
        key_to_block("G")
    with pytest.raises(FormatError):
        key_to_block("ABC")
    with pytest.raises(FormatError):
        key_to_block("F", 4)


def test_text_form():
    assert format_key("F000") == "L4:F000"
    assert parse_key("L4:f000") == "F000"
    for bad in ("F000", "L8:F000", "L4:G000", "X4:F000"):
        with pytest.raises(FormatError):
            parse_key(bad)


def test_keys_sort_lexicographically():
    keys = tile_keys(np.random.default_rng(1).integers(0, 2, (16, 64)).astype(np.uint8), 4)
    assert sorted(keys) == sorted(keys, key=lambda k: int(k, 16))
