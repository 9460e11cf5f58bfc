"""Hex-string keys for n x n binary blocks.

A 2x2 block ``[[b1, b2], [b3, b4]]`` is the single hex digit ``b1b2b3b4``
(b1 most significant). A larger block is the concatenation of the keys of its
four quadrants in the order top-left, top-right, bottom-left, bottom-right,
applied recursively. The digit string of a level-n key is therefore the
2x2 nibbles of the block listed in Morton (Z) order, and the key of any
quadrant is a contiguous quarter of its parent's digits.

Keys are plain uppercase ``str``; the level is implied by the length
(1, 4, 16 or 64 digits for n = 2, 4, 8, 16).
"""

from functools import lru_cache

import numpy as np

from .errors import FormatError, InputError

LEVELS = (2, 4, 8, 16)
KEY_LENGTH = {n: n * n // 4 for n in LEVELS}
LEVEL_OF_LENGTH = {v: k for k, v in KEY_LENGTH.items()}

_HEX = np.frombuffer(b"0123456789ABCDEF", dtype=np.uint8)
_NIBBLE = np.full(256, 255, dtype=np.uint8)
_NIBBLE[_HEX] = np.arange(16, dtype=np.uint8)


@lru_cache(maxsize=None)
def morton_order(m):
    """Flat (row * m + col) indices of an m x m grid listed in Z order."""
    idx = np.arange(m * m)
    row = np.zeros_like(idx)
    col = np.zeros_like(idx)
    for b in range(max(m.bit_length() - 1, 0)):
        col |= ((idx >> (2 * b)) & 1) << b
        row |= ((idx >> (2 * b + 1)) & 1) << b
    return row * m + col


@lru_cache(maxsize=None)
def _inverse_morton(m):
    return np.argsort(morton_order(m))


@lru_cache(maxsize=None)
def _bit_order(n):
    """Flat bit indices of an n x n block in key order: 4 bits per digit, MSB first."""
    m = n // 2
    cell = morton_order(m)
    r, c = 2 * (cell // m), 2 * (cell % m)
    rows = np.stack([r, r, r + 1, r + 1], axis=1)
    cols = np.stack([c, c + 1, c, c + 1], axis=1)
    return (rows * n + cols).ravel()


_WEIGHTS = np.array([8, 4, 2, 1], dtype=np.uint8)
_SHIFTS = np.array([3, 2, 1, 0], dtype=np.uint8)


def check_level(n):
    if n not in KEY_LENGTH:
        raise InputError(f"level must be one of {LEVELS}, got {n}")
    return n


def key_level(key):
    try:
        return LEVEL_OF_LENGTH[len(key)]
    except KeyError:
        raise FormatError(f"key {key!r} has invalid length {len(key)}") from None


def _as_bits(arr):
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D bit matrix, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise InputError("bit matrix entries must be 0 or 1")
    return arr.astype(np.uint8, copy=False)


def nibble_grid(bits):
    """Collapse each 2x2 cell of an even-sized bit matrix into its hex value."""
    b = bits
    return (b[0::2, 0::2] << 3) | (b[0::2, 1::2] << 2) | (b[1::2, 0::2] << 1) | b[1::2, 1::2]


def tile_digits(bits, n):
    """Digits of every n x n tile as a (blocks, n*n/4) uint8 array, raster block order."""
    h, w = bits.shape
    if h % n or w % n:
        raise InputError(f"image {w}x{h} is not divisible into {n}x{n} blocks")
    m = n // 2
    grid = nibble_grid(bits)
    g = grid.reshape(h // n, m, w // n, m).transpose(0, 2, 1, 3).reshape(-1, m * m)
    return g[:, morton_order(m)]


def _digits_to_keys(digits):
    if digits.size == 0:
        return []
    length = digits.shape[1]
    text = _HEX[digits].tobytes().decode("ascii")
    return [text[i:i + length] for i in range(0, len(text), length)]


def tile_keys(img, n):
    """Keys of the non-overlapping n x n tiles of ``img``.

    Blocks are listed row by row from the top, left to right within a row.
    ``img`` may be a PaddedImage, a BinaryImage or a bare 2-D bit array.
    """
    check_level(n)
    bits = getattr(img, "image", img)
    bits = _as_bits(getattr(bits, "bits", bits))
    return _digits_to_keys(tile_digits(bits, n))


def block_to_key(block):
    bits = _as_bits(block)
    n = bits.shape[0]
    if bits.shape != (n, n) or n not in KEY_LENGTH:
        raise InputError(f"block must be n x n with n in {LEVELS}, got {bits.shape}")
    digits = bits.ravel()[_bit_order(n)].reshape(-1, 4) @ _WEIGHTS
    return _HEX[digits].tobytes().decode("ascii")


def keys_to_digits(keys, n):
    """Parse equal-level keys into a (len(keys), n*n/4) nibble array."""
    length = KEY_LENGTH[n]
    try:
        raw = "".join(keys).encode("ascii")
    except UnicodeEncodeError:
        raise FormatError("keys contain non-ASCII characters") from None
    if len(raw) != length * len(keys):
        raise FormatError(f"keys are not all of level {n}")
    digits = _NIBBLE[np.frombuffer(raw, dtype=np.uint8)]
    if digits.size and digits.max() == 255:
        raise FormatError("keys contain characters outside 0-9A-F")
    return digits.reshape(len(keys), length)


def keys_to_bits(keys, n, width, height):
    """Inverse of :func:`tile_keys`: assemble a ``height x width`` bit array."""
    bw, bh = width // n, height // n
    if bw * n != width or bh * n != height or bw * bh != len(keys):
        raise InputError(f"{len(keys)} level-{n} keys cannot tile {width}x{height}")
    m = n // 2
    digits = keys_to_digits(keys, n)[:, _inverse_morton(m)]
    grid = digits.reshape(bh, bw, m, m).transpose(0, 2, 1, 3).reshape(bh * m, bw * m)
    bits = np.empty((height, width), dtype=np.uint8)
    bits[0::2, 0::2] = (grid >> 3) & 1
    bits[0::2, 1::2] = (grid >> 2) & 1
    bits[1::2, 0::2] = (grid >> 1) & 1
    bits[1::2, 1::2] = grid & 1
    return bits


def key_to_block(key, n=None):
    level = key_level(key)
    if n is not None and n != level:
        raise FormatError(f"key {key!r} is level {level}, expected {n}")
    digits = keys_to_digits([key], level)[0]
    bits = np.empty(level * level, dtype=np.uint8)
    bits[_bit_order(level)] = ((digits[:, None] >> _SHIFTS) & 1).ravel()
    return bits.reshape(level, level)


def split_key(key):
    """The four quadrant keys (TL, TR, BL, BR) of a level > 2 key."""
    n = key_level(key)
    if n == 2:
        raise ValueError("a level-2 key has no quadrants")
    q = len(key) // 4
    return [key[0:q], key[q:2 * q], key[2 * q:3 * q], key[3 * q:]]


def all_zero_key(n):
    return "0" * KEY_LENGTH[n]


def all_one_key(n):
    return "F" * KEY_LENGTH[n]


def format_key(key):
    """Text form used in dictionary dumps and ``inspect`` output, e.g. ``L4:F000``."""
    return f"L{key_level(key)}:{key}"


def parse_key(text):
    level, sep, digits = text.partition(":")
    if not sep or not level.startswith("L") or not level[1:].isdigit():
        raise FormatError(f"malformed key text {text!r}")
    n = int(level[1:])
    digits = digits.upper()
    if key_level(digits) != n:
        raise FormatError(f"key text {text!r} has the wrong digit count")
    keys_to_digits([digits], n)
    return digits
