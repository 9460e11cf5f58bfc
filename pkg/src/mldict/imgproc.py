"""Image ingestion: RGB to gray, Otsu binarization, padding to 16-pixel blocks,
and PBM (P4) reading/writing."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CorruptionError, FormatError, InputError

BLOCK = 16


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        if self.pixels.ndim != 2 or min(self.pixels.shape) < 1:
            raise InputError(f"gray image must be 2-D and non-empty, got {self.pixels.shape}")

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryImage:
    bits: np.ndarray  # (height, width) uint8 in {0, 1}

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or min(bits.shape) < 1:
            raise InputError(f"binary image must be 2-D and non-empty, got {bits.shape}")
        if bits.dtype != np.uint8:
            if bits.dtype != np.bool_ and bits.size and (bits.min() < 0 or bits.max() > 1):
                raise InputError("binary image entries must be 0 or 1")
            bits = bits.astype(np.uint8)
        elif bits.size and bits.max() > 1:
            raise InputError("binary image entries must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))


@dataclass(frozen=True, eq=False)
class PaddedImage:
    image: BinaryImage
    orig_width: int
    orig_height: int

    @property
    def bits(self):
        return self.image.bits


def to_gray(rgb, width, height):
    """BT.601 luma, rounded half up: round(0.299 R + 0.587 G + 0.114 B)."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.size != 3 * width * height:
        raise InputError(f"raster of {rgb.size} values does not match {width}x{height}x3")
    rgb = rgb.reshape(height, width, 3).astype(np.uint32)
    gray = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return GrayImage(np.minimum(gray, 255).astype(np.uint8))


def histogram(img):
    return np.bincount(img.pixels.ravel(), minlength=256)


def otsu_threshold(hist):
    """Threshold t maximizing the between-class variance of {<= t} vs {> t}.

    Ties go to the smallest t. A histogram with a single occupied bin returns
    that intensity, so every pixel maps to 0.
    """
    hist = [int(h) for h in np.asarray(hist).ravel()]
    if len(hist) != 256 or min(hist) < 0:
        raise InputError("histogram must have 256 non-negative bins")
    total = sum(hist)
    if total == 0:
        raise InputError("histogram is empty")
    occupied = [i for i, h in enumerate(hist) if h]
    if len(occupied) == 1:
        return occupied[0]
    weighted = sum(i * h for i, h in enumerate(hist))
    # N^2 * between-class variance = (S0*N1 - S1*N0)^2 / (N0*N1); exact rationals
    best, best_t = None, None
    n0 = s0 = 0
    for t in range(255):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        score = Fraction((s0 * n1 - (weighted - s0) * n0) ** 2, n0 * n1)
        if best is None or score > best:
            best, best_t = score, t
    return best_t


def binarize(img):
    t = otsu_threshold(histogram(img))
    return BinaryImage((img.pixels > t).astype(np.uint8))


def pad_to_16(img):
    h, w = img.bits.shape
    ph = -(-h // BLOCK) * BLOCK
    pw = -(-w // BLOCK) * BLOCK
    if (ph, pw) == (h, w):
        return PaddedImage(img, w, h)
    bits = np.zeros((ph, pw), dtype=np.uint8)
    bits[:h, :w] = img.bits
    return PaddedImage(BinaryImage(bits), w, h)


def crop(p):
    h, w = p.image.bits.shape
    if not (1 <= p.orig_width <= w and 1 <= p.orig_height <= h):
        raise CorruptionError(
            f"original size {p.orig_width}x{p.orig_height} exceeds padded {w}x{h}")
    return BinaryImage(p.image.bits[:p.orig_height, :p.orig_width].copy())


# --- file I/O ---------------------------------------------------------------

def _pbm_tokens(data):
    """Yield (token, end offset) for the ASCII header of a netpbm file."""
    i, n = 0, len(data)
    while i < n:
        c = data[i:i + 1]
        if c == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pbm(data):
    """Parse a binary PBM (P4). PBM stores 1 = black; bits are returned with
    1 = bright so they match :func:`binarize`."""
    tokens = _pbm_tokens(data)
    try:
        magic, _ = next(tokens)
        w, _ = next(tokens)
        h, end = next(tokens)
        width, height = int(w), int(h)
    except (StopIteration, ValueError):
        raise FormatError("malformed PBM header") from None
    if magic != b"P4":
        raise FormatError(f"not a binary PBM (magic {magic!r})")
    if width < 1 or height < 1:
        raise FormatError("PBM dimensions must be positive")
    stride = (width + 7) // 8
    raster = data[end + 1:end + 1 + stride * height]
    if len(raster) != stride * height:
        raise FormatError("PBM raster is truncated")
    packed = np.frombuffer(raster, dtype=np.uint8).reshape(height, stride)
    bits = np.unpackbits(packed, axis=1)[:, :width]
    return BinaryImage(1 - bits)


def write_pbm(img):
    packed = np.packbits(1 - img.bits, axis=1)
    return f"P4\n{img.width} {img.height}\n".encode("ascii") + packed.tobytes()


def load_binary(path):
    """Read an image file and return its binarized form.

    PBM inputs are taken as-is; anything Pillow can decode goes through
    :func:`to_gray` and :func:`binarize`.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == b"P4":
        return read_pbm(data)
    return binarize(load_gray(path))


def load_gray(path):
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "1", "I;16", "I", "F"):
            arr = np.asarray(im.convert("L"))
            return GrayImage(np.ascontiguousarray(arr, dtype=np.uint8))
        rgb = np.asarray(im.convert("RGB"))
    h, w = rgb.shape[:2]
    return to_gray(rgb, w, h)


def save_pbm(img, path):
    with open(path, "wb") as f:
        f.write(write_pbm(img))
