import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mldict.errors import CorruptionError, FormatError, InputError
from mldict.imgproc import (
    BinaryImage, GrayImage, PaddedImage, binarize, crop, histogram, otsu_threshold,
    pad_to_16, read_pbm, to_gray, write_pbm,
)


def brute_force_otsu(hist):
    """Float scan of the between-class variance; smallest argmax within 1e-9 relative."""
    hist = np.asarray(hist, dtype=np.float64)
    occupied = np.flatnonzero(hist)
    if len(occupied) == 1:
        return int(occupied[0])
    p = hist / hist.sum()
    i = np.arange(256)
    scores = np.full(256, -1.0)
    for t in range(255):
        w0, w1 = p[:t + 1].sum(), p[t + 1:].sum()
        if w0 == 0 or w1 == 0:
            continue
        mu0 = (i[:t + 1] * p[:t + 1]).sum() / w0
        mu1 = (i[t + 1:] * p[t + 1:]).sum() / w1
        scores[t] = w0 * w1 * (mu0 - mu1) ** 2
    best = scores.max()
    return int(np.flatnonzero(scores >= best * (1 - 1e-9))[0])


def test_gray_examples():
    rgb = np.array([255, 255, 255, 0, 0, 0, 255, 0, 0], np.uint8)
    assert to_gray(rgb, 3, 1).pixels.tolist() == [[255, 0, 76]]


def test_gray_dimension_mismatch():
    with pytest.raises(InputError):
        to_gray(np.zeros(8, np.uint8), 3, 1)


def test_otsu_single_class():
    hist = np.zeros(256, int)
    hist[100] = 50
    assert otsu_threshold(hist) == 100


def test_otsu_bimodal_tie_break():
    hist = np.zeros(256, int)
    hist[0] = hist[255] = 10
    assert otsu_threshold(hist) == 0


def test_otsu_empty():
    with pytest.raises(InputError):
        otsu_threshold(np.zeros(256, int))


def test_otsu_gaussian_mixture():
    rng = np.random.default_rng(7)
    samples = np.concatenate([rng.normal(60, 10, 20000), rng.normal(190, 10, 20000)])
    hist = np.bincount(np.clip(np.rint(samples), 0, 255).astype(int), minlength=256)
    t = otsu_threshold(hist)
    assert 100 <= t <= 150
    assert t == brute_force_otsu(hist)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=256, max_size=256).filter(lambda h: sum(h) > 0))
def test_otsu_matches_brute_force(hist):
    assert otsu_threshold(hist) == brute_force_otsu(hist)


def test_binarize_uniform():
    out = binarize(GrayImage(np.full((5, 7), 7, np.uint8)))
    assert not out.bits.any()


def test_binarize_checkerboard():
    cb = (np.indices((8, 8)).sum(0) % 2).astype(np.uint8)
    assert np.array_equal(binarize(GrayImage(cb * 255)).bits, cb)


def test_binarize_gradient():
    g = GrayImage(np.tile(np.arange(256, dtype=np.uint8), (4, 1)))
    t = brute_force_otsu(histogram(g))
    out = binarize(g)
    assert np.array_equal(out.bits[0], (np.arange(256) > t).astype(np.uint8))
    assert out.bits[0, :t + 1].sum() == 0 and out.bits[0, t + 1:].all()


def test_binarize_threshold_depends_on_multiset_only(rng):
    px = rng.integers(0, 256, (12, 12)).astype(np.uint8)
    shuffled = rng.permutation(px.ravel()).reshape(12, 12)
    t = otsu_threshold(histogram(GrayImage(px)))
    assert t == otsu_threshold(histogram(GrayImage(shuffled)))
    assert np.array_equal(binarize(GrayImage(shuffled)).bits, (shuffled > t).astype(np.uint8))


def test_pad_examples():
    x = BinaryImage(np.ones((32, 32), np.uint8))
    p = pad_to_16(x)
    assert p.image == x and (p.orig_width, p.orig_height) == (32, 32)

    p = pad_to_16(BinaryImage(np.ones((16, 17), np.uint8)))
    assert p.image.width == 32 and p.image.height == 16
    assert not p.bits[:, 17:].any()

    p = pad_to_16(BinaryImage(np.ones((70, 100), np.uint8)))
    assert (p.image.width, p.image.height) == (112, 80)
    assert crop(p).bits.shape == (70, 100)


def test_pad_crop_exhaustive_small_sizes(rng):
    for h in range(1, 20):
        for w in range(1, 20):
            x = BinaryImage(rng.integers(0, 2, (h, w)).astype(np.uint8))
            p = pad_to_16(x)
            assert p.image.width % 16 == 0 and p.image.height % 16 == 0
            assert p.bits[h:].sum() == 0 and p.bits[:, w:].sum() == 0
            assert crop(p) == x


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_pad_crop_round_trip(h, w, seed):
    x = BinaryImage(np.random.default_rng(seed).integers(0, 2, (h, w)).astype(np.uint8))
    assert crop(pad_to_16(x)) == x


def test_crop_rejects_bad_dims():
    with pytest.raises(CorruptionError):
        crop(PaddedImage(BinaryImage(np.zeros((16, 16), np.uint8)), 17, 16))


def test_binary_image_validation():
    with pytest.raises(InputError):
        BinaryImage(np.array([[0, 2]]))
    with pytest.raises(InputError):
        BinaryImage(np.zeros((0, 3)))


def test_pbm_round_trip(rng):
    for h, w in [(1, 1), (3, 9), (17, 8), (40, 33)]:
        x = BinaryImage(rng.integers(0, 2, (h, w)).astype(np.uint8))
        assert read_pbm(write_pbm(x)) == x


def test_pbm_comment_and_errors():
    x = read_pbm(b"P4\n# made by hand\n8 1\n\x0f")
    assert x.bits.tolist() == [[1, 1, 1, 1, 0, 0, 0, 0]]
    with pytest.raises(FormatError):
        read_pbm(b"P1\n1 1\n0")
    with pytest.raises(FormatError):
        read_pbm(b"P4\n8 2\n\x00")


def test_pbm_pillow_agrees(tmp_path, rng):
    from PIL import Image

    x = BinaryImage(rng.integers(0, 2, (11, 21)).astype(np.uint8))
    path = tmp_path / "x.pbm"
    path.write_bytes(write_pbm(x))
    with Image.open(path) as im:
        # Pillow mode "1": 255 = white, which is our bit 1
        assert np.array_equal((np.asarray(im.convert("L")) > 0).astype(np.uint8), x.bits)
