"""Build the small natural-photo sample corpus shipped under data/sample_corpus.

Crops are taken at seeded random positions from the photographs bundled with
scikit-image and scikit-learn, so the corpus can be regenerated bit-exactly:

    python scripts/make_sample_corpus.py --out data/sample_corpus
"""

import argparse
import os

import numpy as np
from PIL import Image

SKIMAGE_PHOTOS = [
    "astronaut.png", "camera.png", "chelsea.png", "coffee.png", "coins.png",
    "rocket.jpg", "motorcycle_left.png", "moon.png", "ihc.png",
    "hubble_deep_field.jpg", "clock_motion.png",
]
SKLEARN_PHOTOS = ["china.jpg", "flower.jpg"]


def _sources():
    import skimage
    import sklearn

    sk_dir = os.path.join(os.path.dirname(skimage.__file__), "data")
    for name in SKIMAGE_PHOTOS:
        yield name, os.path.join(sk_dir, name)
    sl_dir = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "images")
    for name in SKLEARN_PHOTOS:
        yield name, os.path.join(sl_dir, name)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/sample_corpus")
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    photos = []
    for name, path in _sources():
        img = Image.open(path).convert("RGB")
        if min(img.size) < args.size:
            continue
        photos.append((os.path.splitext(name)[0], np.asarray(img)))

    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        stem, arr = photos[i % len(photos)]
        h, w = arr.shape[:2]
        y = int(rng.integers(0, h - args.size + 1))
        x = int(rng.integers(0, w - args.size + 1))
        crop = arr[y:y + args.size, x:x + args.size]
        Image.fromarray(crop).save(
            os.path.join(args.out, f"{i:02d}_{stem}.png"), optimize=True)
    print(f"wrote {args.count} crops from {len(photos)} photos to {args.out}")


if __name__ == "__main__":
    main()
