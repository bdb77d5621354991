"""Writes 64 natural-image crops (128x128 PNG) used by the desk runs and tests.

Sources are the sample photographs bundled with scikit-image, scikit-learn and
matplotlib. Crops are drawn at random scales with a fixed seed.
"""
import argparse
import os

import numpy as np
from PIL import Image


def sources():
    import matplotlib
    import skimage.data as sk
    from sklearn.datasets import load_sample_image

    yield "astronaut", sk.astronaut()
    yield "coffee", sk.coffee()
    yield "chelsea", sk.chelsea()
    yield "rocket", sk.rocket()
    yield "china", load_sample_image("china.jpg")
    yield "flower", load_sample_image("flower.jpg")
    hopper = os.path.join(matplotlib.get_data_path(), "sample_data", "grace_hopper.jpg")
    yield "hopper", np.asarray(Image.open(hopper).convert("RGB"))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data/natural")
    ap.add_argument("--count", type=int, default=64)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    photos = list(sources())
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        name, img = photos[i % len(photos)]
        h, w = img.shape[:2]
        side = int(rng.integers(args.size, min(h, w) // 2 + 1))
        y = int(rng.integers(0, h - side + 1))
        x = int(rng.integers(0, w - side + 1))
        crop = Image.fromarray(img[y : y + side, x : x + side]).resize((args.size, args.size), Image.LANCZOS)
        crop.save(os.path.join(args.out, f"{i:02d}_{name}.png"), optimize=True)


if __name__ == "__main__":
    main()
