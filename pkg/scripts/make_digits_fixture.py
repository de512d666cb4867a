"""Build the MNIST-format digit fixtures shipped under tests/data.

The 1797 real handwritten 8x8 digits bundled with scikit-learn are upscaled
bilinearly to a 20x20 box, centred in a 28x28 frame (the MNIST layout) and
quantized to bytes. Two files are written:

    digits-images-idx3-ubyte.gz   all 1797 images, gzipped IDX
    digits64-idx3-ubyte           the first 64 images, plain IDX

Usage: python3 scripts/make_digits_fixture.py [OUT_DIR]
Requires the ``fixtures`` extra (scikit-learn, scipy).
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits

from itugan.data import load_idx, write_idx


def upscale(digits8: np.ndarray) -> np.ndarray:
    """(n, 8, 8) values 0..16 -> (n, 28, 28) uint8 in MNIST layout."""
    out = np.zeros((digits8.shape[0], 28, 28), dtype=np.uint8)
    for k, img in enumerate(digits8):
        big = zoom(img / 16.0, 20 / 8, order=1, mode="nearest", grid_mode=True)
        out[k, 4:24, 4:24] = np.clip(np.rint(255.0 * big), 0, 255).astype(np.uint8)
    return out


def main(out_dir: str = "tests/data") -> None:
    out = Path(out_dir)
    pix = upscale(load_digits().images)
    full = write_idx(out / "digits-images-idx3-ubyte.gz", pix)
    small = write_idx(out / "digits64-idx3-ubyte", pix[:64])
    for p in (full, small):
        print(p, load_idx(p).count)


if __name__ == "__main__":
    main(*sys.argv[1:])
