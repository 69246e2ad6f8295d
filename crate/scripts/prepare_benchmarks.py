#!/usr/bin/env python3
"""Regenerate the 256x256 RGB benchmark fixtures in fixtures/benchmark/.

Sources:
  lena    npm package `lena` 1.0.0 (512x512x3 ndarray, base64 in lena.js)
  baboon  npm package `baboon-image` 2.1.0 (baboon.png)
  others  scikit-image bundled sample data

Usage: prepare_benchmarks.py <dir-with-unpacked-npm-tarballs> [out-dir]
"""
import base64
import os
import re
import sys

import numpy as np
from PIL import Image
import skimage.data

SIZE = 256


def square(img: np.ndarray) -> Image.Image:
    h, w = img.shape[:2]
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    crop = img[top:top + s, left:left + s, :3]
    return Image.fromarray(crop.astype(np.uint8), "RGB").resize((SIZE, SIZE), Image.LANCZOS)


def lena(npm_dir: str) -> np.ndarray:
    src = open(os.path.join(npm_dir, "lena-1.0.0", "package", "lena.js")).read()
    payload = re.search(r"base64decode\(\s*'([^']+)'", src).group(1)
    raw = np.frombuffer(base64.b64decode(payload), dtype=np.uint8)
    # the ndarray is indexed [x, y, channel]
    return raw.reshape(512, 512, 3).transpose(1, 0, 2)


def baboon(npm_dir: str) -> np.ndarray:
    return np.asarray(Image.open(os.path.join(npm_dir, "baboon-image-2.1.0", "package", "baboon.png")).convert("RGB"))


def main() -> None:
    npm_dir = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else os.path.join(os.path.dirname(__file__), "..", "fixtures", "benchmark")
    images = {
        "lena": lena(npm_dir),
        "baboon": baboon(npm_dir),
        "astronaut": skimage.data.astronaut(),
        "chelsea": skimage.data.chelsea(),
        "coffee": skimage.data.coffee(),
        "rocket": skimage.data.rocket(),
        "motorcycle": skimage.data.stereo_motorcycle()[0],
        "ihc": skimage.data.immunohistochemistry(),
    }
    os.makedirs(out, exist_ok=True)
    for name, img in images.items():
        square(img).save(os.path.join(out, f"{name}.png"), optimize=True)
        print(name, img.shape)


if __name__ == "__main__":
    main()
