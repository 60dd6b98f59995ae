"""Regenerate the bundled natural-image samples (needs scikit-image)."""
from pathlib import Path

import numpy as np
from skimage import data, transform

from dtscatter.dataio import write_ppm

OUT = Path(__file__).resolve().parents[1] / "src" / "dtscatter" / "data"
SIDE = 128


def main():
    for name in ("astronaut", "coffee", "chelsea", "rocket"):
        img = getattr(data, name)()
        h, w = img.shape[:2]
        s = min(h, w)
        top, left = (h - s) // 2, (w - s) // 2
        crop = img[top:top + s, left:left + s] / 255.0
        small = transform.resize(crop, (SIDE, SIDE), order=1, anti_aliasing=True)
        write_ppm(np.clip(small, 0, 1).transpose(2, 0, 1), OUT / f"sample_{name}.ppm")
        print("wrote", name)


if __name__ == "__main__":
    main()
