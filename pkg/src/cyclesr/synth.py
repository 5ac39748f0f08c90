"""Procedural HR image corpus for desk-scale runs.

Images mix smooth gradients, geometric shapes, and band-limited texture so
that restoration networks have structure to learn from. All images share one
fixed palette and background level: in unpaired training the degraded-input
and clean-exemplar halves come from disjoint images, and matching their color
statistics keeps the discriminator focused on degradation artifacts instead
of per-image palettes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from . import imaging

# shared shape palette (see module docstring)
_PALETTE = np.array([
    [0.85, 0.30, 0.25],
    [0.25, 0.60, 0.85],
    [0.35, 0.75, 0.35],
    [0.90, 0.80, 0.30],
    [0.60, 0.40, 0.75],
    [0.20, 0.25, 0.30],
    [0.90, 0.90, 0.85],
    [0.80, 0.55, 0.30],
])


def make_synthetic_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    ys /= height
    xs /= width
    img = np.zeros((height, width, 3), dtype=np.float64)

    # mid-gray background with a gentle luminance gradient
    a, b = rng.uniform(-1, 1, size=2)
    base = 0.5 + rng.uniform(-0.03, 0.03) + 0.1 * (a * xs + b * ys)
    img[:] = base[:, :, None]

    # sinusoidal luminance texture
    for _ in range(rng.integers(1, 4)):
        fy, fx = rng.uniform(2, 12, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.05, 0.15)
        wave = amp * np.sin(2 * np.pi * (fy * ys + fx * xs) + phase)
        img += wave[:, :, None]

    # hard-edged shapes (rectangles and disks) drawn from the shared palette
    for _ in range(rng.integers(3, 7)):
        color = _PALETTE[rng.integers(0, len(_PALETTE))]
        if rng.random() < 0.5:
            h0 = int(rng.integers(0, height - 4))
            w0 = int(rng.integers(0, width - 4))
            h1 = int(rng.integers(h0 + 3, min(height, h0 + height // 2) + 1))
            w1 = int(rng.integers(w0 + 3, min(width, w0 + width // 2) + 1))
            img[h0:h1, w0:w1] = 0.5 * img[h0:h1, w0:w1] + 0.5 * color
        else:
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            r = rng.uniform(min(height, width) * 0.05, min(height, width) * 0.3)
            mask = (np.mgrid[0:height, 0:width][0] - cy) ** 2 + \
                   (np.mgrid[0:height, 0:width][1] - cx) ** 2 < r**2
            img[mask] = 0.5 * img[mask] + 0.5 * color

    # band-limited noise texture
    field = rng.normal(0, 1, size=(height, width))
    field = ndimage.gaussian_filter(field, sigma=rng.uniform(1.0, 3.0))
    field /= max(np.abs(field).max(), 1e-9)
    img += 0.08 * field[:, :, None]

    return imaging.clamp01(img)


def make_synthetic_corpus(
    out_dir,
    count: int = 32,
    sizes: tuple[int, ...] = (96, 112, 128),
    seed: int = 0,
    start_index: int = 1,
) -> list[Path]:
    """Write `count` PNGs named by zero-padded index starting at start_index."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        h = int(rng.choice(sizes))
        w = int(rng.choice(sizes))
        img = make_synthetic_image(rng, h, w)
        path = out_dir / f"{start_index + i:04d}.png"
        imaging.save_png(img, path)
        paths.append(path)
    return paths
