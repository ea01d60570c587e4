"""Synthetic natural-like images for dataset-free training and experiments.

Each image is a smooth low-frequency base (bilinearly upsampled coarse noise)
with a few constant-intensity shapes blended on top. Like photographs, the
result concentrates most of its energy in low spatial frequencies while still
containing edges, which is the property the denoising and inductive-bias
experiments rely on.
"""

from __future__ import annotations

import numpy as np

from .rng import substream


def _bilinear_upsample(coarse: np.ndarray, height: int, width: int) -> np.ndarray:
    ch, cw = coarse.shape
    ys = np.linspace(0.0, ch - 1.0, height)
    xs = np.linspace(0.0, cw - 1.0, width)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, ch - 1)
    x1 = np.minimum(x0 + 1, cw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = coarse[np.ix_(y0, x0)] * (1 - fx) + coarse[np.ix_(y0, x1)] * fx
    bottom = coarse[np.ix_(y1, x0)] * (1 - fx) + coarse[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def _one_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    grid = int(rng.integers(2, 9))
    img = _bilinear_upsample(rng.uniform(0.0, 1.0, size=(grid, grid)), height, width)

    yy, xx = np.mgrid[0:height, 0:width]
    span = min(height, width)
    for _ in range(int(rng.integers(2, 7))):
        value = rng.uniform(0.0, 1.0)
        alpha = rng.uniform(0.4, 1.0)
        kind = int(rng.integers(0, 4))
        if kind == 0:
            y0, y1 = np.sort(rng.integers(0, height, size=2))
            x0, x1 = np.sort(rng.integers(0, width, size=2))
            mask = (yy >= y0) & (yy <= y1) & (xx >= x0) & (xx <= x1)
        elif kind == 1:
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            ry = rng.uniform(span * 0.08, span * 0.4)
            rx = rng.uniform(span * 0.08, span * 0.4)
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        elif kind == 2:
            angle = rng.uniform(0, np.pi)
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            mask = np.cos(angle) * (xx - cx) + np.sin(angle) * (yy - cy) > 0
        else:
            angle = rng.uniform(0, np.pi)
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            dist = np.abs(np.cos(angle) * (xx - cx) + np.sin(angle) * (yy - cy))
            mask = dist < rng.uniform(1.0, span * 0.08)
        img = np.where(mask, (1 - alpha) * img + alpha * value, img)

    if rng.uniform() < 0.4:
        angle = rng.uniform(0, np.pi)
        freq = rng.uniform(0.5, 2.0) * np.pi / max(height, width)
        wave = 0.15 * np.sin(freq * (yy * np.sin(angle) + xx * np.cos(angle)))
        img = img + wave

    img = np.clip(img, 0.0, 1.0) ** rng.uniform(0.6, 1.6)
    return np.clip(img, 0.0, 1.0)


def synthetic_images(
    count: int, height: int, width: int, channels: int = 1, seed: int = 0
) -> np.ndarray:
    """A (count, H, W, ch) stack of synthetic images in [0, 1], deterministic
    per (seed, index)."""
    out = np.empty((count, height, width, channels))
    for i in range(count):
        rng = substream(seed, "synth", i)
        for c in range(channels):
            out[i, :, :, c] = _one_image(rng, height, width)
    return out
