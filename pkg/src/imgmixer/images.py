"""8-bit PNG/PGM image files <-> float images in [0, 1].

Reading divides by 255; writing clips to [0, 1] and quantizes with
round-half-up, so a write/read round trip of an already-quantized image is
exact and any image round-trips within half a quantum (1/510).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

SUPPORTED_SUFFIXES = (".png", ".pgm")


def read_image(path: str | Path) -> np.ndarray:
    """(H, W, ch) float64 array in [0, 1], channel-last, ch in {1, 3}."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            raise ValueError(
                f"{path}: unsupported image mode '{img.mode}'; only 8-bit L and RGB are handled"
            )
        arr = np.asarray(img, dtype=np.uint8)
    out = arr.astype(np.float64) / 255.0
    if out.ndim == 2:
        out = out[:, :, None]
    return out


def write_image(path: str | Path, image: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ValueError(f"{path}: unsupported image suffix; use one of {SUPPORTED_SUFFIXES}")
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, 1|3) image, got shape {np.asarray(image).shape}")
    quantized = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if arr.shape[2] == 1:
        pil = Image.fromarray(quantized[:, :, 0], mode="L")
    else:
        if path.suffix.lower() == ".pgm":
            raise ValueError("PGM holds grayscale only; write color images as PNG")
        pil = Image.fromarray(quantized, mode="RGB")
    pil.save(path)


def read_image_dir(directory: str | Path) -> np.ndarray:
    """Stack of identically shaped images, sorted by filename."""
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in SUPPORTED_SUFFIXES)
    if not paths:
        raise FileNotFoundError(f"no PNG/PGM images in {directory}")
    images = [read_image(p) for p in paths]
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ValueError(f"images in {directory} have mixed shapes: {sorted(shapes)}")
    return np.stack(images)
