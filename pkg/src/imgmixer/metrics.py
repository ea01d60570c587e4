"""PSNR and SSIM image-quality metrics.

SSIM uses an 11x11 Gaussian window (std 1.5) over valid positions, constants
C1=(0.01*peak)^2 and C2=(0.03*peak)^2, computed on the channel-averaged
luminance for multichannel images. Because the Gaussian window is separable,
the windowed means are two banded matrix products, which gives a numpy fast
path and a tape-differentiable path (for the 1-SSIM training loss) that share
the same window matrices and therefore the same values.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .tensor import ShapeError, Tensor, add, div, matmul, mul, scale, sub, tmean

PSNR_CAP_DB = 120.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE) in dB; identical images return the 120 dB cap."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"psnr shapes differ: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


@lru_cache(maxsize=32)
def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return g / g.sum()


@lru_cache(maxsize=64)
def _window_matrix(length: int, size: int = SSIM_WINDOW) -> np.ndarray:
    """Banded (length-size+1, length) matrix whose rows are the 1D Gaussian
    window at successive valid positions."""
    g = _gaussian_kernel(size)
    rows = length - size + 1
    mat = np.zeros((rows, length))
    for i in range(rows):
        mat[i, i : i + size] = g
    return mat


def _luminance(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img.mean(axis=-1)
    if img.ndim == 2:
        return img
    raise ShapeError(f"expected (H, W) or (H, W, ch) image, got shape {img.shape}")


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Mean local SSIM in [-1, 1]; 1 means the images are equal."""
    if np.asarray(a).shape != np.asarray(b).shape:
        raise ShapeError(f"ssim shapes differ: {np.asarray(a).shape} vs {np.asarray(b).shape}")
    x = _luminance(a)
    y = _luminance(b)
    h, w = x.shape
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    gr = _window_matrix(h)
    gct = _window_matrix(w).T
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    mu_x = gr @ x @ gct
    mu_y = gr @ y @ gct
    xx = gr @ (x * x) @ gct - mu_x * mu_x
    yy = gr @ (y * y) @ gct - mu_y * mu_y
    xy = gr @ (x * y) @ gct - mu_x * mu_y

    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(numerator / denominator))


def mean_psnr(a_batch: np.ndarray, b_batch: np.ndarray, peak: float = 1.0) -> float:
    return float(np.mean([psnr(a, b, peak) for a, b in zip(a_batch, b_batch)]))


def mean_ssim(a_batch: np.ndarray, b_batch: np.ndarray, peak: float = 1.0) -> float:
    return float(np.mean([ssim(a, b, peak) for a, b in zip(a_batch, b_batch)]))


def _luminance_t(img: Tensor) -> Tensor:
    if img.ndim == 4:
        return tmean(img, axis=3)
    if img.ndim == 3:
        return img
    raise ShapeError(f"expected (B, H, W) or (B, H, W, ch) batch, got shape {img.shape}")


def ssim_tensor(a: Tensor, b: Tensor, peak: float = 1.0) -> Tensor:
    """Scalar mean SSIM over a batch, differentiable through the tape.

    Matches ``ssim`` on each image; the constant window matrices carry no
    gradient, so backward flows only through the image operands.
    """
    if a.shape != b.shape:
        raise ShapeError(f"ssim shapes differ: {a.shape} vs {b.shape}")
    x = _luminance_t(a)
    y = _luminance_t(b)
    _, h, w = x.shape
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    dtype = a.dtype
    gr = Tensor(_window_matrix(h).astype(dtype))
    gct = Tensor(_window_matrix(w).T.astype(dtype))
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    def windowed(t: Tensor) -> Tensor:
        return matmul(matmul(gr, t), gct)

    mu_x = windowed(x)
    mu_y = windowed(y)
    xx = sub(windowed(mul(x, x)), mul(mu_x, mu_x))
    yy = sub(windowed(mul(y, y)), mul(mu_y, mu_y))
    xy = sub(windowed(mul(x, y)), mul(mu_x, mu_y))

    numerator = mul(add(scale(mul(mu_x, mu_y), 2.0), c1), add(scale(xy, 2.0), c2))
    denominator = mul(
        add(add(mul(mu_x, mu_x), mul(mu_y, mu_y)), c1),
        add(add(xx, yy), c2),
    )
    return tmean(div(numerator, denominator))


def one_minus_ssim_loss(pred: Tensor, target: Tensor, peak: float = 1.0) -> Tensor:
    """Training loss 1 - SSIM, in [0, 2], zero iff the images match."""
    return sub_from_one(ssim_tensor(pred, target, peak))


def sub_from_one(t: Tensor) -> Tensor:
    return scale(sub(t, 1.0), -1.0)
