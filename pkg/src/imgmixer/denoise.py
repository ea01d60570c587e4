"""Gaussian-noise dataset synthesis, residual-learning training, and inference.

The network is trained to predict the noise: for a pair (noisy y, clean x)
the target of f is the residual y - x, and the denoised estimate at inference
is y - f(y). Noisy images are kept unclipped so the residual target stays
exactly Gaussian; clipping happens only at image export.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import one_minus_ssim_loss, psnr, ssim
from .models import Model
from .optim import make_optimizer
from .params import ModelParams
from .rng import substream
from .tensor import NumericalError, Tensor, backward, mse_loss, no_grad, sub

LOSSES = ("residual_mse", "one_minus_ssim")


@dataclass
class SamplePair:
    """One training unit: clean image in [0, 1] and its unclipped noisy version."""

    clean: np.ndarray
    noisy: np.ndarray
    sigma: float
    seed: int


@dataclass
class TrainConfig:
    epochs: int = 1
    batch_size: int = 16
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    precision: str = "f64"
    loss: str = "residual_mse"
    eval_interval: int = 100
    # Step decay: lr *= 0.3 once, at 2/3 of the total iteration count.
    lr_decay: bool = True

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.precision not in ("f32", "f64"):
            raise ValueError(f"precision must be f32 or f64, got '{self.precision}'")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got '{self.loss}'")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be positive")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64


@dataclass
class MetricsRecord:
    iteration: int
    train_loss: float
    eval_psnr_db: float
    eval_ssim: float
    wall_clock_s: float


@dataclass
class TrainResult:
    params: ModelParams
    records: list[MetricsRecord]
    loss_history: list[float] = field(default_factory=list)


def synthesize_noisy_set(images: np.ndarray, sigma: float, seed: int) -> list[SamplePair]:
    """i.i.d. zero-mean Gaussian noise per scalar, keyed by (seed, index).

    ``sigma`` is in [0, 1] pixel units (a std of 30 on the 8-bit scale is
    30/255 here). Noisy images are not clipped.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    pairs = []
    for i, clean in enumerate(images):
        noise = substream(seed, "noise", i).normal(0.0, sigma, size=clean.shape)
        pairs.append(SamplePair(clean=clean, noisy=clean + noise, sigma=sigma, seed=seed))
    return pairs


def _stack(pairs: list[SamplePair], idx: np.ndarray, dtype) -> tuple[np.ndarray, np.ndarray]:
    clean = np.stack([pairs[i].clean for i in idx]).astype(dtype)
    noisy = np.stack([pairs[i].noisy for i in idx]).astype(dtype)
    return clean, noisy


def denoise(model: Model, noisy: np.ndarray) -> np.ndarray:
    """Residual inference: y - f(y). Accepts one image or a batch; unclipped."""
    arr = np.asarray(noisy)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    with no_grad():
        residual = model(Tensor(arr.astype(model_dtype(model)))).data
    out = arr - residual
    return out[0] if single else out


def model_dtype(model: Model):
    return next(iter(model.params.values())).dtype


def evaluate_denoiser(model: Model, pairs: list[SamplePair]) -> tuple[float, float]:
    """Mean PSNR (dB) and SSIM of residual inference over a held-out set."""
    psnrs, ssims = [], []
    for pair in pairs:
        restored = denoise(model, pair.noisy)
        psnrs.append(psnr(restored, pair.clean))
        ssims.append(ssim(restored, pair.clean))
    return float(np.mean(psnrs)), float(np.mean(ssims))


def train_denoiser(
    model: Model,
    pairs: list[SamplePair],
    config: TrainConfig,
    eval_pairs: list[SamplePair] | None = None,
) -> TrainResult:
    """Mini-batch residual training; deterministic given the config seed."""
    config.validate()
    dtype = config.dtype
    for p in model.params.values():
        if p.dtype != dtype:
            p.data = p.data.astype(dtype)

    n = len(pairs)
    steps_per_epoch = (n + config.batch_size - 1) // config.batch_size
    total = config.epochs * steps_per_epoch
    decay_at = (2 * total) // 3 if config.lr_decay else -1

    optimizer = make_optimizer(config.optimizer, config.lr)
    records: list[MetricsRecord] = []
    loss_history: list[float] = []
    started = time.perf_counter()
    iteration = 0

    def record_now(loss_value: float) -> None:
        if eval_pairs:
            eval_psnr, eval_ssim = evaluate_denoiser(model, eval_pairs)
        else:
            eval_psnr, eval_ssim = float("nan"), float("nan")
        records.append(
            MetricsRecord(
                iteration=iteration,
                train_loss=loss_value,
                eval_psnr_db=eval_psnr,
                eval_ssim=eval_ssim,
                wall_clock_s=time.perf_counter() - started,
            )
        )

    for epoch in range(config.epochs):
        order = substream(config.seed, "data-order", epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            clean, noisy = _stack(pairs, idx, dtype)
            x = Tensor(noisy)
            out = model(x)
            if config.loss == "residual_mse":
                loss = mse_loss(out, Tensor(noisy - clean))
            else:
                restored = sub(x, out)
                loss = one_minus_ssim_loss(restored, Tensor(clean))
            value = loss.item()
            iteration += 1
            if not np.isfinite(value):
                raise NumericalError(f"training loss became non-finite at iteration {iteration}")
            loss_history.append(value)
            backward(loss)
            optimizer.step(model.params)
            model.params.zero_grad()
            if iteration == decay_at:
                optimizer.lr *= 0.3
            if iteration % config.eval_interval == 0 or iteration == total:
                record_now(value)

    if not records or records[-1].iteration != total:
        record_now(loss_history[-1] if loss_history else float("nan"))
    return TrainResult(params=model.params, records=records, loss_history=loss_history)


def cache_images(path: str | Path, images: np.ndarray) -> None:
    """Cache an image stack in the binary tensor format."""
    from .serialize import save_tensor

    save_tensor(path, np.asarray(images, dtype=np.float64))


def load_cached_images(path: str | Path) -> np.ndarray:
    from .serialize import load_tensor

    images = load_tensor(path)
    if images.ndim != 4:
        raise ValueError(f"cached dataset must be (count, H, W, ch), got shape {images.shape}")
    return images


CSV_HEADER = ("iteration", "train_loss", "eval_psnr_db", "eval_ssim", "wall_clock_s")


def write_metrics_csv(path: str | Path, records: list[MetricsRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.iteration, repr(r.train_loss), repr(r.eval_psnr_db), repr(r.eval_ssim), repr(r.wall_clock_s)]
            )
