"""Compressive sensing: subsampled orthonormal measurements, least-squares
coarse reconstruction, and SSIM-loss refinement training.

The measurement matrix A is a random row subset of an orthonormal n x n
transform (Hadamard or orthonormal DCT-II), so its rows are orthonormal and
the pseudo-inverse is simply the transpose: the coarse reconstruction A^T y
is the orthogonal projection of the image onto the row space of A. The
constant (DC) row is always kept so coarse reconstructions retain mean
intensity.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .denoise import MetricsRecord, TrainConfig, TrainResult, model_dtype
from .metrics import one_minus_ssim_loss, psnr, ssim
from .models import Model
from .optim import make_optimizer
from .rng import substream
from .tensor import NumericalError, Tensor, backward, no_grad

TRANSFORMS = ("hadamard", "dct")


@dataclass
class MeasurementOperator:
    kind: str
    height: int
    width: int
    rows: np.ndarray  # selected row indices into the orthonormal transform
    matrix: np.ndarray  # (m, n) measurement matrix
    seed: int

    @property
    def n(self) -> int:
        return self.height * self.width

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def acceleration(self) -> float:
        return self.n / self.m


def _transform_rows(kind: str, n: int, rows: np.ndarray) -> np.ndarray:
    if kind == "hadamard":
        if n & (n - 1):
            raise ValueError(f"hadamard transform needs a power-of-two signal length, got {n}")
        return hadamard(n, dtype=np.int8)[rows].astype(np.float64) / np.sqrt(n)
    if kind == "dct":
        cols = np.arange(n)
        mat = np.cos(np.pi * rows[:, None] * (2 * cols[None, :] + 1) / (2 * n))
        mat *= np.sqrt(2.0 / n)
        mat[rows == 0] = np.sqrt(1.0 / n)
        return mat
    raise ValueError(f"unknown transform '{kind}'; expected one of {TRANSFORMS}")


def build_operator(
    height: int, width: int, acceleration: float, seed: int, kind: str = "hadamard"
) -> MeasurementOperator:
    """Deterministic random row subset (DC row always included) with
    m = floor(n / acceleration) measurements."""
    if acceleration < 1:
        raise ValueError(f"acceleration must be >= 1, got {acceleration}")
    n = height * width
    m = int(n // acceleration)
    if m < 1:
        raise ValueError(f"acceleration {acceleration} leaves no measurements for n={n}")
    rng = substream(seed, "operator")
    if m == n:
        rows = np.arange(n, dtype=np.int64)
    else:
        rest = rng.choice(np.arange(1, n, dtype=np.int64), size=m - 1, replace=False)
        rows = np.concatenate(([0], np.sort(rest)))
    matrix = _transform_rows(kind, n, rows)
    return MeasurementOperator(
        kind=kind, height=height, width=width, rows=rows, matrix=matrix, seed=seed
    )


def measure(op: MeasurementOperator, image: np.ndarray) -> np.ndarray:
    flat = np.asarray(image, dtype=np.float64).reshape(-1)
    if flat.size != op.n:
        raise ValueError(f"image has {flat.size} pixels, operator expects {op.n}")
    return op.matrix @ flat


def coarse_reconstruct(op: MeasurementOperator, y: np.ndarray) -> np.ndarray:
    """Least-squares reconstruction A^T y reshaped to the image grid."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.m,):
        raise ValueError(f"measurements have shape {y.shape}, operator expects ({op.m},)")
    return (op.matrix.T @ y).reshape(op.height, op.width)


_OP_MAGIC = b"IMXO"
_KIND_CODES = {"hadamard": 0, "dct": 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def save_operator(path: str | Path, op: MeasurementOperator) -> None:
    with open(path, "wb") as fh:
        fh.write(_OP_MAGIC)
        fh.write(struct.pack("<BII", _KIND_CODES[op.kind], op.height, op.width))
        fh.write(struct.pack("<Q", op.m))
        fh.write(np.asarray(op.rows, dtype="<u8").tobytes())
        fh.write(struct.pack("<Q", op.seed))


def load_operator(path: str | Path) -> MeasurementOperator:
    with open(path, "rb") as fh:
        if fh.read(4) != _OP_MAGIC:
            raise ValueError(f"{path} is not an operator file")
        kind_code, height, width = struct.unpack("<BII", fh.read(9))
        (m,) = struct.unpack("<Q", fh.read(8))
        rows = np.frombuffer(fh.read(8 * m), dtype="<u8").astype(np.int64)
        (seed,) = struct.unpack("<Q", fh.read(8))
    kind = _CODE_KINDS[kind_code]
    matrix = _transform_rows(kind, height * width, rows)
    return MeasurementOperator(
        kind=kind, height=height, width=width, rows=rows, matrix=matrix, seed=seed
    )


@dataclass
class CsPair:
    """Coarse least-squares input paired with its clean target (both H x W x 1)."""

    coarse: np.ndarray
    clean: np.ndarray


def make_cs_pairs(images: np.ndarray, op: MeasurementOperator) -> list[CsPair]:
    pairs = []
    for img in images:
        plane = img[:, :, 0] if img.ndim == 3 else img
        recon = coarse_reconstruct(op, measure(op, plane))
        pairs.append(CsPair(coarse=recon[:, :, None], clean=np.asarray(plane)[:, :, None]))
    return pairs


def evaluate_refiner(model: Model, pairs: list[CsPair]) -> tuple[float, float]:
    """Mean PSNR and SSIM of the refined reconstructions on held-out pairs."""
    psnrs, ssims = [], []
    dtype = model_dtype(model)
    for pair in pairs:
        with no_grad():
            refined = model(Tensor(pair.coarse[None].astype(dtype))).data[0]
        psnrs.append(psnr(refined, pair.clean))
        ssims.append(ssim(refined, pair.clean))
    return float(np.mean(psnrs)), float(np.mean(ssims))


def coarse_ssim(pairs: list[CsPair]) -> float:
    return float(np.mean([ssim(p.coarse, p.clean) for p in pairs]))


def train_cs_refiner(
    model: Model,
    pairs: list[CsPair],
    config: TrainConfig,
    eval_pairs: list[CsPair] | None = None,
) -> TrainResult:
    """Train the model to map coarse reconstructions to clean images by
    minimizing the mean of 1 - SSIM(f(coarse), clean)."""
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
            eval_psnr, eval_ssim = evaluate_refiner(model, eval_pairs)
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
            coarse = np.stack([pairs[i].coarse for i in idx]).astype(dtype)
            clean = np.stack([pairs[i].clean for i in idx]).astype(dtype)
            out = model(Tensor(coarse))
            loss = one_minus_ssim_loss(out, Tensor(clean))
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
