"""Inductive-bias probe: fit an untrained network to a single target.

A randomly initialized network is fed one fixed random input and trained by
plain gradient descent to output (a) a natural image, (b) Gaussian noise, or
(c) the image plus the noise. Architectures biased toward natural images fit
the image in far fewer iterations than the noise; with the image+noise
target, the output passes close to the clean image before descending into
the noise, so early stopping denoises.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import psnr
from .models import Model, ModelConfig, init_params
from .optim import Sgd
from .rng import substream
from .synthdata import synthetic_images
from .tensor import NumericalError, Tensor, backward, mse_loss

TARGETS = ("img", "noise", "img_plus_noise")

DIVERGENCE_LIMIT = 1e3
DEFAULT_ITERATIONS = 1500
LR_SWEEP = (1e-2, 1e-1, 1.0)


@dataclass
class BiasRunSpec:
    config: ModelConfig
    target: str
    clean: np.ndarray  # (H, W, ch) in [0, 1]
    noise: np.ndarray  # same shape, zero-mean Gaussian realization
    lr: float
    iterations: int = DEFAULT_ITERATIONS
    input_seed: int = 0
    init_seed: int = 0

    def validate(self) -> None:
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}, got '{self.target}'")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        expected = (self.config.height, self.config.width, self.config.channels)
        if self.clean.shape != expected or self.noise.shape != expected:
            raise ValueError(
                f"clean/noise shapes {self.clean.shape}/{self.noise.shape} "
                f"do not match the model output {expected}"
            )


@dataclass
class BiasPoint:
    iteration: int
    mse_clean: float
    mse_noise: float
    psnr_db: float


@dataclass
class BiasResult:
    spec: BiasRunSpec
    curve: list[BiasPoint] = field(default_factory=list)


def random_input(spec: BiasRunSpec) -> np.ndarray:
    """The fixed network input: i.i.d. Uniform(0, 0.1) of image shape."""
    rng = substream(spec.input_seed, "input")
    return rng.uniform(0.0, 0.1, size=spec.clean.shape)


def _signal(spec: BiasRunSpec) -> np.ndarray:
    if spec.target == "img":
        return spec.clean
    if spec.target == "noise":
        return spec.noise
    return spec.clean + spec.noise


def run_bias_fit(spec: BiasRunSpec) -> BiasResult:
    """Full-batch gradient descent on the single fixed (input, signal) pair.

    The curve holds one entry per iteration, starting at iteration 0 (the
    untrained model). Aborts if the fitting loss exceeds the divergence limit.
    """
    spec.validate()
    model = Model.build(spec.config, seed=spec.init_seed)
    x = Tensor(random_input(spec)[None])
    signal = Tensor(_signal(spec)[None])
    optimizer = Sgd(spec.lr)
    curve: list[BiasPoint] = []

    def log_point(iteration: int, out_img: np.ndarray) -> None:
        curve.append(
            BiasPoint(
                iteration=iteration,
                mse_clean=float(np.mean((out_img - spec.clean) ** 2)),
                mse_noise=float(np.mean((out_img - spec.noise) ** 2)),
                psnr_db=psnr(out_img, spec.clean),
            )
        )

    signal_np = _signal(spec)
    for t in range(spec.iterations + 1):
        out = model(x)
        log_point(t, out.data[0])
        # Divergence guard on the mean-MSE scale (the summed objective is
        # resolution-dependent and exceeds any fixed limit at init).
        fit_mse = float(np.mean((out.data[0] - signal_np) ** 2))
        if not np.isfinite(fit_mse) or fit_mse > DIVERGENCE_LIMIT:
            raise NumericalError(
                f"bias fit diverged at iteration {t} "
                f"(fit MSE {fit_mse:.3g} > {DIVERGENCE_LIMIT:g})"
            )
        if t == spec.iterations:
            break
        # Mean-scaled fitting objective: identical optimum to the summed
        # form, but step sizes stay resolution-independent.
        loss = mse_loss(out, signal)
        backward(loss)
        optimizer.step(model.params)
        model.params.zero_grad()
    return BiasResult(spec=spec, curve=curve)


def best_iteration_psnr(curve: list[BiasPoint]) -> tuple[int, float]:
    """Argmax of the PSNR-vs-clean curve; first occurrence wins ties."""
    if not curve:
        raise ValueError("empty curve")
    best = curve[0]
    for point in curve[1:]:
        if point.psnr_db > best.psnr_db:
            best = point
    return best.iteration, best.psnr_db


def sweep_lr(
    config: ModelConfig,
    clean: np.ndarray,
    noise: np.ndarray,
    input_seed: int = 0,
    init_seed: int = 0,
    candidates: tuple[float, ...] = LR_SWEEP,
    probe_iters: int = 60,
) -> float:
    """Pick the step size for one architecture: short probes on the
    image+noise target, keeping the candidate with the lowest final MSE
    among those that do not diverge."""
    best_lr, best_mse = None, np.inf
    for lr in candidates:
        spec = BiasRunSpec(
            config=config,
            target="img_plus_noise",
            clean=clean,
            noise=noise,
            lr=lr,
            iterations=probe_iters,
            input_seed=input_seed,
            init_seed=init_seed,
        )
        try:
            result = run_bias_fit(spec)
        except NumericalError:
            continue
        final = result.curve[-1]
        probe_mse = float(np.mean((final.mse_clean, final.mse_noise)))
        if probe_mse < best_mse:
            best_lr, best_mse = lr, probe_mse
    if best_lr is None:
        raise NumericalError(f"all candidate step sizes diverged: {candidates}")
    return best_lr


def default_bias_image(height: int, width: int, channels: int = 1, seed: int = 7) -> np.ndarray:
    return synthetic_images(1, height, width, channels=channels, seed=seed)[0]


def write_curve_dat(path: str | Path, result: BiasResult) -> None:
    """Two-column `iteration mse` rows; the MSE is taken against the clean
    image for img and img+noise targets and against the noise otherwise."""
    use_noise = result.spec.target == "noise"
    with open(path, "w", encoding="utf-8") as fh:
        for p in result.curve:
            mse = p.mse_noise if use_noise else p.mse_clean
            fh.write(f"{p.iteration} {mse!r}\n")


def write_summary_csv(path: str | Path, results: list[BiasResult], arch: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arch", "target", "best_iter", "best_psnr_db", "input_psnr_db"])
        for result in results:
            best_iter, best_psnr = best_iteration_psnr(result.curve)
            noisy = result.spec.clean + result.spec.noise
            writer.writerow(
                [
                    arch,
                    result.spec.target,
                    best_iter,
                    f"{best_psnr:.4f}",
                    f"{psnr(noisy, result.spec.clean):.4f}",
                ]
            )
