"""Architecture families and the model facade."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..params import ModelParams
from ..serialize import load_checkpoint, save_checkpoint
from ..tensor import Tensor
from .config import (
    FAMILIES,
    ModelConfig,
    count_params,
    init_params,
    load_config,
    mixing_param_count,
    param_shapes,
    save_config,
)
from .img2img import (
    img2img_forward,
    linear_mixer_block,
    linear_mixer_forward,
    mixer_block,
    multires_expand,
    multires_forward,
    multires_merge,
    patch_embed,
    patch_expand,
)
from .original import original_block, original_forward
from .vit import attention, vit_block, vit_forward

_FORWARDS = {
    "img2img_mixer": img2img_forward,
    "original_mixer": original_forward,
    "linear_mixer": linear_mixer_forward,
    "multires_mixer": multires_forward,
    "vit_recon": vit_forward,
}


def forward(x: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    """Run one family's forward pass on a (B, H, W, ch) batch."""
    if x.ndim != 4 or x.shape[1:] != (cfg.height, cfg.width, cfg.channels):
        raise ValueError(
            f"input shape {x.shape} does not match config "
            f"(B, {cfg.height}, {cfg.width}, {cfg.channels})"
        )
    return _FORWARDS[cfg.family](x, params, cfg)


class Model:
    """A config plus its parameters; callable on batched image tensors."""

    def __init__(self, cfg: ModelConfig, params: ModelParams, seed: int = 0):
        self.config = cfg
        self.params = params
        self.seed = seed

    @classmethod
    def build(cls, cfg: ModelConfig, seed: int = 0, dtype=np.float64) -> "Model":
        return cls(cfg, init_params(cfg, seed, dtype=dtype), seed=seed)

    def __call__(self, x: Tensor) -> Tensor:
        return forward(x, self.params, self.config)

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_checkpoint(directory / "model.ckpt", self.params)
        save_config(directory / "model.cfg", self.config, seed=self.seed)
        return directory / "model.ckpt"

    @classmethod
    def load(cls, checkpoint: str | Path) -> "Model":
        checkpoint = Path(checkpoint)
        if checkpoint.is_dir():
            checkpoint = checkpoint / "model.ckpt"
        cfg_path = checkpoint.with_suffix(".cfg")
        if not cfg_path.exists():
            raise FileNotFoundError(f"missing config file {cfg_path} next to {checkpoint}")
        cfg, seed = load_config(cfg_path)
        return cls(cfg, load_checkpoint(checkpoint), seed=seed)


__all__ = [
    "FAMILIES",
    "Model",
    "ModelConfig",
    "attention",
    "count_params",
    "forward",
    "img2img_forward",
    "init_params",
    "linear_mixer_block",
    "linear_mixer_forward",
    "load_config",
    "mixer_block",
    "mixing_param_count",
    "multires_expand",
    "multires_forward",
    "multires_merge",
    "original_block",
    "original_forward",
    "param_shapes",
    "patch_embed",
    "patch_expand",
    "save_config",
    "vit_block",
    "vit_forward",
]
