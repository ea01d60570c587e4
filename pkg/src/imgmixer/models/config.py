"""Architecture configurations, parameter layout, counting, and initialization.

``param_shapes`` is the single source of truth for every family's parameter
layout: ``count_params`` sums it and ``init_params`` materializes it, so the
closed-form count can never drift from the actual trainable tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..params import ModelParams
from ..rng import substream
from ..tensor import Tensor

FAMILIES = (
    "img2img_mixer",
    "original_mixer",
    "linear_mixer",
    "multires_mixer",
    "vit_recon",
)

SUPPORTED_PATCH_SIZES = (1, 2, 4, 8)

# (name, shape, init) where init is ("uniform", fan_in) | "zeros" | "ones"
ParamSpec = tuple[str, tuple[int, ...], object]


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of one model instance.

    ``patch`` is the patch size in pixels, ``depth`` the number of mixer
    blocks or transformer layers, ``embed`` the embedding dimension and
    ``factor`` the MLP hidden expansion. ``heads`` only applies to
    vit_recon, ``levels`` (number of merge stages) only to multires_mixer.
    """

    family: str
    height: int
    width: int
    channels: int = 1
    patch: int = 4
    depth: int = 16
    embed: int = 64
    factor: int = 4
    heads: int = 4
    levels: int = 1

    def validate(self, require_blocks: bool = True) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family '{self.family}'; expected one of {FAMILIES}")
        if self.patch not in SUPPORTED_PATCH_SIZES:
            raise ValueError(f"patch size {self.patch} unsupported; use one of {SUPPORTED_PATCH_SIZES}")
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"image dims must be positive, got {self.height}x{self.width}")
        if self.height % self.patch or self.width % self.patch:
            raise ValueError(
                f"image dims {self.height}x{self.width} not divisible by patch size {self.patch}"
            )
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.embed < 1 or self.factor < 1:
            raise ValueError("embed and factor must be >= 1")
        if require_blocks and self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.depth < 0:
            raise ValueError(f"depth must be non-negative, got {self.depth}")
        if self.family == "vit_recon":
            if self.heads < 1 or self.embed % self.heads:
                raise ValueError(
                    f"embed dim {self.embed} must be divisible by heads {self.heads}"
                )
        if self.family == "multires_mixer":
            if self.levels < 1:
                raise ValueError(f"multires levels must be >= 1, got {self.levels}")
            if require_blocks and self.depth < self.levels + 1:
                raise ValueError(
                    f"depth {self.depth} too small for {self.levels} merge levels"
                )
            hp, wp = self.grid
            if hp % (1 << self.levels) or wp % (1 << self.levels):
                raise ValueError(
                    f"patch grid {hp}x{wp} not divisible by 2^levels={1 << self.levels}"
                )

    @property
    def grid(self) -> tuple[int, int]:
        """Patch-grid dims (height/patch, width/patch)."""
        return self.height // self.patch, self.width // self.patch

    @property
    def tokens(self) -> int:
        """Flattened token count S."""
        hp, wp = self.grid
        return hp * wp

    @property
    def patch_dim(self) -> int:
        """Flattened patch vector length (channels * patch^2)."""
        return self.channels * self.patch * self.patch

    def with_size(self, height: int, width: int) -> "ModelConfig":
        return replace(self, height=height, width=width)


def _uniform(fan_in: int):
    return ("uniform", fan_in)


def _mixing_block_shapes(prefix: str, hp: int, wp: int, c: int, f: int) -> list[ParamSpec]:
    """Height-, width-, channel-mixing MLPs, each with its own pre-norm."""
    shapes: list[ParamSpec] = []
    for tag, dim in (("h", hp), ("w", wp), ("c", c)):
        hidden = f * dim
        shapes += [
            (f"{prefix}{tag}norm.g", (dim,), "ones"),
            (f"{prefix}{tag}norm.b", (dim,), "zeros"),
            (f"{prefix}{tag}mix.w1", (dim, hidden), _uniform(dim)),
            (f"{prefix}{tag}mix.b1", (hidden,), "zeros"),
            (f"{prefix}{tag}mix.w2", (hidden, dim), _uniform(hidden)),
            (f"{prefix}{tag}mix.b2", (dim,), "zeros"),
        ]
    return shapes


def _embed_expand_shapes(cfg: ModelConfig) -> tuple[list[ParamSpec], list[ParamSpec]]:
    d = cfg.patch_dim
    c = cfg.embed
    lifted = c * cfg.patch * cfg.patch
    embed = [("embed.w", (d, c), _uniform(d)), ("embed.b", (c,), "zeros")]
    expand = [
        ("expand.w", (c, lifted), _uniform(c)),
        ("expand.b", (lifted,), "zeros"),
        ("combine.w", (c, cfg.channels), _uniform(c)),
        ("combine.b", (cfg.channels,), "zeros"),
    ]
    return embed, expand


def param_shapes(cfg: ModelConfig) -> list[ParamSpec]:
    """Full ordered parameter layout for one model instance."""
    cfg.validate(require_blocks=False)
    hp, wp = cfg.grid
    c, f = cfg.embed, cfg.factor
    shapes: list[ParamSpec] = []

    if cfg.family == "img2img_mixer":
        embed, expand = _embed_expand_shapes(cfg)
        shapes += embed
        for i in range(cfg.depth):
            shapes += _mixing_block_shapes(f"block{i:02d}.", hp, wp, c, f)
        shapes += expand

    elif cfg.family == "linear_mixer":
        embed, expand = _embed_expand_shapes(cfg)
        shapes += embed
        for i in range(cfg.depth):
            p = f"block{i:02d}."
            shapes += [
                (f"{p}norm.g", (c,), "ones"),
                (f"{p}norm.b", (c,), "zeros"),
                (f"{p}hlin.w", (hp, hp), _uniform(hp)),
                (f"{p}hlin.b", (hp,), "zeros"),
                (f"{p}wlin.w", (wp, wp), _uniform(wp)),
                (f"{p}wlin.b", (wp,), "zeros"),
                (f"{p}clin1.w", (c, f * c), _uniform(c)),
                (f"{p}clin1.b", (f * c,), "zeros"),
                (f"{p}clin2.w", (f * c, c), _uniform(f * c)),
                (f"{p}clin2.b", (c,), "zeros"),
            ]
        shapes += expand

    elif cfg.family == "multires_mixer":
        embed, expand = _embed_expand_shapes(cfg)
        shapes += embed
        per_scale = cfg.depth // (cfg.levels + 1) if cfg.depth else 0
        for level in range(cfg.levels + 1):
            ch = c << level
            for j in range(per_scale):
                shapes += _mixing_block_shapes(
                    f"scale{level}.block{j:02d}.", hp >> level, wp >> level, ch, f
                )
            if level < cfg.levels:
                shapes += [
                    (f"down{level}.w", (4 * ch, 2 * ch), _uniform(4 * ch)),
                    (f"down{level}.b", (2 * ch,), "zeros"),
                ]
        for level in range(cfg.levels - 1, -1, -1):
            ch = c << level
            shapes += [
                (f"up{level}.w", (2 * ch, 4 * ch), _uniform(2 * ch)),
                (f"up{level}.b", (4 * ch,), "zeros"),
            ]
        shapes += expand

    elif cfg.family == "original_mixer":
        s, d = cfg.tokens, cfg.patch_dim
        shapes += [("embed.w", (d, c), _uniform(d)), ("embed.b", (c,), "zeros")]
        for i in range(cfg.depth):
            p = f"block{i:02d}."
            shapes += [
                (f"{p}tnorm.g", (c,), "ones"),
                (f"{p}tnorm.b", (c,), "zeros"),
                (f"{p}tmix.w1", (s, f * s), _uniform(s)),
                (f"{p}tmix.b1", (f * s,), "zeros"),
                (f"{p}tmix.w2", (f * s, s), _uniform(f * s)),
                (f"{p}tmix.b2", (s,), "zeros"),
                (f"{p}cnorm.g", (c,), "ones"),
                (f"{p}cnorm.b", (c,), "zeros"),
                (f"{p}cmix.w1", (c, f * c), _uniform(c)),
                (f"{p}cmix.b1", (f * c,), "zeros"),
                (f"{p}cmix.w2", (f * c, c), _uniform(f * c)),
                (f"{p}cmix.b2", (c,), "zeros"),
            ]
        shapes += [("proj.w", (c, d), _uniform(c)), ("proj.b", (d,), "zeros")]

    elif cfg.family == "vit_recon":
        s, d = cfg.tokens, cfg.patch_dim
        shapes += [
            ("embed.w", (d, c), _uniform(d)),
            ("embed.b", (c,), "zeros"),
            ("pos", (s, c), _uniform(c)),
        ]
        for i in range(cfg.depth):
            p = f"block{i:02d}."
            shapes += [(f"{p}norm1.g", (c,), "ones"), (f"{p}norm1.b", (c,), "zeros")]
            for proj in ("q", "k", "v", "o"):
                shapes += [
                    (f"{p}attn.w{proj}", (c, c), _uniform(c)),
                    (f"{p}attn.b{proj}", (c,), "zeros"),
                ]
            shapes += [
                (f"{p}norm2.g", (c,), "ones"),
                (f"{p}norm2.b", (c,), "zeros"),
                (f"{p}mlp.w1", (c, f * c), _uniform(c)),
                (f"{p}mlp.b1", (f * c,), "zeros"),
                (f"{p}mlp.w2", (f * c, c), _uniform(f * c)),
                (f"{p}mlp.b2", (c,), "zeros"),
            ]
        shapes += [
            ("head.norm.g", (c,), "ones"),
            ("head.norm.b", (c,), "zeros"),
            ("head.w", (c, d), _uniform(c)),
            ("head.b", (d,), "zeros"),
        ]

    return shapes


def count_params(cfg: ModelConfig) -> int:
    """Exact trainable-scalar count, straight from the layout."""
    return sum(int(np.prod(shape, dtype=np.int64)) for _, shape, _ in param_shapes(cfg))


_MIXING_MARKERS = {
    "img2img_mixer": (".hmix.", ".wmix."),
    "multires_mixer": (".hmix.", ".wmix."),
    "linear_mixer": (".hlin.", ".wlin."),
    "original_mixer": (".tmix.",),
}


def mixing_param_count(cfg: ModelConfig) -> int:
    """Trainable scalars spent on spatial mixing (height+width MLPs, or the
    original mixer's token MLPs). This is the quantity whose growth with
    image resolution distinguishes the two designs."""
    markers = _MIXING_MARKERS.get(cfg.family)
    if markers is None:
        raise ValueError(f"family '{cfg.family}' has no axis-mixing MLPs")
    return sum(
        int(np.prod(shape, dtype=np.int64))
        for name, shape, _ in param_shapes(cfg)
        if any(m in name for m in markers)
    )


def init_params(cfg: ModelConfig, seed: int, dtype=np.float64) -> ModelParams:
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases, unit gains.

    Deterministic: one named sub-stream consumed in canonical layout order.
    """
    cfg.validate(require_blocks=True)
    rng = substream(seed, "init")
    params = ModelParams()
    for name, shape, init in param_shapes(cfg):
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            _, fan_in = init
            bound = float(np.sqrt(1.0 / fan_in))
            data = rng.uniform(-bound, bound, size=shape)
        params[name] = Tensor(data.astype(dtype), requires_grad=True)
    return params


_CONFIG_KEYS = (
    "family",
    "height",
    "width",
    "channels",
    "patch",
    "depth",
    "embed",
    "factor",
    "heads",
    "levels",
)


def save_config(path: str | Path, cfg: ModelConfig, seed: int = 0) -> None:
    lines = [f"{key}={getattr(cfg, key)}" for key in _CONFIG_KEYS]
    lines.append(f"seed={seed}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config(path: str | Path) -> tuple[ModelConfig, int]:
    fields: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    unknown = set(fields) - set(_CONFIG_KEYS) - {"seed"}
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {sorted(unknown)}")
    kwargs = {key: fields[key] for key in _CONFIG_KEYS if key in fields}
    for key in kwargs:
        if key != "family":
            kwargs[key] = int(kwargs[key])
    cfg = ModelConfig(**kwargs)
    cfg.validate(require_blocks=False)
    return cfg, int(fields.get("seed", 0))
