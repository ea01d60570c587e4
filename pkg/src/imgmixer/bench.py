"""Forward-pass throughput benchmark (images per second per host process)."""

from __future__ import annotations

import gc
import time
from dataclasses import dataclass

import numpy as np

from .models import Model, ModelConfig
from .rng import substream
from .tensor import Tensor, no_grad

# Each timing sample spans at least this long; fast models run several
# forwards per sample so scheduler jitter does not dominate the variance.
MIN_SAMPLE_SECONDS = 0.03


@dataclass
class BenchRow:
    arch: str
    batch: int
    images_per_sec: float
    cv: float  # coefficient of variation of the per-repeat rates


def bench_model(
    model: Model, batch_sizes: list[int], repeats: int = 20, warmup: int = 3, seed: int = 0
) -> list[BenchRow]:
    cfg = model.config
    rows = []
    rng = substream(seed, "bench")
    for batch in batch_sizes:
        x = Tensor(
            rng.uniform(0.0, 1.0, size=(batch, cfg.height, cfg.width, cfg.channels)).astype(
                np.float32
            )
        )
        with no_grad():
            start = time.perf_counter()
            for _ in range(max(warmup, 3)):
                model(x)
            once = max((time.perf_counter() - start) / max(warmup, 3), 1e-6)
            inner = max(1, int(np.ceil(MIN_SAMPLE_SECONDS / once)))
            rates = []
            gc_was_enabled = gc.isenabled()
            gc.collect()
            gc.disable()
            try:
                for _ in range(repeats):
                    start = time.perf_counter()
                    for _ in range(inner):
                        model(x)
                    elapsed = time.perf_counter() - start
                    rates.append(batch * inner / elapsed)
            finally:
                if gc_was_enabled:
                    gc.enable()
        rates = np.asarray(rates)
        rows.append(
            BenchRow(
                arch=cfg.family,
                batch=batch,
                images_per_sec=float(np.median(rates)),
                cv=float(rates.std() / rates.mean()),
            )
        )
    return rows


def bench_throughput(
    configs: dict[str, ModelConfig],
    batch_sizes: list[int],
    repeats: int = 20,
    warmup: int = 3,
    seed: int = 0,
) -> list[BenchRow]:
    """Throughput table over architectures x batch sizes; f32 forward only."""
    rows = []
    for arch, cfg in configs.items():
        model = Model.build(cfg, seed=seed, dtype=np.float32)
        for row in bench_model(model, batch_sizes, repeats=repeats, warmup=warmup, seed=seed):
            row.arch = arch
            rows.append(row)
    return rows


def best_batch(rows: list[BenchRow]) -> dict[str, BenchRow]:
    """Per architecture, the batch size with the highest throughput."""
    best: dict[str, BenchRow] = {}
    for row in rows:
        if row.arch not in best or row.images_per_sec > best[row.arch].images_per_sec:
            best[row.arch] = row
    return best


def format_table(rows: list[BenchRow]) -> str:
    lines = [f"{'arch':<16} {'batch':>5} {'img/s':>12} {'cv':>8}"]
    for row in rows:
        lines.append(f"{row.arch:<16} {row.batch:>5} {row.images_per_sec:>12.2f} {row.cv:>8.3f}")
    marked = best_batch(rows)
    lines.append("")
    lines.append("best batch per architecture:")
    for arch, row in marked.items():
        lines.append(f"  {arch}: batch {row.batch} at {row.images_per_sec:.2f} img/s")
    return "\n".join(lines)
