import numpy as np

from imgmixer.bench import bench_throughput, best_batch, format_table
from imgmixer.models import ModelConfig


def _configs():
    return {
        "img2img": ModelConfig("img2img_mixer", 16, 16, 1, patch=4, depth=2, embed=8, factor=2),
        "original": ModelConfig("original_mixer", 16, 16, 1, patch=4, depth=2, embed=8, factor=2),
    }


def test_rates_positive_and_finite():
    rows = bench_throughput(_configs(), [1, 2], repeats=4)
    assert len(rows) == 4
    for row in rows:
        assert np.isfinite(row.images_per_sec) and row.images_per_sec > 0
        assert np.isfinite(row.cv) and row.cv >= 0


def test_all_requested_architectures_reported():
    rows = bench_throughput(_configs(), [1], repeats=3)
    assert {row.arch for row in rows} == {"img2img", "original"}


def test_images_per_pass_bookkeeping():
    # doubling the batch doubles the images processed per pass by definition
    rows = bench_throughput({"img2img": _configs()["img2img"]}, [1, 2, 4], repeats=3)
    batches = [row.batch for row in rows]
    assert batches == [1, 2, 4]


def test_best_batch_and_table():
    rows = bench_throughput(_configs(), [1, 2], repeats=3)
    best = best_batch(rows)
    assert set(best) == {"img2img", "original"}
    table = format_table(rows)
    assert "img/s" in table and "best batch" in table
