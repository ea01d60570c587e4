import numpy as np
import numpy.testing as npt
import pytest

from imgmixer.cli import main
from imgmixer.images import read_image, write_image
from imgmixer.models import ModelConfig, count_params


def run(argv):
    return main(argv)


class TestParsing:
    def test_empty_argv_is_usage_error(self, capsys):
        assert run([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        assert run(["frobnicate"]) == 2

    def test_unknown_flag_rejected(self):
        assert run(["count-params", "--arch", "img2img", "--bogus", "1"]) == 2

    def test_unknown_arch_names_valid_set(self, capsys):
        assert run(["count-params", "--arch", "unet"]) == 2
        err = capsys.readouterr().err
        assert "img2img" in err and "vit" in err


class TestCountParams:
    def test_reference_row_matches_library(self, capsys):
        code = run(
            "count-params --arch img2img --patch 4 --depth 16 --embed 64 --factor 4"
            " --height 256 --width 256".split()
        )
        assert code == 0
        out = capsys.readouterr().out
        cfg = ModelConfig("img2img_mixer", 256, 256, 3, patch=4, depth=16, embed=64, factor=4)
        assert f"total_params={count_params(cfg)}" in out
        assert abs(count_params(cfg) - 1_660_000) / 1_660_000 < 0.05


class TestTrainAndArtifacts:
    def _train(self, out_dir, seed=3):
        return run(
            [
                "train",
                "--arch",
                "img2img",
                "--synthetic",
                "12",
                "--height",
                "32",
                "--width",
                "32",
                "--depth",
                "2",
                "--embed",
                "16",
                "--sigma",
                "25",
                "--epochs",
                "1",
                "--batch",
                "4",
                "--holdout",
                "2",
                "--eval-interval",
                "2",
                "--seed",
                str(seed),
                "--out-dir",
                str(out_dir),
            ]
        )

    def test_artifacts_written(self, tmp_path):
        assert self._train(tmp_path / "run") == 0
        for name in ("model.ckpt", "model.cfg", "metrics.csv", "run.meta"):
            assert (tmp_path / "run" / name).exists()

    def test_run_meta_echoes_resolved_options(self, tmp_path):
        self._train(tmp_path / "run")
        meta = dict(
            line.split("=", 1)
            for line in (tmp_path / "run" / "run.meta").read_text().strip().splitlines()
        )
        assert meta["command"] == "train"
        assert meta["arch"] == "img2img"
        assert meta["sigma"] == "25.0"
        assert meta["batch"] == "4"
        assert meta["lr"] == "0.001"

    def test_rerun_from_run_meta_reproduces_checkpoint(self, tmp_path):
        self._train(tmp_path / "a")
        meta = tmp_path / "a" / "run.meta"
        assert (
            run(["train", "--config", str(meta), "--out-dir", str(tmp_path / "b")]) == 0
        )
        assert (tmp_path / "a" / "model.ckpt").read_bytes() == (
            tmp_path / "b" / "model.ckpt"
        ).read_bytes()

    def test_same_seed_bit_reproducible(self, tmp_path):
        self._train(tmp_path / "a")
        self._train(tmp_path / "b")
        assert (tmp_path / "a" / "model.ckpt").read_bytes() == (
            tmp_path / "b" / "model.ckpt"
        ).read_bytes()

    def test_flags_override_config_file(self, tmp_path):
        self._train(tmp_path / "a", seed=3)
        meta = tmp_path / "a" / "run.meta"
        run(["train", "--config", str(meta), "--seed", "4", "--out-dir", str(tmp_path / "c")])
        assert (tmp_path / "a" / "model.ckpt").read_bytes() != (
            tmp_path / "c" / "model.ckpt"
        ).read_bytes()

    def test_requires_exactly_one_data_source(self, tmp_path, capsys):
        code = run(
            ["train", "--arch", "img2img", "--out-dir", str(tmp_path / "x")]
        )
        assert code == 2
        assert "data-dir" in capsys.readouterr().err

    def test_dataset_cache_created_and_reused(self, tmp_path):
        import numpy as np
        from imgmixer.denoise import load_cached_images

        cache = tmp_path / "set.imxt"
        args = [
            "train", "--arch", "img2img", "--synthetic", "6", "--height", "32",
            "--width", "32", "--depth", "2", "--embed", "16", "--epochs", "1",
            "--batch", "3", "--seed", "3", "--cache", str(cache),
        ]
        assert run(args + ["--out-dir", str(tmp_path / "a")]) == 0
        cached = load_cached_images(cache)
        assert cached.shape == (6, 32, 32, 1)
        # second run consumes the cache (even without --synthetic)
        args2 = [
            "train", "--arch", "img2img", "--depth", "2", "--embed", "16", "--epochs", "1",
            "--batch", "3", "--seed", "3", "--cache", str(cache),
            "--height", "32", "--width", "32",
        ]
        assert run(args2 + ["--out-dir", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "model.ckpt").read_bytes() == (
            tmp_path / "b" / "model.ckpt"
        ).read_bytes()


class TestDenoiseEval:
    def test_denoise_round_trip(self, tmp_path):
        TestTrainAndArtifacts()._train(tmp_path / "run")
        noisy = np.random.default_rng(0).uniform(0, 1, (32, 32, 1))
        write_image(tmp_path / "noisy.png", noisy)
        code = run(
            [
                "denoise",
                "--checkpoint",
                str(tmp_path / "run" / "model.ckpt"),
                "--input",
                str(tmp_path / "noisy.png"),
                "--output",
                str(tmp_path / "out.png"),
            ]
        )
        assert code == 0
        out = read_image(tmp_path / "out.png")
        assert out.shape == (32, 32, 1)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_eval_writes_csv(self, tmp_path):
        TestTrainAndArtifacts()._train(tmp_path / "run")
        code = run(
            [
                "eval",
                "--checkpoint",
                str(tmp_path / "run" / "model.ckpt"),
                "--synthetic",
                "3",
                "--sigma",
                "25",
                "--csv",
                str(tmp_path / "eval.csv"),
            ]
        )
        assert code == 0
        lines = (tmp_path / "eval.csv").read_text().strip().splitlines()
        assert lines[0] == "index,psnr_db,ssim"
        assert len(lines) == 4


class TestBias:
    def test_bias_outputs(self, tmp_path):
        code = run(
            [
                "bias",
                "--arch",
                "img2img",
                "--height",
                "16",
                "--width",
                "16",
                "--depth",
                "2",
                "--embed",
                "8",
                "--iters",
                "3",
                "--lr",
                "0.05",
                "--out-dir",
                str(tmp_path / "bias"),
            ]
        )
        assert code == 0
        for target in ("img", "noise", "img_plus_noise"):
            dat = tmp_path / "bias" / f"img2img_{target}.dat"
            assert len(dat.read_text().strip().splitlines()) == 4
        summary = (tmp_path / "bias" / "summary.csv").read_text().splitlines()
        assert summary[0] == "arch,target,best_iter,best_psnr_db,input_psnr_db"
        assert (tmp_path / "bias" / "run.meta").exists()

    def test_bias_deterministic(self, tmp_path):
        args = [
            "bias", "--arch", "img2img", "--height", "16", "--width", "16",
            "--depth", "2", "--embed", "8", "--iters", "3", "--lr", "0.05", "--seed", "5",
        ]
        run(args + ["--out-dir", str(tmp_path / "a")])
        run(args + ["--out-dir", str(tmp_path / "b")])
        for target in ("img", "noise", "img_plus_noise"):
            assert (tmp_path / "a" / f"img2img_{target}.dat").read_text() == (
                tmp_path / "b" / f"img2img_{target}.dat"
            ).read_text()


class TestCsPipeline:
    def test_cs_train_and_eval(self, tmp_path):
        code = run(
            [
                "cs-train",
                "--arch",
                "img2img",
                "--synthetic",
                "8",
                "--height",
                "16",
                "--width",
                "16",
                "--depth",
                "2",
                "--embed",
                "8",
                "--accel",
                "4",
                "--epochs",
                "1",
                "--batch",
                "4",
                "--holdout",
                "2",
                "--out-dir",
                str(tmp_path / "cs"),
            ]
        )
        assert code == 0
        for name in ("model.ckpt", "model.cfg", "operator.op", "metrics.csv", "run.meta"):
            assert (tmp_path / "cs" / name).exists()
        code = run(
            [
                "cs-eval",
                "--checkpoint",
                str(tmp_path / "cs" / "model.ckpt"),
                "--operator",
                str(tmp_path / "cs" / "operator.op"),
                "--synthetic",
                "2",
                "--csv",
                str(tmp_path / "cs" / "eval.csv"),
            ]
        )
        assert code == 0
        lines = (tmp_path / "cs" / "eval.csv").read_text().strip().splitlines()
        assert lines[0] == "index,coarse_ssim,refined_ssim,refined_psnr_db"
        assert len(lines) == 3

    def test_cs_train_deterministic(self, tmp_path):
        args = [
            "cs-train", "--arch", "img2img", "--synthetic", "6", "--height", "16",
            "--width", "16", "--depth", "2", "--embed", "8", "--epochs", "1",
            "--batch", "3", "--seed", "2",
        ]
        run(args + ["--out-dir", str(tmp_path / "a")])
        run(args + ["--out-dir", str(tmp_path / "b")])
        assert (tmp_path / "a" / "model.ckpt").read_bytes() == (
            tmp_path / "b" / "model.ckpt"
        ).read_bytes()


class TestGradCheckCommand:
    def test_passes_at_default_tolerance(self):
        assert run(["grad-check", "--arch", "linear", "--seeds", "1", "--coords", "4"]) == 0

    def test_fails_with_exit_3_at_absurd_tolerance(self):
        assert (
            run(["grad-check", "--arch", "linear", "--seeds", "1", "--coords", "4", "--tol", "1e-18"])
            == 3
        )


class TestBench:
    def test_bench_table_and_csv(self, tmp_path, capsys):
        code = run(
            [
                "bench",
                "--archs",
                "img2img,original",
                "--batches",
                "1,2",
                "--repeats",
                "3",
                "--height",
                "16",
                "--width",
                "16",
                "--out-dir",
                str(tmp_path / "bench"),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "img2img" in out and "original" in out and "best batch" in out
        lines = (tmp_path / "bench" / "bench.csv").read_text().strip().splitlines()
        assert lines[0] == "arch,batch,images_per_sec,cv"
        assert len(lines) == 5
