import numpy as np
import numpy.testing as npt
import pytest

from imgmixer.bias import (
    BiasPoint,
    BiasRunSpec,
    best_iteration_psnr,
    default_bias_image,
    run_bias_fit,
    write_curve_dat,
    write_summary_csv,
)
from imgmixer.models import ModelConfig
from imgmixer.rng import substream
from imgmixer.tensor import NumericalError


def _spec(target="img", iterations=5, lr=0.05, size=16):
    cfg = ModelConfig("img2img_mixer", size, size, 1, patch=4, depth=2, embed=8, factor=2)
    clean = default_bias_image(size, size, seed=3)
    noise = substream(0, "noise").normal(0, 0.237, clean.shape)
    return BiasRunSpec(
        cfg, target, clean, noise, lr=lr, iterations=iterations, input_seed=1, init_seed=2
    )


class TestRunBiasFit:
    def test_iteration_zero_entry_is_untrained_model(self):
        result = run_bias_fit(_spec())
        assert result.curve[0].iteration == 0
        # same spec, one-iteration run reproduces the same first entry
        again = run_bias_fit(_spec(iterations=1))
        assert result.curve[0] == again.curve[0]

    def test_curve_length_and_iterations(self):
        result = run_bias_fit(_spec(iterations=7))
        assert [p.iteration for p in result.curve] == list(range(8))

    def test_deterministic_bit_identical_curves(self):
        a = run_bias_fit(_spec(iterations=6))
        b = run_bias_fit(_spec(iterations=6))
        for pa, pb in zip(a.curve, b.curve):
            assert pa == pb

    def test_target_validation(self):
        with pytest.raises(ValueError, match="target"):
            run_bias_fit(_spec(target="edges"))

    def test_shape_validation(self):
        spec = _spec()
        spec.noise = spec.noise[:8]
        with pytest.raises(ValueError, match="shape"):
            run_bias_fit(spec)

    def test_divergence_aborts_with_diagnostic(self):
        with np.errstate(all="ignore"), pytest.raises(NumericalError, match="iteration"):
            run_bias_fit(_spec(lr=1e9, iterations=30))

    def test_overfit_small_image(self):
        # a wide-enough model memorizes the image target
        cfg = ModelConfig("img2img_mixer", 16, 16, 1, patch=4, depth=2, embed=32, factor=2)
        clean = default_bias_image(16, 16, seed=3)
        noise = substream(0, "noise").normal(0, 0.237, clean.shape)
        spec = BiasRunSpec(
            cfg, "img", clean, noise, lr=0.1, iterations=1500, input_seed=1, init_seed=2
        )
        result = run_bias_fit(spec)
        assert result.curve[-1].mse_clean < 1e-3


class TestBestIteration:
    def test_monotone_curve_picks_last(self):
        curve = [BiasPoint(i, 0.0, 0.0, float(i)) for i in range(5)]
        assert best_iteration_psnr(curve) == (4, 4.0)

    def test_tie_break_first(self):
        dbs = [10.0, 20.0, 20.0, 15.0]
        curve = [BiasPoint(i, 0.0, 0.0, db) for i, db in enumerate(dbs)]
        assert best_iteration_psnr(curve) == (1, 20.0)

    def test_empty_curve(self):
        with pytest.raises(ValueError):
            best_iteration_psnr([])


class TestOutputs:
    def test_curve_dat_uses_target_appropriate_mse(self, tmp_path):
        result = run_bias_fit(_spec(target="noise", iterations=3))
        write_curve_dat(tmp_path / "c.dat", result)
        lines = (tmp_path / "c.dat").read_text().strip().splitlines()
        assert len(lines) == 4
        iteration, mse = lines[2].split()
        assert int(iteration) == 2
        assert float(mse) == result.curve[2].mse_noise

    def test_summary_csv(self, tmp_path):
        results = [run_bias_fit(_spec(target=t, iterations=3)) for t in ("img", "noise")]
        write_summary_csv(tmp_path / "s.csv", results, "img2img")
        lines = (tmp_path / "s.csv").read_text().strip().splitlines()
        assert lines[0] == "arch,target,best_iter,best_psnr_db,input_psnr_db"
        assert len(lines) == 3
        assert lines[1].startswith("img2img,img,")
