import numpy as np
import numpy.testing as npt
import pytest

from imgmixer.models import Model, ModelConfig
from imgmixer.params import ModelParams
from imgmixer.serialize import (
    load_checkpoint,
    load_tensor,
    save_checkpoint,
    save_tensor,
)
from imgmixer.tensor import Tensor


class TestTensorRecords:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_round_trip(self, tmp_path, dtype):
        arr = np.random.default_rng(0).normal(size=(3, 4, 5)).astype(dtype)
        save_tensor(tmp_path / "t.imxt", arr)
        back = load_tensor(tmp_path / "t.imxt")
        assert back.dtype == dtype
        npt.assert_array_equal(back, arr)

    def test_scalar_rank_zero(self, tmp_path):
        save_tensor(tmp_path / "s.imxt", np.array(3.25))
        assert load_tensor(tmp_path / "s.imxt") == 3.25

    def test_header_layout(self, tmp_path):
        arr = np.arange(6, dtype=np.float64).reshape(2, 3)
        save_tensor(tmp_path / "t.imxt", arr)
        blob = (tmp_path / "t.imxt").read_bytes()
        assert blob[:4] == b"IMXT"
        assert blob[4] == 1  # version
        assert blob[5] == 1  # f64
        assert blob[6] == 2  # rank
        assert int.from_bytes(blob[7:15], "little") == 2
        assert int.from_bytes(blob[15:23], "little") == 3
        assert len(blob) == 23 + 6 * 8

    def test_bad_magic_rejected(self, tmp_path):
        (tmp_path / "bad.imxt").write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(ValueError, match="magic"):
            load_tensor(tmp_path / "bad.imxt")

    def test_unsupported_dtype_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="dtype"):
            save_tensor(tmp_path / "t.imxt", np.arange(4, dtype=np.int32))


class TestCheckpoints:
    def test_round_trip_preserves_order_and_values(self, tmp_path):
        rng = np.random.default_rng(1)
        params = ModelParams(
            {
                "embed.w": Tensor(rng.normal(size=(4, 8)), requires_grad=True),
                "block00.hmix.w1": Tensor(rng.normal(size=(2, 4)), requires_grad=True),
                "combine.b": Tensor(rng.normal(size=(3,)), requires_grad=True),
            }
        )
        save_checkpoint(tmp_path / "m.ckpt", params)
        loaded = load_checkpoint(tmp_path / "m.ckpt")
        assert loaded.names() == params.names()
        for name in params.names():
            npt.assert_array_equal(loaded[name].data, params[name].data)
            assert loaded[name].requires_grad

    def test_model_save_load_round_trip(self, tmp_path):
        cfg = ModelConfig("img2img_mixer", 16, 16, 1, patch=4, depth=2, embed=8, factor=2)
        model = Model.build(cfg, seed=4)
        model.save(tmp_path)
        loaded = Model.load(tmp_path / "model.ckpt")
        assert loaded.config == cfg
        for name in model.params.names():
            npt.assert_array_equal(loaded.params[name].data, model.params[name].data)

    def test_save_twice_is_byte_identical(self, tmp_path):
        cfg = ModelConfig("img2img_mixer", 16, 16, 1, patch=4, depth=2, embed=8, factor=2)
        model = Model.build(cfg, seed=5)
        save_checkpoint(tmp_path / "a.ckpt", model.params)
        save_checkpoint(tmp_path / "b.ckpt", model.params)
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
