import numpy as np
import numpy.testing as npt
import pytest

from imgmixer.optim import Adam, Sgd, make_optimizer
from imgmixer.params import ModelParams
from imgmixer.tensor import Tensor


def _params(value, grad=None):
    t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
    if grad is not None:
        t.grad = np.asarray(grad, dtype=np.float64)
    return ModelParams({"w": t})


class TestSgd:
    def test_hand_computed_step(self):
        params = _params([1.0], grad=[0.5])
        Sgd(0.1).step(params)
        npt.assert_allclose(params["w"].data, [0.95], rtol=1e-15)

    def test_zero_gradient_leaves_params_bit_exact(self):
        data = np.random.default_rng(0).normal(size=8)
        params = _params(data.copy(), grad=np.zeros(8))
        Sgd(0.1).step(params)
        npt.assert_array_equal(params["w"].data, data)

    def test_missing_grad_raises_with_name(self):
        params = _params([1.0])
        with pytest.raises(ValueError, match="'w'"):
            Sgd(0.1).step(params)

    def test_step_counter(self):
        params = _params([1.0], grad=[0.0])
        opt = Sgd(0.1)
        for expected in (1, 2, 3):
            opt.step(params)
            assert opt.t == expected


class TestAdam:
    def test_first_step_magnitude_is_lr_regardless_of_scale(self):
        # At t=1 the bias-corrected update is exactly lr * g / (|g| + eps),
        # so its magnitude is ~lr whatever the gradient scale.
        lr, eps = 1e-3, 1e-8
        for g in (1e-6, 1e-2, 10.0, 1e4):
            params = _params([0.0], grad=[g])
            Adam(lr, eps=eps).step(params)
            step = abs(params["w"].data[0])
            expected = lr * g / (abs(g) + eps)
            npt.assert_allclose(step, expected, rtol=1e-9)
            assert abs(step - lr) < 0.02 * lr

    def test_moments_match_parameter_shapes(self):
        rng = np.random.default_rng(1)
        t = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        t.grad = rng.normal(size=(3, 4))
        params = ModelParams({"w": t})
        opt = Adam(1e-3)
        opt.step(params)
        assert opt._m["w"].shape == (3, 4)
        assert opt._v["w"].shape == (3, 4)

    def test_defaults(self):
        opt = Adam(1e-3)
        assert (opt.beta1, opt.beta2, opt.eps) == (0.9, 0.999, 1e-8)

    def test_f32_params_keep_dtype(self):
        t = Tensor(np.ones(4, dtype=np.float32), requires_grad=True)
        t.grad = np.full(4, 0.5, dtype=np.float32)
        params = ModelParams({"w": t})
        Adam(1e-3).step(params)
        assert params["w"].data.dtype == np.float32


def test_make_optimizer_dispatch():
    assert isinstance(make_optimizer("sgd", 0.1), Sgd)
    assert isinstance(make_optimizer("adam", 0.1), Adam)
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 0.1)
