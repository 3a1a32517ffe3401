import math

import numpy as np
import pytest

from disfluency import nn


def finite_diff(f, x, h=1e-6):
    up, down = f(x + h), f(x - h)
    return (up - down) / (2 * h)


class TestActivations:
    def test_softplus_zero(self):
        assert nn.softplus(nn.Tensor(0.0)).item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_softplus_large_no_overflow(self):
        assert nn.softplus(nn.Tensor(50.0)).item() == pytest.approx(50.0, abs=1e-9)
        assert np.isfinite(nn.softplus(nn.Tensor(1000.0)).item())

    def test_softplus_positive_everywhere(self):
        xs = np.linspace(-40, 40, 401)
        ys = nn.softplus(nn.Tensor(xs)).data
        assert np.all(ys > 0)

    def test_tanh_at_zero(self):
        x = nn.Tensor(0.0)
        y = nn.tanh(x)
        assert y.item() == 0.0
        y.backward()
        assert x.grad == pytest.approx(1.0)


class TestGaussianNll:
    def test_centered_unit_variance(self):
        mu = nn.Tensor(np.array([0.0]))
        var = nn.Tensor(np.array([1.0]))
        nll = nn.gaussian_nll(np.array([0.0]), mu, var)
        assert nll.item() == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-9)

    def test_one_sigma_off(self):
        nll = nn.gaussian_nll(np.array([1.0]), nn.Tensor(np.array([0.0])), nn.Tensor(np.array([1.0])))
        assert nll.item() == pytest.approx(0.5 * math.log(2 * math.pi) + 0.5, abs=1e-9)

    def test_gradient_zero_at_mean(self):
        mu = nn.Tensor(np.array([0.7]))
        var = nn.Tensor(np.array([2.0]))
        nll = nn.gaussian_nll(np.array([0.7]), mu, var)
        nll.backward()
        assert mu.grad[0] == pytest.approx(0.0, abs=1e-12)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            nn.gaussian_nll(np.array([0.0]), nn.Tensor(np.array([0.0])), nn.Tensor(np.array([0.0])))


class TestBasicOpGradients:
    def test_matmul_shape_error_names_operands(self):
        a = nn.Tensor(np.zeros((2, 3)))
        b = nn.Tensor(np.zeros((4, 2)))
        with pytest.raises(ValueError, match="matmul"):
            nn.matmul(a, b)

    @pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
    def test_elementwise_grads(self, op):
        rng = np.random.default_rng(0)
        a_val = rng.normal(size=(3, 2))
        b_val = rng.normal(size=(3, 2)) + 2.0
        fn = getattr(nn, op)

        def loss_at(a_arr):
            return nn.tsum(fn(nn.Tensor(a_arr), nn.Tensor(b_val))).item()

        a = nn.Tensor(a_val)
        out = nn.tsum(fn(a, nn.Tensor(b_val)))
        out.backward()
        for idx in np.ndindex(a_val.shape):
            delta = np.zeros_like(a_val)
            delta[idx] = 1e-6
            numeric = (loss_at(a_val + delta) - loss_at(a_val - delta)) / 2e-6
            assert a.grad[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8)

    def test_broadcast_bias_add(self):
        x = nn.Tensor(np.ones((4, 3)))
        b = nn.Tensor(np.zeros(3))
        out = nn.tsum(nn.add(x, b))
        out.backward()
        assert np.allclose(b.grad, np.full(3, 4.0))

    def test_rows_scatter(self):
        table = nn.Tensor(np.arange(12.0).reshape(4, 3))
        out = nn.tsum(nn.rows(table, [1, 1, 3]))
        out.backward()
        expected = np.zeros((4, 3))
        expected[1] = 2.0
        expected[3] = 1.0
        assert np.array_equal(table.grad, expected)

    def test_concat_and_cols_roundtrip(self):
        a = nn.Tensor(np.random.default_rng(1).normal(size=(2, 3)))
        b = nn.Tensor(np.random.default_rng(2).normal(size=(2, 2)))
        joined = nn.concat([a, b], axis=1)
        back = nn.cols(joined, 3, 5)
        nn.tsum(nn.mul(back, back)).backward()
        assert a.grad is not None and np.allclose(a.grad, 0.0)
        assert np.allclose(b.grad, 2 * b.data)


class TestLstm:
    def test_lstm_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        store = nn.ParameterStore()
        nn.add_lstm(store, rng, "enc", d_in=3, hidden=4)
        x_const = rng.normal(size=(5, 3))
        target = rng.normal(size=(5, 8))

        def loss_fn(ts):
            states = nn.bilstm(nn.Tensor(x_const), ts, "enc")
            diff = nn.sub(states, nn.Tensor(target))
            return nn.tsum(nn.mul(diff, diff))

        report = nn.gradient_check(loss_fn, store, tolerance=1e-5)
        assert report.passed, report.summary()

    def test_lstm_input_gradient(self):
        rng = np.random.default_rng(3)
        store = nn.ParameterStore()
        nn.add_lstm(store, rng, "enc", d_in=2, hidden=3)
        x_val = rng.normal(size=(4, 2))

        def loss_of(xa):
            ts = store.tensors()
            return nn.tsum(nn.bilstm(nn.Tensor(xa), ts, "enc")).item()

        ts = store.tensors()
        x = nn.Tensor(x_val)
        nn.tsum(nn.bilstm(x, ts, "enc")).backward()
        for idx in np.ndindex(x_val.shape):
            delta = np.zeros_like(x_val)
            delta[idx] = 1e-6
            numeric = (loss_of(x_val + delta) - loss_of(x_val - delta)) / 2e-6
            assert x.grad[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8)


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        store = nn.ParameterStore()
        store.add("w", np.array([1.0, -2.0]))
        before = store.params["w"].copy()
        store.adam_step({"w": np.zeros(2)}, lr=0.1)
        assert np.array_equal(store.params["w"], before)

    def test_descends_quadratic(self):
        store = nn.ParameterStore()
        store.add("w", np.array([1.0]))
        store.adam_step({"w": np.array([2.0])}, lr=0.1)  # grad of w^2 at w=1
        assert store.params["w"][0] < 1.0

    def test_nonfinite_gradient_names_parameter(self):
        store = nn.ParameterStore()
        store.add("w", np.array([1.0]))
        with pytest.raises(FloatingPointError, match="w"):
            store.adam_step({"w": np.array([np.nan])})

    def test_deterministic_across_runs(self):
        def run():
            rng = np.random.default_rng(11)
            store = nn.ParameterStore()
            store.add("w", rng.normal(size=(3, 3)))
            for _ in range(20):
                ts = store.tensors()
                loss = nn.tsum(nn.mul(ts["w"], ts["w"]))
                loss.backward()
                store.adam_step(nn.grads_of(ts), lr=1e-2)
            return store.params["w"]

        a, b = run(), run()
        assert np.array_equal(a, b)


class TestParameterStore:
    def test_duplicate_name_rejected(self):
        store = nn.ParameterStore()
        store.add("w", np.zeros(2))
        with pytest.raises(ValueError):
            store.add("w", np.zeros(2))

    def test_save_load_roundtrip_is_value_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        store = nn.ParameterStore()
        store.add("a", rng.normal(size=(7, 3)))
        store.add("b.c", rng.normal(size=4))
        path = tmp_path / "model.npz"
        store.save(path, config={"hidden": 4, "note": "x"})
        loaded, config, consts = nn.ParameterStore.load(path)
        assert config == {"hidden": 4, "note": "x"}
        assert consts == {}
        assert set(loaded.params) == {"a", "b.c"}
        for name in store.params:
            assert np.array_equal(loaded.params[name], store.params[name])

    def test_load_rejects_non_model_file(self, tmp_path):
        path = tmp_path / "junk.npz"
        np.savez(path, a=np.zeros(2))
        with pytest.raises(ValueError):
            nn.ParameterStore.load(path)


class TestDropout:
    def test_identity_in_eval_mode(self):
        x = nn.Tensor(np.ones(10))
        out = nn.dropout(x, 0.5, np.random.default_rng(0), train=False)
        assert out is x

    def test_preserves_expectation(self):
        rng = np.random.default_rng(0)
        x = nn.Tensor(np.ones(200_000))
        out = nn.dropout(x, 0.3, rng, train=True)
        assert out.data.mean() == pytest.approx(1.0, abs=0.01)
