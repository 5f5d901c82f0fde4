import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nmprel import diffcore as D
from nmprel.diffcore import tensor as T


class TestElu:
    def test_values(self):
        assert D.elu(0.0) == 0.0
        assert D.elu(2.5) == 2.5
        assert D.elu(-20.0) == pytest.approx(-1.0, abs=1e-8)

    def test_vector(self):
        np.testing.assert_allclose(D.elu(np.array([-1.0, 0.0, 1.0])), [math.exp(-1) - 1, 0.0, 1.0])


class TestSoftmax:
    def test_examples(self):
        np.testing.assert_allclose(D.softmax([0.0, 0.0]), [0.5, 0.5])
        np.testing.assert_allclose(D.softmax([7.0] * 5), [0.2] * 5, atol=1e-15)
        p = D.softmax([1000.0, 0.0])
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0) and p[1] == pytest.approx(0.0, abs=1e-300)

    @given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e3, 1e3)))
    def test_sums_to_one(self, z):
        p = D.softmax(z)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p >= 0)


class TestCrossEntropy:
    @pytest.mark.parametrize("K", [2, 5, 70])
    def test_uniform(self, K):
        assert D.cross_entropy(np.full(K, 1.0 / K), 0) == pytest.approx(math.log(K), rel=1e-10)

    def test_certain(self):
        assert D.cross_entropy(np.array([0.0, 1.0]), 1) == pytest.approx(0.0, abs=1e-11)

    def test_example(self):
        assert D.cross_entropy(np.array([0.25, 0.75]), 1) == pytest.approx(-math.log(0.75), abs=1e-11)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            D.cross_entropy(np.array([0.5, 0.5]), 2)


def _mlp_params(rng, d_in, d_hid, d_out, prefix="m"):
    return {
        f"{prefix}.W1": rng.normal(size=(d_hid, d_in)),
        f"{prefix}.b1": rng.normal(size=(1, d_hid)),
        f"{prefix}.W2": rng.normal(size=(d_out, d_hid)),
        f"{prefix}.b2": rng.normal(size=(1, d_out)),
    }


def _loop_mlp(p, x):
    """Matrix products written out as loops."""
    W1, b1, W2, b2 = p["m.W1"], p["m.b1"][0], p["m.W2"], p["m.b2"][0]
    h = []
    for r in range(W1.shape[0]):
        z = b1[r] + sum(W1[r, c] * x[c] for c in range(len(x)))
        h.append(z if z > 0 else math.exp(z) - 1)
    return [b2[r] + sum(W2[r, c] * h[c] for c in range(len(h))) for r in range(W2.shape[0])]


class TestMlp2:
    def test_zero_weights(self):
        p = {k: np.zeros_like(v) for k, v in _mlp_params(np.random.default_rng(0), 3, 4, 2).items()}
        np.testing.assert_array_equal(D.mlp2_forward(p, "m", [1.0, -2.0, 3.0]), np.zeros(2))

    def test_identity(self):
        p = {"m.W1": np.eye(3), "m.b1": np.zeros((1, 3)), "m.W2": np.eye(3), "m.b2": np.zeros((1, 3))}
        np.testing.assert_array_equal(D.mlp2_forward(p, "m", [0.5, 1.0, 2.0]), [0.5, 1.0, 2.0])

    def test_matches_loop_oracle(self, rng):
        p = _mlp_params(rng, 3, 4, 2)
        for _ in range(10):
            x = rng.normal(size=3)
            np.testing.assert_allclose(D.mlp2_forward(p, "m", x), _loop_mlp(p, x), atol=1e-12)
            tape = D.mlp2({k: D.parameter(v) for k, v in p.items()}, "m", x[None, :]).data[0]
            np.testing.assert_allclose(tape, _loop_mlp(p, x), atol=1e-12)

    def test_dimension_mismatch(self, rng):
        p = _mlp_params(rng, 3, 4, 2)
        with pytest.raises(ValueError):
            D.mlp2_forward(p, "m", np.ones(4))
        with pytest.raises(ValueError):
            D.mlp2(p, "m", np.ones((1, 4)))


class TestBackward:
    def test_requires_forward(self):
        with pytest.raises(D.BackwardError):
            D.backward(None)
        with pytest.raises(D.BackwardError):
            D.backward(D.parameter(np.ones((2, 2))))

    def test_constant_loss_gives_zero_grads(self):
        W = D.parameter(np.ones((2, 3)))
        loss = T.square_error(D.Tensor(np.ones((1, 2))), np.zeros((1, 2)))
        D.backward(loss)
        assert W.grad is None or not W.grad.any()

    def test_linear_closed_form(self, rng):
        W = rng.normal(size=(3, 4))
        x = rng.normal(size=4)
        t = rng.normal(size=3)
        Wt = D.parameter(W)
        D.backward(T.square_error(T.linear(x[None, :], Wt), t[None, :]))
        np.testing.assert_allclose(Wt.grad, 2 * np.outer(W @ x - t, x), atol=1e-10)

    def test_shared_parameter_accumulates(self, rng):
        W = rng.normal(size=(2, 2))
        x = rng.normal(size=(1, 2))
        Wt = D.parameter(W)
        D.backward(T.square_error(T.linear(T.linear(x, Wt), Wt), np.zeros((1, 2))))
        err = D.grad_check(lambda p: T.square_error(T.linear(T.linear(x, p["W"]), p["W"]), np.zeros((1, 2))),
                           {"W": W})
        assert err < 1e-7

    def test_deterministic(self, rng):
        p = _mlp_params(rng, 3, 5, 2)
        x = rng.normal(size=(4, 3))
        grads = []
        for _ in range(2):
            ps = {k: D.parameter(v) for k, v in p.items()}
            D.backward(T.mean_softmax_cross_entropy(D.mlp2(ps, "m", x), [0, 1, 1, 0]))
            grads.append({k: t.grad.copy() for k, t in ps.items()})
        for k in p:
            np.testing.assert_array_equal(grads[0][k], grads[1][k])

    def test_segment_mean_and_gather(self, rng):
        x = rng.normal(size=(5, 3))
        groups = np.array([1, 1, 3, 3, 3])
        counts = np.bincount(groups, minlength=4)

        m = T.segment_mean(x, groups, counts).data
        np.testing.assert_allclose(m[1], x[:2].mean(axis=0))
        np.testing.assert_allclose(m[3], x[2:].mean(axis=0))
        assert not m[0].any() and not m[2].any()

        def loss(p):
            g = T.gather_rows(p["x"], [0, 2, 2, 4])
            mean = T.gather_rows(T.segment_mean(p["x"], groups, counts), [0, 1, 3, 3])
            return T.mean_softmax_cross_entropy(T.concat(mean, g), [0, 3, 5, 1])

        assert D.grad_check(loss, {"x": x}) < 1e-7


class TestRmsprop:
    def test_zero_gradient(self):
        p = {"w": np.array([[1.0, -2.0]])}
        st_ = D.RmspropState.for_params(p)
        st_.acc["w"][:] = 4.0
        D.rmsprop_step(p, {"w": np.zeros((1, 2))}, st_)
        np.testing.assert_array_equal(p["w"], [[1.0, -2.0]])
        np.testing.assert_allclose(st_.acc["w"], 3.6)

    def test_first_step(self):
        p = {"w": np.zeros((1, 1))}
        st_ = D.RmspropState.for_params(p)
        D.rmsprop_step(p, {"w": np.ones((1, 1))}, st_)
        assert st_.learning_rate == 0.0005
        assert -p["w"][0, 0] == pytest.approx(0.0005 / math.sqrt(0.1 + 1e-8), rel=1e-14)

    def test_shrinking_updates(self):
        p = {"w": np.zeros((1, 1))}
        st_ = D.RmspropState.for_params(p)
        steps = []
        for _ in range(5):
            before = p["w"][0, 0]
            D.rmsprop_step(p, {"w": np.ones((1, 1))}, st_)
            steps.append(before - p["w"][0, 0])
        assert all(a > b for a, b in zip(steps, steps[1:]))

    def test_shape_mismatch(self):
        p = {"w": np.zeros((2, 2))}
        with pytest.raises(ValueError):
            D.rmsprop_step(p, {"w": np.zeros((1, 2))}, D.RmspropState.for_params(p))

    @given(arrays(np.float64, (3, 2), elements=st.floats(-1e6, 1e6)))
    def test_stays_finite(self, g):
        p = {"w": np.ones((3, 2))}
        st_ = D.RmspropState.for_params(p)
        for _ in range(3):
            D.rmsprop_step(p, {"w": g}, st_)
        assert np.all(np.isfinite(p["w"])) and np.all(st_.acc["w"] >= 0)


class TestGradCheck:
    def test_linear_regression(self, rng):
        X = rng.normal(size=(8, 3))
        y = rng.normal(size=(8, 1))
        err = D.grad_check(lambda p: T.square_error(T.linear(X, p["W"], p["b"]), y),
                           {"W": rng.normal(size=(1, 3)), "b": rng.normal(size=(1, 1))})
        assert err < 1e-7

    def test_mlp2_away_from_kink(self, rng):
        p = _mlp_params(rng, 3, 4, 2)
        X = rng.normal(size=(6, 3))
        pre = X @ p["m.W1"].T + p["m.b1"]
        X = X[np.all(np.abs(pre) > 0.1, axis=1)]
        assert len(X) > 0
        err = D.grad_check(lambda q: T.mean_softmax_cross_entropy(D.mlp2(q, "m", X), [0] * len(X)), p)
        assert err < 1e-5

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            D.grad_check(lambda p: p["w"], {"w": np.zeros((1, 1))}, step=0.0)


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path, rng):
        params = {"a": rng.normal(size=(3, 4)), "b": np.array([[1 / 3, -0.0, 1e-300, 123456789.123456789]])}
        path = tmp_path / "c.json"
        D.save_checkpoint(params, path, {"note": "x"})
        loaded, cfg = D.load_checkpoint(path)
        assert cfg == {"note": "x"}
        for k in params:
            np.testing.assert_array_equal(loaded[k], params[k])

    def test_corrupted(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"format": 1, "params": {"a": {"rows": 2')
        with pytest.raises(D.CheckpointError):
            D.load_checkpoint(path)
        path.write_text('{"format": 1, "params": {"a": {"rows": 2, "cols": 2, "data": [1, 2, 3]}}}')
        with pytest.raises(D.CheckpointError):
            D.load_checkpoint(path)

    def test_version(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"format": 2, "params": {}}')
        with pytest.raises(D.CheckpointVersionError):
            D.load_checkpoint(path)
