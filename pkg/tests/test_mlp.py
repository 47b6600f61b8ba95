import numpy as np
import pytest

from wasnloc.mlp import AdamConfig, AdamState, Mlp, MlpSpec, adam_step, flatten_grads


def test_single_affine_layer():
    net = Mlp(2, MlpSpec((1,)), [(np.array([[1.0], [1.0]]), np.array([0.0]))])
    out, _ = net.forward(np.array([2.0, 3.0]))
    assert out.tolist() == [5.0]


def test_hidden_relu_clamps():
    layers = [
        (np.array([[1.0], [-1.0]]), np.array([0.0])),
        (np.array([[1.0]]), np.array([0.0])),
    ]
    net = Mlp(2, MlpSpec((1, 1)), layers)
    out, cache = net.forward(np.array([1.0, 2.0]))
    assert cache["preacts"][0].tolist() == [[-1.0]]
    assert out.tolist() == [0.0]


def test_forward_matches_manual_matrix_chain():
    # independent oracle: explicit matrix arithmetic, no shared code path
    rng = np.random.default_rng(3)
    net = Mlp.init_random(7, MlpSpec((11, 9, 4)), rng, dtype=np.float64)
    x = rng.standard_normal(7)
    (w0, b0), (w1, b1), (w2, b2) = net.layers
    h1 = np.maximum(x @ w0 + b0, 0.0)
    h2 = np.maximum(h1 @ w1 + b1, 0.0)
    expected = h2 @ w2 + b2
    out, _ = net.forward(x)
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def test_forward_batched_matches_loop():
    rng = np.random.default_rng(4)
    net = Mlp.init_random(5, MlpSpec((8, 3)), rng, dtype=np.float64)
    batch = rng.standard_normal((6, 5))
    out_batch, _ = net.forward(batch)
    for row, x in zip(out_batch, batch):
        single, _ = net.forward(x)
        np.testing.assert_allclose(row, single, rtol=1e-12)


def test_input_size_mismatch():
    net = Mlp.init_random(5, MlpSpec((3,)), np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.forward(np.zeros(4))


def test_init_bounds_and_zero_bias():
    rng = np.random.default_rng(8)
    net = Mlp.init_random(100, MlpSpec((50, 20)), rng, dtype=np.float64)
    (w0, b0), (w1, b1) = net.layers
    assert np.all(np.abs(w0) <= np.sqrt(6.0 / 100))
    assert np.all(np.abs(w1) <= np.sqrt(6.0 / 50))
    assert not b0.any() and not b1.any()


class TestBackward:
    def test_linear_mae_gradient_sign(self):
        # 1-layer linear net, L = |pred - target|: dL/dW = sign(p - t) * x
        net = Mlp(2, MlpSpec((1,)), [(np.array([[0.5], [0.5]]), np.array([0.0]))])
        x = np.array([2.0, -3.0])
        pred, cache = net.forward(x)
        target = np.array([10.0])
        upstream = np.sign(pred - target)
        grads, _ = net.backward(cache, upstream)
        np.testing.assert_allclose(grads[0][0].ravel(), np.sign(pred - target) * x)

    def test_zero_upstream_zero_grads(self):
        rng = np.random.default_rng(0)
        net = Mlp.init_random(4, MlpSpec((6, 2)), rng)
        out, cache = net.forward(rng.standard_normal(4).astype(np.float32))
        grads, dx = net.backward(cache, np.zeros_like(out))
        assert not dx.any()
        assert all(not dw.any() and not db.any() for dw, db in grads)

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_difference_check(self, seed):
        rng = np.random.default_rng(seed)
        net = Mlp.init_random(6, MlpSpec((9, 5)), rng, dtype=np.float64)
        x = rng.standard_normal(6)
        target = rng.standard_normal(5)

        def loss():
            out, _ = net.forward(x)
            return float(np.mean(np.abs(out - target)))

        out, cache = net.forward(x)
        upstream = np.sign(out - target) / out.size
        grads, _ = net.backward(cache, upstream)

        h = 1e-5
        for p, g in zip(net.parameters(), flatten_grads(grads)):
            flat_p = p.ravel()
            flat_g = g.ravel()
            for idx in range(0, flat_p.size, max(1, flat_p.size // 10)):
                orig = flat_p[idx]
                flat_p[idx] = orig + h
                up = loss()
                flat_p[idx] = orig - h
                down = loss()
                flat_p[idx] = orig
                fd = (up - down) / (2 * h)
                assert abs(fd - flat_g[idx]) <= 1e-4 * max(1.0, abs(fd))


class TestAdam:
    def test_first_step_hand_value(self):
        # g=1: m_hat=1, v_hat=1 -> dw = -lr / (1 + eps)
        p = [np.array([0.0])]
        state = AdamState(p)
        cfg = AdamConfig(lr=5e-4)
        adam_step(state, p, [np.array([1.0])], cfg)
        assert p[0][0] == pytest.approx(-5e-4 / (1.0 + 1e-8), rel=1e-12)

    def test_zero_gradient_no_change(self):
        p = [np.full(3, 7.0)]
        state = AdamState(p)
        for _ in range(5):
            adam_step(state, p, [np.zeros(3)], AdamConfig())
        assert np.array_equal(p[0], np.full(3, 7.0))

    def test_equal_gradients_equal_updates(self):
        p = [np.array([1.0, 1.0])]
        state = AdamState(p)
        adam_step(state, p, [np.array([0.3, 0.3])], AdamConfig())
        assert p[0][0] == p[0][1]

    def test_matches_reference_recurrence(self):
        # independent re-implementation of the update, scalar python
        rng = np.random.default_rng(11)
        p = [np.array([0.2])]
        state = AdamState(p)
        cfg = AdamConfig(lr=1e-3)
        w, m, v = 0.2, 0.0, 0.0
        for t in range(1, 8):
            g = float(rng.standard_normal())
            adam_step(state, p, [np.array([g])], cfg)
            m = cfg.beta1 * m + (1 - cfg.beta1) * g
            v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            m_hat = m / (1 - cfg.beta1**t)
            v_hat = v / (1 - cfg.beta2**t)
            w -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
            assert p[0][0] == pytest.approx(w, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        p = [np.zeros(2)]
        state = AdamState(p)
        with pytest.raises(ValueError):
            adam_step(state, p, [np.zeros(2), np.zeros(2)], AdamConfig())
