import math

import numpy as np
import pytest

from longremix import nn
from conftest import fd_gradient, flatten_grads, max_rel_err, random_net, random_soft_labels


def one_hot(idx, c):
    y = np.zeros(c)
    y[idx] = 1.0
    return y


class TestForward:
    def test_zero_weight_net_is_uniform(self):
        net = nn.Network([np.zeros((3, 4))], [np.zeros(4)])
        p = nn.forward(net, np.array([1.0, -2.0, 0.5]))
        np.testing.assert_allclose(p, np.full(4, 0.25), atol=1e-12)

    def test_large_margin_favors_class(self):
        # logits (6, 0) for x = (1, 0): p0 = 1/(1+e^-6), hand-computed
        net = nn.Network([np.array([[6.0, 0.0], [0.0, 0.0]])], [np.zeros(2)])
        p = nn.forward(net, np.array([1.0, 0.0]))
        assert p[0] > 0.99
        assert p[0] == pytest.approx(1.0 / (1.0 + math.exp(-6.0)), abs=1e-12)

    def test_output_normalized(self, rng):
        for _ in range(20):
            net = random_net(rng)
            x = rng.normal(size=(7, net.input_dim))
            p = nn.forward(net, x)
            assert (p >= 0).all()
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_dimension_mismatch(self):
        net = nn.init_network([3, 4, 2], seed=0)
        with pytest.raises(ValueError, match="width"):
            nn.forward(net, np.zeros(5))

    def test_deterministic(self):
        net = nn.init_network([2, 8, 3], seed=5)
        x = np.array([0.3, -1.2])
        np.testing.assert_array_equal(nn.forward(net, x), nn.forward(net, x))

    def test_layer_shape_composition_enforced(self):
        with pytest.raises(ValueError, match="width"):
            nn.Network([np.zeros((2, 3)), np.zeros((4, 2))], [np.zeros(3), np.zeros(2)])


class TestLosses:
    def test_ce_exact_hit_is_zero(self):
        y = one_hot(1, 3)
        assert nn.cross_entropy(y, y) == pytest.approx(0.0, abs=1e-12)

    def test_ce_uniform_ten_classes(self):
        p = np.full(10, 0.1)
        assert nn.cross_entropy(p, one_hot(4, 10)) == pytest.approx(math.log(10), abs=1e-12)

    def test_ce_hand_value(self):
        # -ln 0.7 = 0.35667494393873245
        assert nn.cross_entropy(np.array([0.7, 0.3]), np.array([1.0, 0.0])) == pytest.approx(
            0.356675, abs=1e-6)

    def test_ce_clamps_zero_probability(self):
        val = nn.cross_entropy(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        assert np.isfinite(val)
        assert val == pytest.approx(-math.log(1e-12))

    def test_se_identity_zero(self):
        p = np.array([0.2, 0.8])
        assert nn.squared_error(p, p) == 0.0

    def test_se_disjoint_onehots(self):
        assert nn.squared_error(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(2.0)

    def test_se_hand_value(self):
        assert nn.squared_error(np.array([0.6, 0.4]), np.array([0.5, 0.5])) == pytest.approx(0.02)

    def test_rowwise_variants(self):
        p = np.array([[0.7, 0.3], [0.5, 0.5]])
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        ce = nn.cross_entropy(p, y)
        assert ce.shape == (2,)
        assert ce[0] == pytest.approx(-math.log(0.7))


class TestBackward:
    def test_zero_gradient_at_exact_fit(self):
        # squared error is minimized when the output equals the target
        net = nn.Network([np.zeros((2, 3))], [np.zeros(3)])
        x = np.array([[0.5, -0.5], [1.0, 2.0]])
        y = np.full((2, 3), 1.0 / 3.0)
        grads = nn.backward(net, (x, y), "squared_error")
        for g in grads.d_weights + grads.d_biases:
            np.testing.assert_allclose(g, 0.0, atol=1e-15)

    @pytest.mark.parametrize("loss", ["cross_entropy", "squared_error"])
    def test_matches_finite_differences(self, loss, rng):
        for _ in range(10):
            net = random_net(rng)
            x = rng.normal(size=(5, net.input_dim))
            y = random_soft_labels(rng, 5, net.output_dim)
            batch = (x, y)
            got = flatten_grads(nn.backward(net, batch, loss))
            want = fd_gradient(net, batch, loss)
            assert max_rel_err(got, want) < 1e-5

    def test_total_loss_matches_finite_differences(self, rng):
        for lam_u, lam_reg in [(25.0, 1.0), (0.0, 1.0), (25.0, 0.0), (3.5, 0.7)]:
            net = random_net(rng)
            xf = rng.normal(size=(4, net.input_dim))
            xt = random_soft_labels(rng, 4, net.output_dim)
            uf = rng.normal(size=(6, net.input_dim))
            ut = random_soft_labels(rng, 6, net.output_dim)
            batch = ((xf, xt), (uf, ut))
            spec = nn.TotalLoss(lambda_u=lam_u, lambda_reg=lam_reg)
            got = flatten_grads(nn.backward(net, batch, spec))
            want = fd_gradient(net, batch, spec)
            assert max_rel_err(got, want) < 1e-5

    def test_total_loss_empty_unlabelled(self, rng):
        net = random_net(rng)
        xf = rng.normal(size=(4, net.input_dim))
        xt = random_soft_labels(rng, 4, net.output_dim)
        batch = ((xf, xt), (np.empty((0, net.input_dim)), np.empty((0, net.output_dim))))
        spec = nn.TotalLoss(lambda_u=25.0, lambda_reg=1.0)
        got = flatten_grads(nn.backward(net, batch, spec))
        want = fd_gradient(net, batch, spec)
        assert max_rel_err(got, want) < 1e-5

    def test_duplicated_batch_same_gradient(self, rng):
        net = random_net(rng)
        x = rng.normal(size=(3, net.input_dim))
        y = random_soft_labels(rng, 3, net.output_dim)
        g1 = flatten_grads(nn.backward(net, (x, y), "cross_entropy"))
        g2 = flatten_grads(nn.backward(net, (np.vstack([x, x]), np.vstack([y, y])), "cross_entropy"))
        np.testing.assert_allclose(g1, g2, atol=1e-12)

    def test_unknown_loss_rejected(self, rng):
        net = random_net(rng)
        with pytest.raises(ValueError, match="loss"):
            nn.backward(net, (np.zeros((1, net.input_dim)), np.zeros((1, net.output_dim))), "huber")


class TestSgdStep:
    def _scalar_net(self, w0):
        return nn.Network([np.array([[w0]])], [np.zeros(1)])

    def _grad(self, g):
        return nn.Gradients([np.array([[g]])], [np.zeros(1)])

    def test_zero_gradient_no_change(self):
        net = self._scalar_net(1.5)
        state = nn.init_optimizer(net, lr=0.1, momentum=0.9, weight_decay=0.0)
        nn.sgd_step(net, self._grad(0.0), state)
        assert net.weights[0][0, 0] == 1.5

    def test_plain_step(self):
        net = self._scalar_net(1.0)
        state = nn.init_optimizer(net, lr=0.1, momentum=0.0, weight_decay=0.0)
        nn.sgd_step(net, self._grad(1.0), state)
        assert net.weights[0][0, 0] == pytest.approx(0.9)

    def test_two_momentum_steps(self):
        # buffers: 1 then 1.8; steps: -0.1 then -0.18 -> w2 = -0.28
        net = self._scalar_net(0.0)
        state = nn.init_optimizer(net, lr=0.1, momentum=0.8, weight_decay=0.0)
        nn.sgd_step(net, self._grad(1.0), state)
        nn.sgd_step(net, self._grad(1.0), state)
        assert net.weights[0][0, 0] == pytest.approx(-0.28)

    def test_weight_decay_pulls_to_zero(self):
        net = self._scalar_net(1.0)
        state = nn.init_optimizer(net, lr=0.1, momentum=0.0, weight_decay=0.5)
        nn.sgd_step(net, self._grad(0.0), state)
        assert net.weights[0][0, 0] == pytest.approx(1.0 - 0.1 * 0.5)

    def test_momentum_buffer_shapes(self):
        net = nn.init_network([3, 5, 2], seed=1)
        state = nn.init_optimizer(net, lr=0.1)
        for v, w in zip(state.velocity_w, net.weights):
            assert v.shape == w.shape
        for v, b in zip(state.velocity_b, net.biases):
            assert v.shape == b.shape


class TestCheckpoint:
    def test_round_trip(self, tmp_path, rng):
        net = random_net(rng)
        net.tag = "model2"
        path = tmp_path / "net.ckpt"
        nn.save_checkpoint(net, path)
        back = nn.load_checkpoint(path)
        assert back.tag == "model2"
        assert back.layer_sizes == net.layer_sizes
        for a, b in zip(net.weights, back.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(net.biases, back.biases):
            np.testing.assert_array_equal(a, b)

    def test_version_field_checked(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_text("longremix-checkpoint 99\ntag x\nsizes 1 1\n")
        with pytest.raises(nn.ParseError, match="version"):
            nn.load_checkpoint(path)

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("hello world\n")
        with pytest.raises(nn.ParseError):
            nn.load_checkpoint(path)


def test_seeded_init_is_reproducible():
    a = nn.init_network([4, 8, 3], seed=42)
    b = nn.init_network([4, 8, 3], seed=42)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    c = nn.init_network([4, 8, 3], seed=43)
    assert any((wa != wc).any() for wa, wc in zip(a.weights, c.weights))
