import mpmath as mp
import numpy as np
import pytest

from jointmatch.classifier import (Classifier, Optimizer, apply_update, from_checkpoint,
                                   init, load_checkpoint, save_checkpoint, to_checkpoint)
from jointmatch.numeric import (InputDomainError, cross_entropy, finite_diff_gradient,
                                relative_error)


def _loss_at(model, X, y, w, denom=None):
    denom = len(y) if denom is None else denom

    def f(theta):
        m = model.copy()
        m.set_flat(theta)
        P = m.predict_proba(X)
        return sum(wi * cross_entropy(t, p) for wi, t, p in zip(w, y, P)) / denom
    return f


def _flat(grads):
    return np.concatenate([g.ravel() for g in grads])


class TestInit:
    def test_deterministic(self):
        a, b = init([5, 4, 3], 7), init([5, 4, 3], 7)
        np.testing.assert_array_equal(a.get_flat(), b.get_flat())

    def test_seeds_differ(self):
        assert not np.array_equal(init([5, 4, 3], 1).get_flat(), init([5, 4, 3], 2).get_flat())

    def test_scale(self):
        m = init([100, 3], 0)
        assert np.abs(m.params[0]).max() <= 0.1

    def test_param_count(self):
        assert init([5, 4, 3], 0).n_params == 5 * 4 + 4 + 4 * 3 + 3

    @pytest.mark.parametrize("sizes", [[0, 3], [4, 1], [4], [4, 0, 3]])
    def test_invalid_sizes(self, sizes):
        with pytest.raises(ValueError):
            init(sizes, 0)

    def test_forward_valid(self):
        m = init([6, 8, 4], 3)
        p = m.forward(np.linspace(-1, 1, 6))
        assert p.shape == (4,) and abs(p.sum() - 1) < 1e-12 and np.all(p >= 0)


class TestForward:
    def test_zero_weights_uniform(self):
        m = Classifier([3, 4], [np.zeros((3, 4)), np.zeros(4)], "identity")
        np.testing.assert_allclose(m.forward([1.0, -2.0, 5.0]), [0.25] * 4)

    def test_hand_computed_tiny_model(self):
        W1 = np.array([[0.5, -0.3], [0.2, 0.8]])
        b1 = np.array([0.1, -0.2])
        W2 = np.array([[1.0, -1.0, 0.5], [0.3, 0.2, -0.7]])
        b2 = np.array([0.0, 0.1, -0.1])
        x = [0.7, -1.2]
        m = Classifier([2, 2, 3], [W1, b1, W2, b2], "tanh")
        mp.mp.dps = 50
        h = [mp.tanh(sum(mp.mpf(x[i]) * mp.mpf(W1[i, j]) for i in range(2)) + mp.mpf(b1[j]))
             for j in range(2)]
        z = [sum(h[i] * mp.mpf(W2[i, k]) for i in range(2)) + mp.mpf(b2[k]) for k in range(3)]
        e = [mp.e ** v for v in z]
        ref = [float(v / sum(e)) for v in e]
        np.testing.assert_allclose(m.forward(x), ref, rtol=1e-13)

    def test_pure(self):
        m = init([4, 5, 3], 1)
        before = m.get_flat().copy()
        a = m.forward(np.ones(4))
        b = m.forward(np.ones(4))
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(before, m.get_flat())

    def test_dimension_mismatch(self):
        with pytest.raises(InputDomainError):
            init([4, 3], 0).forward(np.ones(5))


class TestBackward:
    def test_zero_weights(self):
        m = init([4, 3, 3], 0)
        grads, loss = m.backward(np.ones((2, 4)), [0, 1], [0.0, 0.0])
        assert loss == 0.0
        assert all(np.all(g == 0) for g in grads)

    @pytest.mark.parametrize("hidden", [[], [5], [4, 3]])
    def test_single_sample_matches_fd(self, hidden):
        rng = np.random.default_rng(len(hidden))
        m = init([6, *hidden, 4], rng)
        X = rng.normal(size=(1, 6))
        grads, _ = m.backward(X, [2], [1.0])
        num = finite_diff_gradient(_loss_at(m, X, [2], [1.0]), m.get_flat())
        assert relative_error(_flat(grads), num) < 1e-4

    def test_random_tiny_models(self):
        rng = np.random.default_rng(0)
        for trial in range(25):
            d, h, C, n = rng.integers(1, 9), rng.integers(1, 9), rng.integers(2, 6), rng.integers(1, 5)
            hidden = [] if trial % 3 == 0 else [int(h)]
            m = init([d, *hidden, C], rng, activation="tanh" if trial % 2 else "identity")
            X = rng.normal(size=(n, d))
            y = rng.integers(0, C, size=n)
            w = rng.uniform(0, 2, size=n) if trial % 2 else np.ones(n)
            grads, loss = m.backward(X, y, w)
            f = _loss_at(m, X, y, w)
            assert loss == pytest.approx(f(m.get_flat()), rel=1e-10)
            assert relative_error(_flat(grads), finite_diff_gradient(f, m.get_flat())) < 1e-4

    def test_weight_two_equals_duplicate(self):
        rng = np.random.default_rng(5)
        m = init([3, 4, 3], rng)
        X = rng.normal(size=(2, 3))
        g1, l1 = m.backward(X, [0, 2], [2.0, 1.0], denom=3)
        g2, l2 = m.backward(np.vstack([X[:1], X]), [0, 0, 2], [1.0, 1.0, 1.0])
        assert l1 == pytest.approx(l2, rel=1e-14)
        for a, b in zip(g1, g2):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_rejects_negative_weight(self):
        with pytest.raises(InputDomainError):
            init([2, 2], 0).backward(np.ones((1, 2)), [0], [-1.0])


class TestUpdate:
    def test_lr_zero(self):
        m = init([3, 2], 0)
        before = m.get_flat().copy()
        apply_update(m, [np.ones_like(p) for p in m.params], Optimizer("sgd", 0.0))
        np.testing.assert_array_equal(m.get_flat(), before)

    def test_lr_one_grad_theta(self):
        m = init([3, 2], 0)
        apply_update(m, [p.copy() for p in m.params], Optimizer("sgd", 1.0))
        np.testing.assert_array_equal(m.get_flat(), np.zeros(m.n_params))

    def test_exact_gd_step(self):
        m = init([3, 2], 0)
        g = [np.full_like(p, 0.5) for p in m.params]
        expected = m.get_flat() - 0.1 * 0.5
        apply_update(m, g, Optimizer("sgd", 0.1))
        np.testing.assert_array_equal(m.get_flat(), expected)

    def test_adam_zero_grad_unchanged(self):
        m = init([3, 4, 2], 0)
        before = m.get_flat().copy()
        apply_update(m, [np.zeros_like(p) for p in m.params], Optimizer("adam", 0.1))
        np.testing.assert_array_equal(m.get_flat(), before)

    def test_shape_mismatch(self):
        m = init([3, 2], 0)
        with pytest.raises(ValueError):
            apply_update(m, [np.zeros(3), np.zeros(2)], Optimizer("sgd", 0.1))

    def test_descent_on_convex_toy(self):
        rng = np.random.default_rng(2)
        m = init([3, 3], rng, activation="identity")
        X = rng.normal(size=(20, 3))
        y = rng.integers(0, 3, size=20)
        losses = []
        for _ in range(3):
            g, loss = m.backward(X, y)
            losses.append(loss)
            apply_update(m, g, Optimizer("sgd", 0.1))
        assert losses[0] > losses[1] > losses[2]

    def test_supervised_smoke(self):
        rng = np.random.default_rng(4)
        X = np.vstack([rng.normal(-2, 0.5, size=(20, 2)), rng.normal(2, 0.5, size=(20, 2))])
        y = np.repeat([0, 1], 20)
        m = init([2, 8, 2], rng)
        opt = Optimizer("sgd", 0.1)
        for _ in range(500):
            g, loss = m.backward(X, y)
            apply_update(m, g, opt)
        assert m.backward(X, y)[1] < 0.1


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        m = init([5, 7, 3], 9, model_id="G")
        save_checkpoint(m, tmp_path / "m.json")
        back = load_checkpoint(tmp_path / "m.json")
        np.testing.assert_array_equal(back.get_flat(), m.get_flat())
        assert back.layer_sizes == m.layer_sizes and back.model_id == "G"

    def test_version_checked(self):
        obj = to_checkpoint(init([2, 2], 0))
        obj["version"] = 99
        with pytest.raises(ValueError):
            from_checkpoint(obj)
