import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jointmatch.thresholds import (LearningStatus, fixed_thresholds, local_thresholds,
                                   update_status)

positive_vectors = arrays(np.float64, st.integers(2, 10),
                          elements=st.floats(1e-6, 1.0, allow_nan=False))


def _simplex(v):
    v = np.asarray(v, dtype=np.float64)
    return v / v.sum()


class TestUpdateStatus:
    def test_hand_example(self):
        # 0.9 * 0.25 + 0.1 * 0.4 = 0.265 ; 0.9 * 0.25 + 0.1 * 0.2 = 0.245
        s = update_status(LearningStatus.initial(4), [[0.4, 0.2, 0.2, 0.2]], 0.9)
        np.testing.assert_allclose(s.p_tilde, [0.265, 0.245, 0.245, 0.245], rtol=0, atol=1e-12)
        assert s.t == 1

    def test_batch_mean_used(self):
        preds = [[0.7, 0.1, 0.1, 0.1], [0.1, 0.3, 0.3, 0.3]]
        s = update_status(LearningStatus.initial(4), preds, 0.9)
        np.testing.assert_allclose(s.p_tilde, [0.265, 0.245, 0.245, 0.245], rtol=0, atol=1e-12)

    def test_lambda_zero_is_batch_mean(self):
        preds = np.array([[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]])
        s = update_status(LearningStatus.initial(3), preds, 0.0)
        np.testing.assert_array_equal(s.p_tilde, preds.mean(axis=0))

    def test_uniform_fixed_point(self):
        s = LearningStatus.initial(5)
        for _ in range(200):
            s = update_status(s, np.full((7, 5), 0.2), 0.9)
        np.testing.assert_allclose(s.p_tilde, 0.2, atol=1e-15)

    @pytest.mark.parametrize("lam", [1.0, -0.1, 1.5])
    def test_lambda_out_of_range(self, lam):
        with pytest.raises(ValueError):
            update_status(LearningStatus.initial(3), [[1.0, 0.0, 0.0]], lam)

    def test_empty_batch_skips(self, caplog):
        s = LearningStatus.initial(3)
        with caplog.at_level(logging.INFO, logger="jointmatch.thresholds"):
            out = update_status(s, np.zeros((0, 3)), 0.9)
        assert out is s
        assert "skipped" in caplog.text

    def test_class_mismatch(self):
        with pytest.raises(ValueError):
            update_status(LearningStatus.initial(3), [[0.5, 0.5]], 0.9)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 12), st.floats(0.0, 0.999), st.integers(0, 2**32 - 1))
    def test_simplex_preserved(self, C, n, lam, seed):
        rng = np.random.default_rng(seed)
        s = LearningStatus(rng.dirichlet(np.ones(C)))
        preds = rng.dirichlet(np.ones(C), size=n)
        out = update_status(s, preds, lam)
        assert np.all(out.p_tilde >= 0) and np.all(out.p_tilde <= 1)
        assert abs(out.p_tilde.sum() - 1) < 1e-6


class TestLocalThresholds:
    def test_uniform(self):
        th = local_thresholds(LearningStatus.initial(4), 0.98)
        np.testing.assert_array_equal(th.tau_local, [0.98] * 4)

    def test_hand_example(self):
        th = local_thresholds(LearningStatus(np.array([0.4, 0.2, 0.2, 0.2])), 0.98)
        np.testing.assert_allclose(th.tau_local, [0.98, 0.49, 0.49, 0.49], rtol=0, atol=1e-12)

    def test_after_ema_example(self):
        # 0.245 / 0.265 * 0.98
        th = local_thresholds(LearningStatus(np.array([0.265, 0.245, 0.245, 0.245])), 0.98)
        np.testing.assert_allclose(th.tau_local, [0.98] + [0.9060377358490566] * 3,
                                   rtol=0, atol=1e-12)

    @pytest.mark.parametrize("tau", [0.0, 1.01, -0.5])
    def test_tau_out_of_range(self, tau):
        with pytest.raises(ValueError):
            local_thresholds(LearningStatus.initial(3), tau)

    @settings(max_examples=300, deadline=None)
    @given(positive_vectors, st.floats(0.01, 1.0))
    def test_max_is_tau_exactly(self, v, tau):
        th = local_thresholds(LearningStatus(_simplex(v)), tau)
        assert th.tau_local.max() == tau
        assert np.all(th.tau_local > 0) and np.all(th.tau_local <= tau)

    @settings(max_examples=300, deadline=None)
    @given(positive_vectors, st.floats(0.01, 1.0))
    def test_monotone(self, v, tau):
        p = _simplex(v)
        th = local_thresholds(LearningStatus(p), tau).tau_local
        order = np.argsort(p, kind="stable")
        assert np.all(np.diff(th[order]) >= 0)

    @settings(max_examples=200, deadline=None)
    @given(positive_vectors, st.floats(1e-3, 1e3))
    def test_scale_invariant(self, v, k):
        p = _simplex(v)
        a = local_thresholds(LearningStatus(p), 0.9).tau_local
        b = local_thresholds(LearningStatus(p * k), 0.9).tau_local
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_decreasing_status_never_raises_threshold(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            p = rng.dirichlet(np.ones(5))
            c = int(rng.integers(5))
            q = p.copy()
            q[c] *= rng.uniform(0.1, 1.0)
            before = local_thresholds(LearningStatus(p), 0.95).tau_local[c]
            after = local_thresholds(LearningStatus(q), 0.95).tau_local[c]
            assert after <= before


class TestFixedThresholds:
    def test_default(self):
        np.testing.assert_array_equal(fixed_thresholds(4, 0.98).tau_local, [0.98] * 4)

    def test_one(self):
        np.testing.assert_array_equal(fixed_thresholds(2, 1.0).tau_local, [1.0, 1.0])

    def test_equals_uniform_local(self):
        np.testing.assert_array_equal(fixed_thresholds(6, 0.7).tau_local,
                                      local_thresholds(LearningStatus.initial(6), 0.7).tau_local)
