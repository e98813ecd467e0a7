"""Compiled kernels against the numpy fallback (skipped if not compiled)."""

import numpy as np
import pytest

from jointmatch import _backend, _kernels_py

try:
    compiled, _ = _backend.load("compiled")
except ImportError:
    compiled = None

pytestmark = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def test_backend_selection_env(monkeypatch):
    mod, name = _backend.load("python")
    assert mod is _kernels_py and name == "python"
    monkeypatch.setenv("JOINTMATCH_BACKEND", "python")
    assert _backend.load()[1] == "python"


def test_softmax_rows(rng):
    z = rng.normal(scale=30, size=(40, 7))
    np.testing.assert_allclose(compiled.softmax_rows(z), _kernels_py.softmax_rows(z),
                               rtol=1e-13, atol=1e-300)


def test_xent_backward(rng):
    z = rng.normal(scale=5, size=(33, 5))
    t = rng.integers(0, 5, size=33)
    w = rng.uniform(size=33) * (rng.uniform(size=33) < 0.7)
    a = compiled.xent_backward(z, t, w, 40.0)
    b = _kernels_py.xent_backward(z, t, w, 40.0)
    assert a[0] == pytest.approx(b[0], rel=1e-13)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-16)
    np.testing.assert_allclose(a[2], b[2], rtol=1e-12, atol=1e-300)


def test_select_pseudo_ties_and_boundary():
    p = np.array([[0.5, 0.5, 0.0], [0.1, 0.2, 0.7], [0.0, 0.98, 0.02]])
    th = np.array([0.6, 0.98, 0.7])
    for mod in (compiled, _kernels_py):
        labels, conf, passed = mod.select_pseudo(p, th)
        np.testing.assert_array_equal(labels, [0, 2, 1])
        np.testing.assert_array_equal(passed, [False, True, True])
        np.testing.assert_array_equal(conf, [0.5, 0.7, 0.98])


def test_select_pseudo_random(rng):
    p = _kernels_py.softmax_rows(rng.normal(scale=3, size=(200, 6)))
    th = rng.uniform(0.2, 1.0, size=6)
    for x, y in zip(compiled.select_pseudo(p, th), _kernels_py.select_pseudo(p, th)):
        np.testing.assert_array_equal(x, y)


def test_hashing(rng):
    ids = rng.integers(0, 10**9, size=500)
    np.testing.assert_array_equal(compiled.hash_buckets(ids, 97),
                                  _kernels_py.hash_buckets(ids, 97))
    offsets = np.array([0, 3, 3, 10, 500])
    np.testing.assert_allclose(compiled.hashed_bow(ids, offsets, 64),
                               _kernels_py.hashed_bow(ids, offsets, 64), rtol=1e-14)


def test_augment_tokens_equivalent(rng):
    vocab = 50
    syn = {t: list(rng.choice(vocab, size=rng.integers(0, 4), replace=False))
           for t in range(vocab)}
    sf = np.concatenate([np.asarray(syn[t], dtype=np.int64) for t in range(vocab)])
    so = np.concatenate([[0], np.cumsum([len(syn[t]) for t in range(vocab)])])
    lengths = rng.integers(0, 15, size=30)
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    flat = rng.integers(0, vocab, size=offsets[-1])
    for rates in [(0.3, 0.0, 0, 0.0), (0.5, 0.1, 3, 1.0), (1.0, 1.0, 3, 0.5), (0.0, 0.5, 4, 0.3)]:
        u = rng.random((flat.shape[0], 5))
        a = compiled.augment_tokens(flat, offsets, sf, so, u, *rates)
        b = _kernels_py.augment_tokens(flat, offsets, sf, so, u, *rates)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
