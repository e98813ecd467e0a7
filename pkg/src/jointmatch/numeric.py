"""Numerical substrate: softmax, cross-entropy, seeded streams, gradient checks."""

import numpy as np

from . import _backend

PROB_ATOL = 1e-6
CLAMP = 1e-12

# Stable stream names -> spawn-key index.  Never reorder: the index is part
# of the stream identity and changing it changes every seeded run.
STREAMS = {
    "model_f": 0,
    "model_g": 1,
    "data": 2,
    "sampling": 3,
    "labeled_weak": 4,
    "unlabeled_weak": 5,
    "unlabeled_strong": 6,
    "misc": 7,
    "sampling_unlabeled": 8,
}


class InputDomainError(ValueError):
    """Raised for inputs outside an operation's domain (NaN, wrong shape...)."""


def rng_stream(seed, name):
    """Independent PCG64 generator for ``(seed, name)``.

    Streams are derived with ``SeedSequence(seed, spawn_key=(index,))`` so
    each consumer (model-f init, model-g init, data, sampling, augmentation
    channels) owns a generator whose draws never depend on the others.
    """
    if name not in STREAMS:
        raise KeyError(f"unknown rng stream {name!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name],))
    return np.random.Generator(np.random.PCG64(ss))


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2:
        raise InputDomainError("softmax needs a vector of length >= 2")
    if not np.all(np.isfinite(z)):
        raise InputDomainError("softmax input must be finite")
    return _backend.softmax_rows(z[None, :])[0]


def argmax(probs):
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    return int(np.argmax(np.asarray(probs)))


def check_probdist(p, atol=PROB_ATOL):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise InputDomainError("probability vector must have length >= 2")
    if np.any(p < 0.0) or np.any(p > 1.0) or abs(p.sum() - 1.0) > atol:
        raise InputDomainError("not a point on the probability simplex")
    return p


def cross_entropy(target, pred):
    """``-log pred[target]`` with ``pred[target]`` clamped to ``>= 1e-12``."""
    p = np.asarray(pred, dtype=np.float64)
    return float(-np.log(max(p[int(target)], CLAMP)))


def finite_diff_gradient(f, theta, eps=1e-5):
    """Central-difference gradient of scalar ``f`` at ``theta``."""
    if eps <= 0:
        raise InputDomainError("eps must be positive")
    theta = np.array(theta, dtype=np.float64)
    flat = theta.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(theta)
        flat[i] = old - eps
        fm = f(theta)
        flat[i] = old
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad.reshape(theta.shape)


def relative_error(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)
