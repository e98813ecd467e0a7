"""Small feed-forward softmax classifier with manual backpropagation."""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .numeric import InputDomainError

CHECKPOINT_FORMAT = "jointmatch-classifier"
CHECKPOINT_VERSION = 1

_ACTIVATIONS = ("tanh", "identity")


class Classifier:
    """Dense network ``d_in -> h... -> C`` with a softmax head.

    Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
    shape ``(N, d_in)`` maps to logits ``X @ W + b``.
    """

    def __init__(self, layer_sizes, params, activation="tanh", model_id="F"):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or sizes[0] < 1 or sizes[-1] < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {layer_sizes!r}")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if len(params) != 2 * (len(sizes) - 1):
            raise ValueError("parameter count inconsistent with layer sizes")
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            if params[2 * i].shape != (a, b) or params[2 * i + 1].shape != (b,):
                raise ValueError(f"layer {i} parameter shapes do not match sizes")
        self.layer_sizes = sizes
        self.params = [np.asarray(p, dtype=np.float64) for p in params]
        self.activation = activation
        self.model_id = model_id

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    @property
    def n_params(self):
        return sum(p.size for p in self.params)

    def copy(self):
        return Classifier(self.layer_sizes, [p.copy() for p in self.params],
                          self.activation, self.model_id)

    def get_flat(self):
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.n_params:
            raise ValueError("flat parameter vector has wrong length")
        i = 0
        for p in self.params:
            p[...] = theta[i:i + p.size].reshape(p.shape)
            i += p.size

    def _check_input(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.layer_sizes[0]:
            raise InputDomainError(
                f"expected inputs of width {self.layer_sizes[0]}, got shape {X.shape}")
        return X

    def _forward(self, X):
        acts = [X]
        h = X
        n_layers = len(self.layer_sizes) - 1
        for i in range(n_layers):
            z = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < n_layers - 1 and self.activation == "tanh":
                z = np.tanh(z)
            acts.append(z)
            h = z
        return acts

    def logits(self, X):
        return self._forward(self._check_input(X))[-1]

    def predict_proba(self, X):
        return _backend.softmax_rows(self.logits(X))

    def forward(self, x):
        """Class distribution for a single feature vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise InputDomainError("forward takes a single feature vector")
        if not np.all(np.isfinite(x)):
            raise InputDomainError("input must be finite")
        return self.predict_proba(x[None, :])[0]

    def backward(self, X, targets, weights=None, denom=None):
        """Gradients of ``(1/denom) * sum_b w_b * H(t_b, p(x_b))``.

        ``denom`` defaults to the batch size.  Returns ``(grads, loss)``
        where ``grads`` is aligned with ``self.params``.
        """
        X = self._check_input(X)
        n = X.shape[0]
        if n == 0:
            raise InputDomainError("backward needs a non-empty batch")
        targets = np.asarray(targets, dtype=np.int64)
        weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
        if np.any(weights < 0):
            raise InputDomainError("sample weights must be non-negative")
        denom = float(n if denom is None else denom)
        acts = self._forward(X)
        loss, delta, _ = _backend.xent_backward(acts[-1], targets, weights, denom)
        n_layers = len(self.layer_sizes) - 1
        grads = [None] * len(self.params)
        for i in range(n_layers - 1, -1, -1):
            h_in = acts[i]
            grads[2 * i] = h_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.params[2 * i].T
                if self.activation == "tanh":
                    delta = delta * (1.0 - h_in * h_in)
        return grads, loss


def init(layer_sizes, seed, activation="tanh", model_id="F"):
    """Fresh classifier, weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    ``seed`` is an int or a ``numpy.random.Generator``.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or sizes[0] < 1 or sizes[-1] < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {layer_sizes!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(a)
        params.append(rng.uniform(-bound, bound, size=(a, b)))
        params.append(rng.uniform(-bound, bound, size=b))
    return Classifier(sizes, params, activation, model_id)


@dataclass
class Optimizer:
    """Plain gradient descent (``kind='sgd'``) or Adam (``kind='adam'``).

    With ``weight_decay=0`` a zero gradient leaves parameters unchanged in
    both modes; otherwise decoupled decay shrinks them by ``lr*wd*theta``.
    """

    kind: str = "adam"
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")


def apply_update(model, grads, opt):
    if len(grads) != len(model.params):
        raise ValueError("gradient list does not match parameters")
    for p, g in zip(model.params, grads):
        if p.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
    if opt.weight_decay:
        for p in model.params:
            p -= opt.lr * opt.weight_decay * p
    if opt.kind == "sgd":
        for p, g in zip(model.params, grads):
            p -= opt.lr * g
        return model
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in model.params]
        opt.v = [np.zeros_like(p) for p in model.params]
    opt.t += 1
    c1 = 1.0 - opt.beta1 ** opt.t
    c2 = 1.0 - opt.beta2 ** opt.t
    for p, g, m, v in zip(model.params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return model


def to_checkpoint(model):
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_id": model.model_id,
        "activation": model.activation,
        "layer_sizes": model.layer_sizes,
        # row-major (fan_in, fan_out) weights then bias, per layer
        "params": [p.ravel().tolist() for p in model.params],
    }


def from_checkpoint(obj):
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a classifier checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {obj.get('version')}")
    sizes = obj["layer_sizes"]
    params = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        params.append(np.asarray(obj["params"][2 * i], dtype=np.float64).reshape(a, b))
        params.append(np.asarray(obj["params"][2 * i + 1], dtype=np.float64))
    return Classifier(sizes, params, obj["activation"], obj["model_id"])


def save_checkpoint(model, path):
    with open(path, "w") as fh:
        json.dump(to_checkpoint(model), fh)


def load_checkpoint(path):
    with open(path) as fh:
        return from_checkpoint(json.load(fh))
