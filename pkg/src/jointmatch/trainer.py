"""One JointMatch training step and the pieces it is made of.

Per step, for each model: supervised loss on weakly augmented labeled data,
learning-status EMA from predictions on weakly augmented unlabeled data,
classwise thresholds, and thresholded hard pseudo-labels.  Each model is
then trained on the strongly augmented views against its peer's
pseudo-labels (or its own, with cross-labeling off), each example weighted
by whether the two models' hard labels disagree.  Both models are updated
from gradients taken at the pre-step parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .augment import featurize, view
from .classifier import apply_update
from .thresholds import fixed_thresholds, local_thresholds, update_status


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass
class PseudoLabelBatch:
    source_model: str
    hard_labels: np.ndarray
    confidence: np.ndarray
    passed: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.hard_labels.shape[0]


@dataclass
class ModelSide:
    """Per-model mutable training state."""

    model: object
    optimizer: object
    status: object


@dataclass
class TrainState:
    f: ModelSide
    g: ModelSide = None
    t: int = 0

    @property
    def sides(self):
        return [self.f] if self.g is None else [self.f, self.g]


@dataclass
class ModelStep:
    model_id: str
    sup_loss: float
    unsup_loss: float
    p_tilde: np.ndarray
    tau_local: np.ndarray
    pseudo: PseudoLabelBatch
    q_weak: np.ndarray = field(repr=False, default=None)


@dataclass
class StepResult:
    t: int
    models: list
    agreement_rate: float = None


def supervised_loss(model, X, y):
    """Mean cross-entropy of weakly augmented labeled inputs ``X``.

    Returns ``(loss, grads)``.
    """
    grads, loss = model.backward(X, y)
    return loss, grads


def generate_pseudo_labels(source_model, X_weak, thresholds):
    """Hard labels, confidences and threshold mask from the source model.

    Returns ``(PseudoLabelBatch, q)`` where ``q`` are the weak-view
    distributions (reused for the status EMA).
    """
    return _select(source_model, source_model.predict_proba(X_weak), thresholds)


def disagreement_weights(labels_f, labels_g, delta, enabled=True):
    """``delta`` where the two hard labels differ, ``1 - delta`` where they agree."""
    a = labels_f.hard_labels
    b = labels_g.hard_labels
    if a.shape != b.shape:
        raise ValueError("pseudo-label batches are not aligned")
    if not enabled:
        return np.ones(a.shape[0])
    return np.where(a != b, float(delta), 1.0 - float(delta))


def unlabeled_loss(target_model, pseudo, X_strong, weights=None, cross=True):
    """Masked, weighted cross-entropy of strong views against ``pseudo``.

    The mean runs over the whole unlabeled batch; examples that did not
    pass their source model's threshold contribute nothing.
    Returns ``(loss, grads)``.
    """
    same = pseudo.source_model == target_model.model_id
    if cross and same:
        raise ValueError("cross-labeling: a model cannot consume its own pseudo-labels")
    if not cross and not same:
        raise ValueError("self-labeling: pseudo-labels must come from the target model")
    if len(pseudo) != np.shape(X_strong)[0]:
        raise ValueError("strong views are not aligned with the pseudo-labels")
    w = pseudo.weights if weights is None else np.asarray(weights, dtype=np.float64)
    sample_w = w * pseudo.passed
    grads, loss = target_model.backward(X_strong, pseudo.hard_labels, sample_w,
                                        denom=len(pseudo))
    return loss, grads


def _thresholds(status, cfg, n_classes):
    if cfg.adaptive_threshold:
        return local_thresholds(status, cfg.fixed_threshold)
    return fixed_thresholds(n_classes, cfg.fixed_threshold)


def train_step(state, labeled, labels, unlabeled, cfg, aug, rngs):
    """Advance ``state`` by one step; returns ``(state, StepResult)``.

    ``labeled``/``unlabeled`` are raw payloads (``TokenBatch`` or feature
    arrays); ``rngs`` maps ``labeled_weak``, ``unlabeled_weak`` and
    ``unlabeled_strong`` to generators.  One weak and one strong view per
    example is shared by both models.  ``cfg.labeled_augment=False`` feeds
    the labeled batch un-augmented.
    """
    # single-model modes never dereference the peer
    sides = [state.f] if cfg.single_model else state.sides
    if cfg.labeled_augment:
        X_lab = view(labeled, aug.weak, aug, rngs["labeled_weak"])
    else:
        X_lab = featurize(labeled, aug.n_buckets)
    X_weak = view(unlabeled, aug.weak, aug, rngs["unlabeled_weak"])
    X_strong = view(unlabeled, aug.strong, aug, rngs["unlabeled_strong"])

    sup, pseudo, steps = [], [], []
    for side in sides:
        model = side.model
        loss_s, grads_s = supervised_loss(model, X_lab, labels)
        q = model.predict_proba(X_weak)
        if not (np.isfinite(loss_s) and np.all(np.isfinite(q))):
            raise NonFiniteLoss(f"non-finite loss at step {state.t + 1} (model {model.model_id})")
        side.status = update_status(side.status, q, cfg.ema_decay)
        th = _thresholds(side.status, cfg, model.n_classes)
        batch, _ = _select(model, q, th)
        sup.append((loss_s, grads_s))
        pseudo.append(batch)
        steps.append(ModelStep(model.model_id, loss_s, 0.0, side.status.p_tilde.copy(),
                               th.tau_local.copy(), batch, q))

    agreement = None
    if len(sides) == 2:
        w = disagreement_weights(pseudo[0], pseudo[1], cfg.disagreement_weight,
                                 cfg.disagreement_weighting)
        pseudo[0].weights = w
        pseudo[1].weights = w
        agreement = float(np.mean(pseudo[0].hard_labels == pseudo[1].hard_labels))

    updates = []
    for i, side in enumerate(sides):
        if len(sides) == 2 and cfg.cross_labeling:
            source = pseudo[1 - i]
        else:
            source = pseudo[i]
        loss_u, grads_u = unlabeled_loss(side.model, source, X_strong,
                                         cross=len(sides) == 2 and cfg.cross_labeling)
        steps[i].unsup_loss = loss_u
        grads = [gs + cfg.unsupervised_loss_weight * gu
                 for gs, gu in zip(sup[i][1], grads_u)]
        updates.append(grads)

    # barrier: every gradient above was taken at the pre-step parameters
    for side, grads in zip(sides, updates):
        apply_update(side.model, grads, side.optimizer)
    state.t += 1
    return state, StepResult(state.t, steps, agreement)


def _select(model, q, th):
    labels, conf, passed = _backend.select_pseudo(q, th.tau_local)
    return PseudoLabelBatch(model.model_id, labels, conf,
                            np.asarray(passed, dtype=bool), np.ones(labels.shape[0])), q


__all__ = [
    "NonFiniteLoss", "PseudoLabelBatch", "ModelSide", "TrainState", "ModelStep", "StepResult",
    "supervised_loss", "generate_pseudo_labels", "disagreement_weights",
    "unlabeled_loss", "train_step",
]
