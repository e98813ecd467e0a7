"""Classwise learning-status EMA and the adaptive local thresholds built on it."""

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearningStatus:
    p_tilde: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, n_classes):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        return cls(np.full(n_classes, 1.0 / n_classes), 0)


@dataclass(frozen=True)
class ThresholdVector:
    tau_local: np.ndarray
    base_tau: float


def update_status(status, batch_preds, lam):
    """EMA step ``p_t = lam * p_{t-1} + (1 - lam) * mean(batch_preds)``.

    An empty batch leaves the status untouched (the mean is undefined).
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"EMA decay must lie in [0, 1), got {lam}")
    preds = np.asarray(batch_preds, dtype=np.float64)
    if preds.size == 0:
        log.info("empty unlabeled batch at t=%d: status update skipped", status.t)
        return status
    if preds.ndim != 2 or preds.shape[1] != status.p_tilde.shape[0]:
        raise ValueError("batch predictions do not match the number of classes")
    p = lam * status.p_tilde + (1.0 - lam) * preds.mean(axis=0)
    return LearningStatus(p, status.t + 1)


def local_thresholds(status, base_tau):
    """``tau(c) = p(c) / max_c p(c) * base_tau``."""
    if not 0.0 < base_tau <= 1.0:
        raise ValueError(f"base threshold must lie in (0, 1], got {base_tau}")
    p = np.asarray(status.p_tilde, dtype=np.float64)
    top = p.max()
    if not top > 0:
        raise ValueError("learning status has no positive entry")
    tau = p / top * base_tau
    # the arg-max class sits at the base threshold exactly
    tau[p == top] = base_tau
    return ThresholdVector(tau, float(base_tau))


def fixed_thresholds(n_classes, base_tau):
    if not 0.0 < base_tau <= 1.0:
        raise ValueError(f"base threshold must lie in (0, 1], got {base_tau}")
    return ThresholdVector(np.full(n_classes, float(base_tau)), float(base_tau))
