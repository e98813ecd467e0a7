"""JointMatch: adaptive classwise thresholds, cross-labeling between two
differently initialized classifiers, and disagreement-weighted updates."""

from ._backend import BACKEND
from .config import TrainConfig, load_config
from .harness import ablate, report, sweep, train

__version__ = "0.1.0"

__all__ = ["BACKEND", "TrainConfig", "load_config", "train", "ablate", "sweep", "report"]
