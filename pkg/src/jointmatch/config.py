"""Training configuration and its flat ``key = value`` text format.

One setting per line, ``#`` starts a comment.  Booleans accept
true/false/yes/no/1/0; lists are comma separated; an empty value means
"unset" for optional keys.  Example::

    batch_size = 8
    unlabeled_data_ratio = 10
    ema_decay = 0.9
    fixed_threshold = 0.98
    disagreement_weight = 0.9
    unsupervised_loss_weight = 1
    learning_rate = 0.01
"""

import dataclasses
import logging
import os
import typing
from dataclasses import dataclass, field, fields

log = logging.getLogger(__name__)
_delta_warned = set()

# mode name -> (adaptive_threshold, cross_labeling, disagreement_weighting)
MODES = {
    "full": (True, True, True),
    "no-adaptive": (False, True, True),
    "no-cross": (True, False, True),
    "no-disagree": (True, True, False),
    "fixmatch": (False, False, False),
}
MODE_LABELS = {
    "full": "JointMatch",
    "no-adaptive": "- Adaptive Threshold",
    "no-cross": "- Cross Labeling",
    "no-disagree": "- Disagree Weights",
    "fixmatch": "- All (FixMatch)",
}


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    # core hyperparameters
    batch_size: int = 8
    learning_rate: float = 1e-2
    unsupervised_loss_weight: float = 1.0
    ema_decay: float = 0.9
    fixed_threshold: float = 0.98
    disagreement_weight: float = 0.9
    unlabeled_data_ratio: int = 10

    steps: int = 1000
    eval_every: int = 100
    optimizer: str = "adam"
    weight_decay: float = 0.0

    adaptive_threshold: bool = True
    cross_labeling: bool = True
    disagreement_weighting: bool = True

    seed: int = 0
    seed_model_f: typing.Optional[int] = None
    seed_model_g: typing.Optional[int] = None
    seed_data: typing.Optional[int] = None
    seed_augment: typing.Optional[int] = None

    hidden: typing.List[int] = field(default_factory=lambda: [64])
    hidden_g: typing.Optional[typing.List[int]] = None
    activation: str = "tanh"

    task: str = "synthetic"

    # synthetic task
    n_classes: int = 4
    d_in: int = 16
    separation: float = 3.0
    hard_classes: typing.List[int] = field(default_factory=lambda: [3])
    hard_separation: float = 1.0
    noise_std: float = 1.0
    class_priors: typing.Optional[typing.List[float]] = None
    modes_per_class: int = 1
    mode_spread: float = 0.0

    # split sizes (per class)
    labels_per_class: int = 10
    unlabeled_per_class: int = 500
    val_per_class: int = 100
    test_per_class: typing.Optional[int] = 250

    # text task
    corpus_path: str = ""
    corpus_format: str = "csv"
    text_field: str = "text"
    label_field: str = "label"
    synonyms_path: str = ""
    n_buckets: int = 2048

    # augmentation channels
    weak_replace_rate: float = 0.3
    weak_noise_std: float = 0.1
    strong_replace_rate: float = 0.5
    strong_dropout: float = 0.1
    strong_window: int = 3
    strong_shuffle_rate: float = 1.0
    strong_noise_std: float = 0.4
    labeled_augment: bool = True

    @property
    def mu(self):
        return self.unlabeled_data_ratio

    @property
    def single_model(self):
        return not (self.adaptive_threshold or self.cross_labeling
                    or self.disagreement_weighting)

    @property
    def mode_signature(self):
        flags = (self.adaptive_threshold, self.cross_labeling, self.disagreement_weighting)
        for name, sig in MODES.items():
            if sig == flags:
                return name
        return "custom:" + "".join("1" if f else "0" for f in flags)

    def resolved_seeds(self):
        """Per-consumer seeds; unset ones derive from ``seed``."""
        return {
            "model_f": self.seed if self.seed_model_f is None else self.seed_model_f,
            "model_g": self.seed if self.seed_model_g is None else self.seed_model_g,
            "data": self.seed if self.seed_data is None else self.seed_data,
            "augment": self.seed if self.seed_augment is None else self.seed_augment,
        }

    def with_mode(self, mode):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
        a, c, d = MODES[mode]
        return dataclasses.replace(self, adaptive_threshold=a, cross_labeling=c,
                                   disagreement_weighting=d)

    def validate(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.unlabeled_data_ratio < 1:
            raise ConfigError("unlabeled_data_ratio must be >= 1")
        if not 0.0 <= self.disagreement_weight <= 1.0:
            raise ConfigError("disagreement_weight must lie in [0, 1]")
        if not 0.0 < self.fixed_threshold <= 1.0:
            raise ConfigError("fixed_threshold must lie in (0, 1]")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError("ema_decay must lie in [0, 1)")
        if self.unsupervised_loss_weight < 0:
            raise ConfigError("unsupervised_loss_weight must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.steps < 0 or self.eval_every < 1:
            raise ConfigError("steps must be >= 0 and eval_every >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError("optimizer must be adam or sgd")
        if self.activation not in ("tanh", "identity"):
            raise ConfigError("activation must be tanh or identity")
        if self.task not in ("synthetic", "text"):
            raise ConfigError("task must be synthetic or text")
        if self.task == "text" and not self.corpus_path:
            raise ConfigError("text task needs corpus_path")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2")
        if self.labels_per_class < 1:
            raise ConfigError("labels_per_class must be >= 1")
        if (not self.single_model and not 0.5 < self.disagreement_weight < 1.0
                and self.disagreement_weight not in _delta_warned):
            # sweeps legitimately cover [0, 1]; say it once per value
            _delta_warned.add(self.disagreement_weight)
            log.warning("disagreement_weight=%s is outside (0.5, 1)", self.disagreement_weight)
        return self


def _parse_value(tp, raw, key):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        if raw == "" or raw.lower() == "none":
            return None
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        return _parse_value(inner, raw, key)
    if origin is list:
        (inner,) = typing.get_args(tp)
        return [_parse_value(inner, x, key) for x in raw.split(",") if x.strip()]
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _field_types():
    hints = typing.get_type_hints(TrainConfig)
    return {f.name: hints[f.name] for f in fields(TrainConfig)}


def apply_overrides(cfg, pairs):
    """Apply ``key=value`` strings (or ``(key, value)`` tuples) to ``cfg``."""
    types = _field_types()
    updates = {}
    for item in pairs:
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"expected key=value, got {item!r}")
            key, raw = item.split("=", 1)
        else:
            key, raw = item
        key = key.strip()
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        updates[key] = _parse_value(types[key], str(raw), key)
    return dataclasses.replace(cfg, **updates)


def parse_config_text(text):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = line.split("=", 1)
        pairs.append((key, raw))
    return apply_overrides(TrainConfig(), pairs)


PATH_KEYS = ("corpus_path", "synonyms_path")


def load_config(path):
    """Parse a config file; relative data paths resolve against its directory."""
    with open(path, encoding="utf-8") as fh:
        cfg = parse_config_text(fh.read())
    base = os.path.dirname(os.path.abspath(path))
    updates = {k: os.path.normpath(os.path.join(base, getattr(cfg, k)))
               for k in PATH_KEYS if getattr(cfg, k) and not os.path.isabs(getattr(cfg, k))}
    return dataclasses.replace(cfg, **updates)


def _format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(_format_value(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def config_to_text(cfg):
    return "".join(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n"
                   for f in fields(cfg))


def config_to_dict(cfg):
    return dataclasses.asdict(cfg)
