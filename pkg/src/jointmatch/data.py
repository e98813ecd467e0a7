"""Corpus loading, stratified few-shot splits and synthetic tasks."""

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels_py import _mix64
from .augment import Example, SynonymTable, TokenBatch
from .numeric import rng_stream

STANDARD_LABEL_COUNTS = (5, 10, 15, 25, 100, 1000)


class DataError(ValueError):
    pass


def tokenize(text):
    return text.lower().split()


@dataclass
class RawCorpus:
    tokens: list
    labels: np.ndarray
    class_names: list
    ids: np.ndarray

    def __len__(self):
        return len(self.tokens)


def _read_rows(path, fmt, text_field, label_field):
    rows = []
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{path}: no examples")
            for name in (text_field, label_field):
                if name not in reader.fieldnames:
                    raise DataError(f"{path}: missing column {name!r}")
            for rowno, row in enumerate(reader, 2):
                if None in row or row.get(text_field) is None or row.get(label_field) is None:
                    raise DataError(f"{path}: malformed row {rowno}")
                rows.append((rowno, row[text_field], row[label_field]))
    elif fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for rowno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    rows.append((rowno, obj[text_field], obj[label_field]))
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise DataError(f"{path}: malformed row {rowno}") from None
    else:
        raise DataError(f"unknown corpus format {fmt!r}")
    return rows


def _content_id(text, label, dup):
    h = hashlib.sha256(f"{label}\x1f{text}\x1f{dup}".encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


def load_text_corpus(path, fmt="csv", text_field="text", label_field="label",
                     class_names=None):
    """Read a labeled corpus; tokens are lowercased whitespace splits.

    Labels map to indices in sorted order of the label strings, unless
    ``class_names`` is given (e.g. from the training file), in which case
    any other label is an error.
    """
    rows = _read_rows(path, fmt, text_field, label_field)
    if not rows:
        raise DataError(f"{path}: no examples")
    raw_labels = [str(r[2]) for r in rows]
    if class_names is None:
        class_names = sorted(set(raw_labels))
    index = {name: i for i, name in enumerate(class_names)}
    labels, seen, ids, toks = [], {}, [], []
    for (rowno, text, _), lab in zip(rows, raw_labels):
        if lab not in index:
            raise DataError(f"{path}: unknown label {lab!r} in row {rowno}")
        text = str(text)
        key = (lab, text)
        seen[key] = seen.get(key, 0) + 1
        ids.append(_content_id(text, lab, seen[key]))
        labels.append(index[lab])
        toks.append(tokenize(text))
    return RawCorpus(toks, np.asarray(labels, dtype=np.int64), list(class_names),
                     np.asarray(ids, dtype=np.int64))


def write_text_corpus(path, texts, labels, fmt="csv", text_field="text", label_field="label"):
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([text_field, label_field])
            w.writerows(zip(texts, labels))
    else:
        with open(path, "w", encoding="utf-8") as fh:
            for t, lab in zip(texts, labels):
                fh.write(json.dumps({text_field: t, label_field: lab}) + "\n")


class Vocab:
    """Sorted word list -> contiguous ids."""

    def __init__(self, words):
        self.words = sorted(set(words))
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def encode(self, tokens):
        return np.asarray([self.index[t] for t in tokens], dtype=np.int64)


def build_text_inputs(corpora, synonym_words=None):
    """Shared vocabulary, encoded ``TokenBatch`` per corpus and a synonym table."""
    synonym_words = synonym_words or {}
    words = set()
    for c in corpora:
        for toks in c.tokens:
            words.update(toks)
    for w, syns in synonym_words.items():
        words.add(w)
        words.update(syns)
    vocab = Vocab(words)
    batches = [TokenBatch.from_sequences([vocab.encode(t) for t in c.tokens]) for c in corpora]
    table = SynonymTable({vocab.index[w]: [vocab.index[s] for s in syns]
                          for w, syns in synonym_words.items() if syns}, len(vocab))
    return vocab, batches, table


@dataclass
class Split:
    """One split as struct-of-arrays; ``labels`` is None for the unlabeled pool."""

    payload: object
    ids: np.ndarray
    labels: np.ndarray = None

    def __len__(self):
        return self.ids.shape[0]

    def __getitem__(self, i):
        lab = None if self.labels is None else int(self.labels[i])
        if isinstance(self.payload, TokenBatch):
            return Example(tokens=self.payload[i], label=lab)
        return Example(features=self.payload[i], label=lab)

    def take(self, idx):
        return _take(self.payload, idx)


def _take(payload, idx):
    if isinstance(payload, TokenBatch):
        return payload.take(idx)
    return payload[idx]


@dataclass
class DatasetSplit:
    labeled: Split
    unlabeled: Split
    validation: Split
    test: Split
    n_classes: int
    class_names: list
    # ground truth of the unlabeled pool; read only by telemetry
    hidden_labels: np.ndarray = field(repr=False, default=None)
    mode: str = "synthetic"
    extras: dict = field(default_factory=dict, repr=False)

    def split_hash(self):
        h = hashlib.sha256()
        for s in (self.labeled, self.unlabeled, self.validation, self.test):
            h.update(np.asarray(s.ids, dtype=np.int64).tobytes())
            h.update(b"|")
        return h.hexdigest()[:16]


def _keyed_order(ids, seed):
    # order depends only on (id, seed), never on input position
    key = _mix64(np.asarray(ids, dtype=np.int64).astype(np.uint64)
                 ^ _mix64(np.asarray([seed], dtype=np.uint64))[0])
    return np.lexsort((ids, key))


def few_shot_split(payload, labels, ids, n_classes, labels_per_class,
                   unlabeled_per_class, val_per_class, seed,
                   test_per_class=None, class_names=None):
    """Stratified split into labeled / unlabeled / validation / test.

    Within each class examples are ordered by a seed-keyed hash of their id
    and cut into consecutive blocks; with ``test_per_class=None`` the
    remainder of each class becomes the test split.
    """
    labels = np.asarray(labels, dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    if len(np.unique(ids)) != len(ids):
        raise DataError("example ids must be unique")
    class_names = class_names or [str(c) for c in range(n_classes)]
    need = labels_per_class + unlabeled_per_class + val_per_class + (test_per_class or 0)
    parts = {"lab": [], "unl": [], "val": [], "test": []}
    for c in range(n_classes):
        members = np.flatnonzero(labels == c)
        if len(members) < need:
            raise DataError(f"class {class_names[c]!r} has {len(members)} examples, "
                            f"{need} needed")
        members = members[_keyed_order(ids[members], seed)]
        a = labels_per_class
        b = a + unlabeled_per_class
        d = b + val_per_class
        e = len(members) if test_per_class is None else d + test_per_class
        parts["lab"].append(members[:a])
        parts["unl"].append(members[a:b])
        parts["val"].append(members[b:d])
        parts["test"].append(members[d:e])
    idx = {k: np.sort(np.concatenate(v)) for k, v in parts.items()}

    def mk(k, with_labels=True):
        return Split(_take(payload, idx[k]), ids[idx[k]],
                     labels[idx[k]] if with_labels else None)

    mode = "text" if isinstance(payload, TokenBatch) else "synthetic"
    return DatasetSplit(mk("lab"), mk("unl", False), mk("val"), mk("test"),
                        n_classes, list(class_names), labels[idx["unl"]], mode)


@dataclass
class SyntheticTaskSpec:
    """Gaussian class-conditional task.

    Class ``c`` has mean ``separation[c] * e_c`` for orthonormal directions
    ``e_c``; a small separation puts the class near the origin where it
    overlaps every other class.
    """

    n_classes: int = 4
    d_in: int = 16
    separation: object = 3.0
    hard_classes: tuple = (3,)
    hard_separation: float = 1.0
    noise_std: float = 1.0
    class_priors: object = None
    labels_per_class: int = 10
    unlabeled_per_class: int = 500
    val_per_class: int = 100
    test_per_class: int = 250
    modes_per_class: int = 1
    mode_spread: float = 0.0

    def separations(self):
        sep = np.broadcast_to(np.asarray(self.separation, dtype=np.float64),
                              (self.n_classes,)).copy()
        for c in self.hard_classes:
            sep[c] = self.hard_separation
        return sep

    def validate(self):
        if self.n_classes < 2 or self.d_in < 1:
            raise DataError("need n_classes >= 2 and d_in >= 1")
        if any(not 0 <= c < self.n_classes for c in self.hard_classes):
            raise DataError("hard class index out of range")
        if self.hard_classes:
            sep = self.separations()
            easy = [sep[c] for c in range(self.n_classes) if c not in self.hard_classes]
            if easy and not max(sep[list(self.hard_classes)]) < min(easy):
                raise DataError("hard classes must be separated less than easy ones")
        return self


def class_means(spec, rng):
    """``(C, d)`` class centers, or ``(C, K, d)`` sub-cluster centers when
    ``modes_per_class > 1`` (offsets of norm ``mode_spread`` around each center)."""
    g = rng.standard_normal((spec.d_in, max(spec.d_in, spec.n_classes)))
    q, _ = np.linalg.qr(g)
    dirs = np.zeros((spec.n_classes, spec.d_in))
    k = min(spec.n_classes, spec.d_in)
    dirs[:k] = q[:, :k].T
    if spec.n_classes > spec.d_in:
        extra = rng.standard_normal((spec.n_classes - k, spec.d_in))
        dirs[k:] = extra / np.linalg.norm(extra, axis=1, keepdims=True)
    centers = spec.separations()[:, None] * dirs
    if spec.modes_per_class <= 1:
        return centers
    off = rng.standard_normal((spec.n_classes, spec.modes_per_class, spec.d_in))
    off *= spec.mode_spread / np.linalg.norm(off, axis=2, keepdims=True)
    return centers[:, None, :] + off


def make_synthetic(spec, seed):
    spec.validate()
    rng = rng_stream(seed, "data")
    means = class_means(spec, rng)
    C = spec.n_classes
    counts = {"lab": spec.labels_per_class, "val": spec.val_per_class,
              "test": spec.test_per_class}
    unl = np.full(C, spec.unlabeled_per_class)
    if spec.class_priors is not None:
        pri = np.asarray(spec.class_priors, dtype=np.float64)
        if pri.shape != (C,) or np.any(pri <= 0):
            raise DataError("class_priors needs one positive entry per class")
        pri = pri / pri.sum()
        unl = np.maximum(1, np.round(pri * C * spec.unlabeled_per_class)).astype(int)

    next_id = [0]

    def draw(per_class):
        X, y = [], []
        for c in range(C):
            n = int(per_class[c])
            mu = means[c]
            if mu.ndim == 2:
                mu = mu[rng.integers(0, mu.shape[0], size=n)]
            X.append(mu + spec.noise_std * rng.standard_normal((n, spec.d_in)))
            y.append(np.full(n, c))
        X = np.concatenate(X)
        y = np.concatenate(y).astype(np.int64)
        ids = np.arange(next_id[0], next_id[0] + len(y), dtype=np.int64)
        next_id[0] += len(y)
        return X, y, ids

    splits = {}
    for name, per in (("lab", np.full(C, counts["lab"])), ("unl", unl),
                      ("val", np.full(C, counts["val"])), ("test", np.full(C, counts["test"]))):
        splits[name] = draw(per)
    X, y, ids = splits["unl"]
    names = [f"class_{c}" for c in range(C)]
    return DatasetSplit(
        Split(splits["lab"][0], splits["lab"][2], splits["lab"][1]),
        Split(X, ids),
        Split(splits["val"][0], splits["val"][2], splits["val"][1]),
        Split(splits["test"][0], splits["test"][2], splits["test"][1]),
        C, names, y, "synthetic", {"means": means})
