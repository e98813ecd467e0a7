"""Weak and strong augmentation channels for token and dense-feature inputs.

Text inputs are perturbed at the token level (synonym replacement, token
dropout, local window shuffles) and only then hashed into a bag-of-words
feature vector.  Dense inputs get additive Gaussian noise.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend


class AugmentConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    """One input: ``tokens`` (text mode) or ``features`` (dense mode)."""

    tokens: np.ndarray = None
    features: np.ndarray = None
    label: int = None

    def __post_init__(self):
        if (self.tokens is None) == (self.features is None):
            raise ValueError("an Example carries exactly one of tokens / features")


class TokenBatch:
    """Ragged batch of token-id sequences stored as ``flat`` + ``offsets``."""

    def __init__(self, flat, offsets):
        self.flat = np.ascontiguousarray(flat, dtype=np.int64)
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)

    @classmethod
    def from_sequences(cls, seqs):
        lengths = [len(s) for s in seqs]
        offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        flat = np.concatenate([np.asarray(s, dtype=np.int64) for s in seqs]) if seqs else []
        return cls(flat, offsets)

    def __len__(self):
        return self.offsets.shape[0] - 1

    def __getitem__(self, i):
        return self.flat[self.offsets[i]:self.offsets[i + 1]]

    def sequences(self):
        return [self[i] for i in range(len(self))]

    def take(self, indices):
        return TokenBatch.from_sequences([self[int(i)] for i in indices])

    def max_token(self):
        return int(self.flat.max()) if self.flat.size else -1


class SynonymTable:
    """Token-id -> candidate-id lists in CSR form, sized to the vocabulary."""

    def __init__(self, mapping, vocab_size):
        self.vocab_size = int(vocab_size)
        counts = np.zeros(self.vocab_size, dtype=np.int64)
        for tok, cands in mapping.items():
            if not 0 <= tok < self.vocab_size:
                raise ValueError(f"token id {tok} outside vocabulary")
            counts[tok] = len(cands)
        self.offsets = np.zeros(self.vocab_size + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])
        self.flat = np.zeros(int(self.offsets[-1]), dtype=np.int64)
        for tok, cands in mapping.items():
            for c in cands:
                if not 0 <= c < self.vocab_size:
                    raise ValueError(f"synonym id {c} outside vocabulary")
            self.flat[self.offsets[tok]:self.offsets[tok + 1]] = cands

    def candidates(self, tok):
        return self.flat[self.offsets[tok]:self.offsets[tok + 1]]


def parse_synonym_file(path):
    """Read ``token<TAB>syn1,syn2,...`` lines into ``{word: [synonyms]}``.

    Blank lines and lines starting with ``#`` are skipped.  Words are
    lowercased to match the corpus tokenizer.
    """
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected token<TAB>synonyms")
            word, rest = line.split("\t", 1)
            syns = [s.strip().lower() for s in rest.split(",") if s.strip()]
            word = word.strip().lower()
            if not word:
                raise ValueError(f"{path}:{lineno}: empty token")
            table.setdefault(word, [])
            for s in syns:
                if s != word and s not in table[word]:
                    table[word].append(s)
    return table


@dataclass(frozen=True)
class Channel:
    """Parameters of one augmentation channel.

    Text: ``replace_rate`` synonym substitution, ``dropout`` token removal,
    non-overlapping windows of ``window`` tokens each shuffled with
    probability ``shuffle_rate``.  Dense: additive N(0, noise_std^2).
    """

    replace_rate: float = 0.0
    dropout: float = 0.0
    window: int = 0
    shuffle_rate: float = 0.0
    noise_std: float = 0.0

    def text_magnitude(self):
        shuffle = self.shuffle_rate if self.window > 1 else 0.0
        return self.replace_rate + self.dropout + shuffle


WEAK_DEFAULT = Channel(replace_rate=0.3, noise_std=0.1)
STRONG_DEFAULT = Channel(replace_rate=0.5, dropout=0.1, window=3, shuffle_rate=1.0,
                         noise_std=0.4)


@dataclass(frozen=True)
class AugmentSpec:
    weak: Channel = WEAK_DEFAULT
    strong: Channel = STRONG_DEFAULT
    synonyms: SynonymTable = field(default=None, compare=False)
    n_buckets: int = 2048

    def validate(self, mode):
        for name, ch in (("weak", self.weak), ("strong", self.strong)):
            for attr in ("replace_rate", "dropout", "shuffle_rate"):
                v = getattr(ch, attr)
                if not 0.0 <= v <= 1.0:
                    raise AugmentConfigError(f"{name}.{attr}={v} outside [0, 1]")
            if ch.noise_std < 0:
                raise AugmentConfigError(f"{name}.noise_std must be >= 0")
        if mode == "text":
            if self.synonyms is None:
                raise AugmentConfigError("text mode requires a synonym map")
            if not self.strong.text_magnitude() > self.weak.text_magnitude():
                raise AugmentConfigError("strong channel must perturb more than weak")
        elif not self.strong.noise_std > self.weak.noise_std:
            raise AugmentConfigError("strong noise_std must exceed weak noise_std")
        return self

    def with_synonyms(self, table):
        return replace(self, synonyms=table)


def _perturb_tokens(batch, channel, spec, rng):
    if spec.synonyms is None:
        raise AugmentConfigError("text augmentation requires a synonym map")
    if batch.max_token() >= spec.synonyms.vocab_size:
        raise AugmentConfigError("token id outside the synonym table's vocabulary")
    u = rng.random((batch.flat.shape[0], 5))
    flat, offsets = _backend.augment_tokens(
        batch.flat, batch.offsets, spec.synonyms.flat, spec.synonyms.offsets, u,
        channel.replace_rate, channel.dropout, channel.window, channel.shuffle_rate)
    return TokenBatch(flat, offsets)


def _noise(X, channel, rng):
    X = np.asarray(X, dtype=np.float64)
    # draw unconditionally so the stream advances identically for any std
    return X + channel.noise_std * rng.standard_normal(X.shape)


def augment_batch(payload, channel, spec, rng):
    """Apply ``channel`` to a ``TokenBatch`` or an ``(N, d)`` feature array."""
    if isinstance(payload, TokenBatch):
        return _perturb_tokens(payload, channel, spec, rng)
    return _noise(payload, channel, rng)


def featurize(payload, n_buckets):
    """Model inputs: hashed L2-normalized bag-of-words, or features as-is."""
    if isinstance(payload, TokenBatch):
        return _backend.hashed_bow(payload.flat, payload.offsets, n_buckets)
    return np.asarray(payload, dtype=np.float64)


def view(payload, channel, spec, rng):
    return featurize(augment_batch(payload, channel, spec, rng), spec.n_buckets)


def _augment_example(e, channel, spec, rng):
    if e.tokens is not None:
        out = _perturb_tokens(TokenBatch.from_sequences([e.tokens]), channel, spec, rng)
        return replace(e, tokens=out[0].copy())
    return replace(e, features=_noise(e.features, channel, rng))


def weak_augment(e, spec, rng):
    return _augment_example(e, spec.weak, spec, rng)


def strong_augment(e, spec, rng):
    return _augment_example(e, spec.strong, spec, rng)
