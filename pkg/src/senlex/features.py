"""Vocabularies, word-vector loading, sequence encoding and feature fusion.

The fusion contract: a classifier's pooled feature vector (length p) is
concatenated with a scaled lexicon count vector (length m) immediately
before the output layer, giving a length p+m fused vector.  With all-zero
counts and zero-initialized fusion weights the model's logits are exactly
those of the unfused model, so fusion can only add information.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_text_list, require_file
from .randomness import derive_rng

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1


@dataclass(frozen=True)
class Vocabulary:
    """Dense token index with reserved PAD (0) and UNK (1) slots."""

    index: dict[str, int]
    tokens: tuple[str, ...]
    min_frequency: int = 1

    def __post_init__(self):
        if self.tokens[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise ValueError("vocabulary must reserve PAD at 0 and UNK at 1")
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary index and token list disagree")
        for i, tok in enumerate(self.tokens):
            if self.index.get(tok) != i:
                raise ValueError(f"vocabulary index not dense at {tok!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK_INDEX)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.tokens):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        p = require_file(path, "vocabulary file")
        tokens: list[str] = []
        for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
            if not raw:
                continue
            cols = raw.split("\t")
            if len(cols) != 2 or int(cols[1]) != len(tokens):
                raise ValueError(f"{p}:{lineno}: malformed vocabulary line {raw!r}")
            tokens.append(cols[0])
        return cls.from_tokens(tokens)

    @classmethod
    def from_tokens(cls, tokens: Sequence[str], min_frequency: int = 1) -> "Vocabulary":
        tokens = tuple(tokens)
        return cls(
            index={t: i for i, t in enumerate(tokens)},
            tokens=tokens,
            min_frequency=min_frequency,
        )


def build_vocab(token_seqs: Iterable[Sequence[str]], min_freq: int = 1) -> Vocabulary:
    """Count tokens over the corpus and keep those with frequency >= min_freq.

    Kept tokens are ordered by descending frequency, ties broken
    lexicographically, after the two reserved slots.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts: Counter[str] = Counter()
    n_docs = 0
    for seq in token_seqs:
        n_docs += 1
        counts.update(seq)
    if n_docs == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts.pop(PAD_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_freq),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, *kept], min_frequency=min_freq)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """|V| x d float64 matrix; row 0 is the all-zero PAD row."""

    matrix: np.ndarray
    coverage: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise ValueError("embedding matrix contains non-finite values")
        if m.shape[0] >= 1 and np.any(m[PAD_INDEX] != 0.0):
            raise ValueError("PAD embedding row must be all zeros")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


def _oov_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    bound = 0.25 / np.sqrt(dim)
    return rng.uniform(-bound, bound, size=(n, dim))


def random_embeddings(vocab: Vocabulary, dim: int, seed: int) -> EmbeddingMatrix:
    """Fresh seeded matrix: uniform(+-0.25/sqrt(d)) rows, zero PAD row."""
    rng = derive_rng(seed, "embeddings", "random")
    m = _oov_rows(rng, len(vocab), dim)
    m[PAD_INDEX] = 0.0
    return EmbeddingMatrix(matrix=m, coverage=0.0)


def load_embeddings(path, vocab: Vocabulary, seed: int = 42) -> EmbeddingMatrix:
    """Load a text word-vector file (header "count dim", then token rows).

    In-vocab rows are copied; vocabulary tokens missing from the file get
    seeded uniform(+-0.25/sqrt(d)) rows so runs are repeatable; the PAD
    row is zeroed.  Coverage is the fraction of non-reserved vocabulary
    tokens found in the file.
    """
    p = require_file(path, "embedding file")
    found: dict[int, np.ndarray] = {}
    with open(p, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{p}:1: expected header 'count dim', got {header}")
        try:
            _, dim = int(header[0]), int(header[1])
        except ValueError:
            raise ValueError(f"{p}:1: expected header 'count dim', got {header}") from None
        if dim < 1:
            raise ValueError(f"{p}:1: embedding dimension must be >= 1, got {dim}")
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split(" ")
            token, values = parts[0], [v for v in parts[1:] if v]
            if len(values) != dim:
                raise ValueError(
                    f"{p}:{lineno}: expected {dim} values for {token!r}, got {len(values)}"
                )
            idx = vocab.index.get(token)
            if idx is not None and idx not in found and idx not in (PAD_INDEX, UNK_INDEX):
                found[idx] = np.array([float(v) for v in values], dtype=np.float64)
    rng = derive_rng(seed, "embeddings", "oov")
    matrix = np.empty((len(vocab), dim), dtype=np.float64)
    for i in range(len(vocab)):
        if i in found:
            matrix[i] = found[i]
        else:
            matrix[i] = _oov_rows(rng, 1, dim)[0]
    matrix[PAD_INDEX] = 0.0
    n_real = max(len(vocab) - 2, 1)
    return EmbeddingMatrix(matrix=matrix, coverage=len(found) / n_real)


def encode_sequence(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Indices of the first max_len tokens, right-padded with PAD."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    out = np.full(max_len, PAD_INDEX, dtype=np.int64)
    for i, tok in enumerate(tokens[:max_len]):
        out[i] = vocab.lookup(tok)
    return out


def decode_sequence(indices: Sequence[int], vocab: Vocabulary) -> list[str]:
    """Tokens up to the first PAD; UNK indices decode to the UNK token."""
    out: list[str] = []
    for idx in indices:
        if idx == PAD_INDEX:
            break
        out.append(vocab.tokens[int(idx)])
    return out


# ---------------------------------------------------------------------------
# Lexicon scaling and fusion
# ---------------------------------------------------------------------------

class FeatureScaling(Enum):
    NONE = "none"
    LOG1P = "log1p"
    MINMAX = "minmax"

    @classmethod
    def coerce(cls, value) -> "FeatureScaling":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).casefold())
        except ValueError:
            raise ValueError(
                f"unknown scaling {value!r}; known: {[m.value for m in cls]}"
            ) from None


class LexiconScaler:
    """Applies the configured scaling to non-negative count matrices.

    MINMAX learns per-dimension minima/maxima from the training counts in
    fit(); NONE and LOG1P are stateless.  Constant dimensions map to 0
    under MINMAX.
    """

    def __init__(self, scaling=FeatureScaling.LOG1P):
        self.scaling = FeatureScaling.coerce(scaling)
        self._min: np.ndarray | None = None
        self._span: np.ndarray | None = None

    def fit(self, counts: np.ndarray) -> "LexiconScaler":
        counts = self._check(counts)
        if self.scaling is FeatureScaling.MINMAX:
            self._min = counts.min(axis=0) if len(counts) else None
            if self._min is not None:
                span = counts.max(axis=0) - self._min
                span[span == 0.0] = 1.0
                self._span = span
        return self

    def transform(self, counts: np.ndarray) -> np.ndarray:
        counts = self._check(counts)
        if self.scaling is FeatureScaling.NONE:
            return counts
        if self.scaling is FeatureScaling.LOG1P:
            return np.log1p(counts)
        if self._min is None or self._span is None:
            raise ValueError("MINMAX scaling requires fit() on training counts first")
        return (counts - self._min) / self._span

    @staticmethod
    def _check(counts) -> np.ndarray:
        arr = np.asarray(counts, dtype=np.float64)
        if np.any(arr < 0):
            raise ValueError("lexicon counts must be non-negative")
        return arr

    def state_dict(self) -> dict:
        """JSON-serializable snapshot; inverse of from_state()."""
        return {
            "scaling": self.scaling.value,
            "min": None if self._min is None else self._min.tolist(),
            "span": None if self._span is None else self._span.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "LexiconScaler":
        scaler = cls(state["scaling"])
        if state.get("min") is not None:
            scaler._min = np.asarray(state["min"], dtype=np.float64)
            scaler._span = np.asarray(state["span"], dtype=np.float64)
        return scaler


@dataclass(frozen=True)
class FusedVector:
    values: np.ndarray
    pooled_dim: int
    lexicon_dim: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.pooled_dim + self.lexicon_dim,):
            raise ValueError(
                f"fused vector length {v.shape} != {self.pooled_dim} + {self.lexicon_dim}"
            )
        object.__setattr__(self, "values", v)

    @property
    def pooled(self) -> np.ndarray:
        return self.values[: self.pooled_dim]

    @property
    def lexicon(self) -> np.ndarray:
        return self.values[self.pooled_dim :]


def fuse_features(
    pooled: np.ndarray,
    lex: np.ndarray,
    scaling=FeatureScaling.LOG1P,
    scaler: LexiconScaler | None = None,
) -> FusedVector:
    """concat(pooled, scale(lex)) for one feature vector.

    MINMAX needs a fitted scaler; NONE and LOG1P work standalone.  The
    pooled block passes through bit-identically.
    """
    pooled = np.asarray(pooled, dtype=np.float64)
    lex = np.asarray(lex, dtype=np.float64)
    if pooled.ndim != 1 or lex.ndim != 1:
        raise ValueError("fuse_features expects 1-D pooled and lexicon vectors")
    scaling = FeatureScaling.coerce(scaling)
    if scaler is None:
        scaler = LexiconScaler(scaling)
    elif scaler.scaling is not scaling:
        raise ValueError("scaler was built for a different scaling mode")
    scaled = scaler.transform(lex.reshape(1, -1))[0]
    return FusedVector(
        values=np.concatenate([pooled, scaled]),
        pooled_dim=pooled.shape[0],
        lexicon_dim=lex.shape[0],
    )


class SequenceEncoder(BaseEstimator, TransformerMixin):
    """Whitespace-tokenizing text-to-index-matrix transformer.

    fit() builds the vocabulary from the training texts; transform()
    yields an (n, max_len) int64 matrix, UNK for unseen tokens, PAD on
    the right.
    """

    def __init__(self, max_len: int = 100, min_freq: int = 1):
        self.max_len = max_len
        self.min_freq = min_freq

    def fit(self, X, y=None):
        texts = check_text_list(X)
        self.vocabulary_ = build_vocab((t.split() for t in texts), self.min_freq)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "vocabulary_"):
            raise ValueError("SequenceEncoder.transform called before fit")
        texts = check_text_list(X)
        out = np.full((len(texts), self.max_len), PAD_INDEX, dtype=np.int64)
        for r, text in enumerate(texts):
            out[r] = encode_sequence(text.split(), self.vocabulary_, self.max_len)
        return out
