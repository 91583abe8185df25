"""Emotion lexicon loading, multi-pattern counting and label mapping.

The lexicon assigns each word or phrase a subset of eight emotions (joy,
sadness, anger, fear, trust, disgust, surprise, anticipation).  Counting
scans a document once and, at each token position, consumes the longest
lexicon entry starting there (leftmost-longest, non-overlapping); every
emotion flag of a consumed entry contributes one count.  Label mappings
then project the 8 raw counts onto a dataset's label space by summing.

Matching runs on whitespace tokens after a light canonicalization (NFC,
casefold, tone-mark repositioning, underscores treated as spaces), the
same canonicalization applied to entries at load time, so lexicon
fidelity does not depend on which preprocessing passes produced the text.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_text_list, require_file
from .normalize import _reposition_tone, packaged_resource_dir
import unicodedata

EMOTIONS = (
    "joy",
    "sadness",
    "anger",
    "fear",
    "trust",
    "disgust",
    "surprise",
    "anticipation",
)
_EMOTION_SET = frozenset(EMOTIONS)
POLARITIES = ("positive", "negative")

DROP = "-"


def canonical_token(token: str) -> str:
    """NFC, casefolded, tone mark in standard position."""
    return _reposition_tone(unicodedata.normalize("NFC", token).casefold())


def tokenize_for_match(text: str) -> list[str]:
    """Whitespace tokens with underscores expanded, canonicalized."""
    return [canonical_token(t) for t in text.replace("_", " ").split()]


def canonical_entry(entry: str) -> str:
    return " ".join(tokenize_for_match(entry))


@dataclass
class EmotionLexicon:
    """entries: canonical surface form -> frozen set of emotion names."""

    entries: dict[str, frozenset[str]]
    polarity: dict[str, frozenset[str]] = field(default_factory=dict)
    merged_count: int = 0
    skipped_count: int = 0

    def __post_init__(self):
        for surface, flags in self.entries.items():
            if not surface:
                raise ValueError("empty lexicon entry")
            if not flags:
                raise ValueError(f"lexicon entry {surface!r} has no emotion flags")
            unknown = set(flags) - _EMOTION_SET
            if unknown:
                raise ValueError(f"unknown emotions {sorted(unknown)} on {surface!r}")

    def __len__(self) -> int:
        return len(self.entries)


def load_lexicon(path) -> EmotionLexicon:
    """Load a delimited lexicon file.

    The first non-comment line is a header: an entry column followed by
    the eight emotion names in any order, then optional "positive" /
    "negative" polarity columns.  Data rows carry 0/1 flags.  When a row
    has no tabs, the trailing columns are the flags and everything before
    them is the (possibly multi-word) entry.

    Duplicate entries (after canonicalization) merge by flag union and
    are tallied in ``merged_count``; rows with all-zero emotion flags are
    skipped with a warning; anything else malformed raises with its line
    number.
    """
    p = require_file(path, "emotion lexicon")
    header: list[str] | None = None
    entries: dict[str, set[str]] = {}
    polarity: dict[str, set[str]] = {}
    merged = 0
    skipped = 0
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if header is None:
            header = [c.strip().casefold() for c in line.split()]
            flag_names = header[1:]
            bad = [
                c for c in flag_names if c not in _EMOTION_SET and c not in POLARITIES
            ]
            if bad:
                raise ValueError(f"{p}:{lineno}: unknown header columns {bad}")
            missing = _EMOTION_SET - set(flag_names)
            if missing:
                raise ValueError(
                    f"{p}:{lineno}: header lacks emotion columns {sorted(missing)}"
                )
            continue
        n_flags = len(header) - 1
        if "\t" in line:
            cols = [c.strip() for c in line.split("\t")]
            if len(cols) != n_flags + 1:
                raise ValueError(
                    f"{p}:{lineno}: expected {n_flags + 1} columns, got {len(cols)}"
                )
        else:
            cols = line.split()
            if len(cols) < n_flags + 1:
                raise ValueError(
                    f"{p}:{lineno}: expected at least {n_flags + 1} columns, got {len(cols)}"
                )
        flags_raw = cols[-n_flags:]
        entry_raw = " ".join(c.strip() for c in cols[: len(cols) - n_flags]).strip()
        if not entry_raw:
            raise ValueError(f"{p}:{lineno}: empty entry")
        values = []
        for name, v in zip(header[1:], flags_raw):
            v = v.strip()
            if v not in ("0", "1"):
                raise ValueError(f"{p}:{lineno}: flag {name!r} must be 0 or 1, got {v!r}")
            values.append((name, v == "1"))
        emotions = {n for n, on in values if on and n in _EMOTION_SET}
        pols = {n for n, on in values if on and n in POLARITIES}
        if not emotions:
            warnings.warn(f"{p}:{lineno}: entry {entry_raw!r} has no emotion flags; skipped")
            skipped += 1
            continue
        surface = canonical_entry(entry_raw)
        if surface in entries:
            merged += 1
            entries[surface] |= emotions
            polarity.setdefault(surface, set()).update(pols)
        else:
            entries[surface] = set(emotions)
            if pols:
                polarity[surface] = set(pols)
    if header is None:
        raise ValueError(f"{p}: no header line found")
    return EmotionLexicon(
        entries={s: frozenset(f) for s, f in entries.items()},
        polarity={s: frozenset(v) for s, v in polarity.items() if v},
        merged_count=merged,
        skipped_count=skipped,
    )


def sample_lexicon_path() -> Path:
    return packaged_resource_dir() / "sample_emotion_lexicon.tsv"


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Match:
    start: int
    length: int
    surface: str
    emotions: frozenset[str]


class LexiconMatcher:
    """Token-level Aho-Corasick automaton with leftmost-longest selection.

    The automaton reports every entry occurrence in one pass over the
    tokens; a linear post-filter then keeps, at each position not yet
    consumed, the longest occurrence starting there and jumps past it.
    The result equals a naive quadratic scan that probes the dictionary
    at every position, which the test suite checks against directly.
    """

    def __init__(self, lexicon: EmotionLexicon):
        if len(lexicon.entries) == 0:
            raise ValueError("cannot build a matcher from an empty lexicon")
        self.lexicon = lexicon
        # nodes: transitions per node; node 0 is the root
        self._next: list[dict[str, int]] = [{}]
        # terminal payload per node: (token length, surface) when an entry ends here
        self._entry: list[tuple[int, str] | None] = [None]
        for surface in lexicon.entries:
            tokens = surface.split()
            node = 0
            for tok in tokens:
                nxt = self._next[node]
                if tok in nxt:
                    node = nxt[tok]
                else:
                    node = nxt[tok] = self._new_node()
            self._entry[node] = (len(tokens), surface)
        self._fail = self._build_failure_links()

    def _new_node(self) -> int:
        self._next.append({})
        self._entry.append(None)
        return len(self._next) - 1

    def _build_failure_links(self) -> list[int]:
        fail = [0] * len(self._next)
        queue = deque()
        for child in self._next[0].values():
            queue.append(child)
        # outputs propagate along failure links so every suffix entry is
        # reported, not only the longest one ending at a position
        self._suffix_entries: list[list[tuple[int, str]]] = [
            [e] if e else [] for e in self._entry
        ]
        while queue:
            node = queue.popleft()
            for tok, child in self._next[node].items():
                f = fail[node]
                while f and tok not in self._next[f]:
                    f = fail[f]
                fail[child] = self._next[f].get(tok, 0)
                self._suffix_entries[child] = (
                    ([self._entry[child]] if self._entry[child] else [])
                    + self._suffix_entries[fail[child]]
                )
                queue.append(child)
        return fail

    def find_all(self, tokens: list[str]) -> list[Match]:
        """Every entry occurrence (may overlap)."""
        out: list[Match] = []
        node = 0
        for j, tok in enumerate(tokens):
            while node and tok not in self._next[node]:
                node = self._fail[node]
            node = self._next[node].get(tok, 0)
            for length, surface in self._suffix_entries[node]:
                out.append(
                    Match(j - length + 1, length, surface, self.lexicon.entries[surface])
                )
        return out

    def match(self, text: str) -> list[Match]:
        """Leftmost-longest non-overlapping matches over the text's tokens."""
        tokens = tokenize_for_match(text)
        best_at: dict[int, Match] = {}
        for m in self.find_all(tokens):
            cur = best_at.get(m.start)
            if cur is None or m.length > cur.length:
                best_at[m.start] = m
        selected: list[Match] = []
        i = 0
        n = len(tokens)
        while i < n:
            m = best_at.get(i)
            if m is not None:
                selected.append(m)
                i += m.length
            else:
                i += 1
        return selected


def build_matcher(lexicon: EmotionLexicon) -> LexiconMatcher:
    return LexiconMatcher(lexicon)


@dataclass(frozen=True)
class EmotionCountVector:
    counts: dict[str, int]

    def __post_init__(self):
        object.__setattr__(
            self, "counts", {e: int(self.counts.get(e, 0)) for e in EMOTIONS}
        )
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("emotion counts must be non-negative")

    def __getitem__(self, emotion: str) -> int:
        return self.counts[emotion]

    def total(self) -> int:
        return sum(self.counts.values())

    def to_array(self) -> np.ndarray:
        return np.array([self.counts[e] for e in EMOTIONS], dtype=np.int64)

    @classmethod
    def zero(cls) -> "EmotionCountVector":
        return cls({})


def count_emotions(matcher: LexiconMatcher, text: str) -> EmotionCountVector:
    """Raw per-emotion occurrence counts for one document.

    Every selected match increments each of its entry's emotion flags by
    one; an entry flagged with several emotions contributes to all of
    them.  Empty text gives the zero vector.
    """
    counts = {e: 0 for e in EMOTIONS}
    for m in matcher.match(text):
        for e in m.emotions:
            counts[e] += 1
    return EmotionCountVector(counts)


# ---------------------------------------------------------------------------
# Label mappings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelMapping:
    """Projection of the 8 emotion counts onto a dataset's label space.

    ``rules`` maps every emotion to a target dimension name or to None
    (dropped).  ``targets`` fixes the output dimension order.
    """

    scheme: str
    targets: tuple[str, ...]
    rules: dict[str, str | None]

    def __post_init__(self):
        missing = _EMOTION_SET - set(self.rules)
        if missing:
            raise ValueError(
                f"mapping {self.scheme!r} lacks rules for {sorted(missing)}"
            )
        unknown = set(self.rules) - _EMOTION_SET
        if unknown:
            raise ValueError(f"mapping {self.scheme!r} has unknown emotions {sorted(unknown)}")
        if len(set(self.targets)) != len(self.targets) or not self.targets:
            raise ValueError(f"mapping {self.scheme!r} targets must be unique and non-empty")
        for emo, tgt in self.rules.items():
            if tgt is not None and tgt not in self.targets:
                raise ValueError(
                    f"mapping {self.scheme!r}: rule {emo} -> {tgt!r} not in targets"
                )

    def matrix(self) -> np.ndarray:
        """(8, n_targets) 0/1 projection matrix in EMOTIONS x targets order."""
        m = np.zeros((len(EMOTIONS), len(self.targets)), dtype=np.int64)
        index = {t: j for j, t in enumerate(self.targets)}
        for i, emo in enumerate(EMOTIONS):
            tgt = self.rules[emo]
            if tgt is not None:
                m[i, index[tgt]] = 1
        return m


def map_labels(counts: EmotionCountVector, mapping: LabelMapping) -> dict[str, int]:
    """Target dimension -> summed count, in the mapping's target order."""
    out = {t: 0 for t in mapping.targets}
    for emo in EMOTIONS:
        tgt = mapping.rules[emo]
        if tgt is not None:
            out[tgt] += counts[emo]
    return out


def load_mapping(path, scheme: str | None = None) -> LabelMapping:
    """Load a mapping table.

    Lines are "emotion<TAB>target"; the special target "-" drops the
    emotion.  An optional "order" line ("order<TAB>T1<TAB>T2...") fixes
    the output dimension order; otherwise targets appear in first-use
    order.
    """
    p = require_file(path, "label mapping")
    rules: dict[str, str | None] = {}
    order: list[str] | None = None
    first_use: list[str] = []
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = [c.strip() for c in (line.split("\t") if "\t" in line else line.split())]
        if cols[0].casefold() == "order":
            order = cols[1:]
            continue
        if len(cols) != 2:
            raise ValueError(f"{p}:{lineno}: expected 'emotion<TAB>target', got {raw!r}")
        emo = cols[0].casefold()
        if emo not in _EMOTION_SET:
            raise ValueError(f"{p}:{lineno}: unknown emotion {cols[0]!r}")
        if emo in rules:
            raise ValueError(f"{p}:{lineno}: duplicate rule for {cols[0]!r}")
        tgt = None if cols[1] == DROP else cols[1]
        rules[emo] = tgt
        if tgt is not None and tgt not in first_use:
            first_use.append(tgt)
    targets = tuple(order) if order is not None else tuple(first_use)
    return LabelMapping(scheme=scheme or p.stem, targets=targets, rules=rules)


_BUILTIN_MAPPING_FILES = {
    "vsmec6": "mapping_vsmec6.tsv",
    "vsfc3": "mapping_vsfc3.tsv",
    "vihsd2": "mapping_vihsd2.tsv",
}


def builtin_mapping(scheme: str) -> LabelMapping:
    key = scheme.casefold()
    if key not in _BUILTIN_MAPPING_FILES:
        raise ValueError(
            f"unknown mapping scheme {scheme!r}; known: {sorted(_BUILTIN_MAPPING_FILES)}"
        )
    return load_mapping(packaged_resource_dir() / _BUILTIN_MAPPING_FILES[key], scheme=key)


# ---------------------------------------------------------------------------
# Estimator
# ---------------------------------------------------------------------------

class EmotionCountVectorizer(BaseEstimator, TransformerMixin):
    """Transform texts into per-emotion (optionally label-mapped) count rows.

    Parameters
    ----------
    lexicon : EmotionLexicon, str path, or None
        None loads the packaged sample lexicon.
    mapping : LabelMapping, scheme name, or None
        None keeps the raw 8 emotion dimensions.
    """

    def __init__(self, lexicon=None, mapping=None):
        self.lexicon = lexicon
        self.mapping = mapping

    def _resolve(self):
        lex = self.lexicon
        if lex is None:
            lex = load_lexicon(sample_lexicon_path())
        elif not isinstance(lex, EmotionLexicon):
            lex = load_lexicon(lex)
        mapping = self.mapping
        if isinstance(mapping, str):
            mapping = builtin_mapping(mapping)
        return lex, mapping

    def fit(self, X=None, y=None):
        lex, mapping = self._resolve()
        self.matcher_ = build_matcher(lex)
        self.mapping_ = mapping
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "matcher_"):
            self.fit()
        rows = []
        for text in check_text_list(X):
            counts = count_emotions(self.matcher_, text)
            if self.mapping_ is None:
                rows.append(counts.to_array())
            else:
                mapped = map_labels(counts, self.mapping_)
                rows.append(np.array([mapped[t] for t in self.mapping_.targets], dtype=np.int64))
        width = len(EMOTIONS) if self.mapping_ is None else len(self.mapping_.targets)
        return np.array(rows, dtype=np.int64).reshape(len(rows), width)

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        if not hasattr(self, "matcher_"):
            self.fit()
        names = EMOTIONS if self.mapping_ is None else self.mapping_.targets
        return np.asarray(names, dtype=object)
