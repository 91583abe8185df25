"""Composable normalization passes for Vietnamese social-media text.

Five passes, each individually toggleable and always applied in ascending
order:

    1. word standardization: Unicode composition, squeezing of elongated
       character runs, trailing-vowel de-duplication against a known
       vocabulary, and tone-mark repositioning to the dictionary-standard
       slot ("tuỳ" -> "tùy", "qúy" -> "quý")
    2. emoticon-to-emoji conversion (":)" -> 🙂)
    3. misspelling/acronym correction from a replacement dictionary
    4. teencode expansion plus optional stopword removal
    5. word segmentation: greedy longest dictionary match joins consecutive
       syllables with underscores ("sức khỏe" -> "sức_khỏe")

Every pass is a pure function and a fixed point of itself, so running a
pipeline twice equals running it once.  That idempotence rests on a hard
dictionary invariant enforced at load time: no canonical form may contain
any surface form of the same dictionary.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources as _importlib_resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_text_list, require_file

TECHNIQUE_INDICES = (1, 2, 3, 4, 5)

# Vietnamese tone marks as combining characters (NFD).
_TONE_MARKS = frozenset({"́", "̀", "̉", "̃", "̣"})
_VOWEL_BASES = frozenset("aăâeêioôơuưy")
# ê and ơ attract the tone mark regardless of position in the vowel group.
_PRIVILEGED_VOWELS = frozenset("êơ")

# Runs of >= 3 identical letters are never legitimate Vietnamese; runs of
# >= 3 identical ASCII punctuation are elongated emoticons (":)))").
# Digits are exempt so numbers survive, and non-ASCII symbols (emoji) are
# exempt so a pass over already-converted text is a no-op.
_LETTER_RUN_RE = re.compile(r"([^\W\d_])\1{2,}")
_PUNCT_RUN_RE = re.compile(r"([!-/:-@\[-\^`{-~])\1{2,}")
_LETTER_SEQ_RE = re.compile(r"[^\W\d_]+")
_WS_SPLIT_RE = re.compile(r"(\s+)")


class DictionaryKind(Enum):
    MISSPELLING = "misspelling"
    ACRONYM = "acronym"
    TEENCODE = "teencode"
    EMOTICON = "emoticon"


class TechniqueSet:
    """An unordered selection of passes; application order is always 1..5."""

    def __init__(self, enabled: Iterable[int] = ()):
        indices = frozenset(int(i) for i in enabled)
        bad = indices - set(TECHNIQUE_INDICES)
        if bad:
            raise ValueError(f"unknown technique indices: {sorted(bad)}")
        self.enabled = indices

    @classmethod
    def from_string(cls, spec: str) -> "TechniqueSet":
        """Parse a combination string such as "1+2+3"; "" means no passes."""
        spec = spec.strip()
        if spec == "" or spec.lower() == "original":
            return cls()
        try:
            return cls(int(p) for p in spec.split("+"))
        except ValueError:
            raise ValueError(f"cannot parse technique string {spec!r}") from None

    @classmethod
    def coerce(cls, value) -> "TechniqueSet":
        if isinstance(value, TechniqueSet):
            return value
        if isinstance(value, str):
            return cls.from_string(value)
        return cls(value)

    def __iter__(self):
        return iter(sorted(self.enabled))

    def __contains__(self, index: int) -> bool:
        return index in self.enabled

    def __eq__(self, other) -> bool:
        return isinstance(other, TechniqueSet) and self.enabled == other.enabled

    def __hash__(self) -> int:
        return hash(self.enabled)

    def __repr__(self) -> str:
        return f"TechniqueSet({str(self)!r})"

    def __str__(self) -> str:
        if not self.enabled:
            return "original"
        return "+".join(str(i) for i in sorted(self.enabled))


def _token_ngrams(tokens: tuple[str, ...]):
    for i in range(len(tokens)):
        for j in range(i + 1, len(tokens) + 1):
            yield tokens[i:j]


class ReplacementDictionary:
    """Surface -> canonical replacement table.

    Canonical forms must be closed against the dictionary's own surface
    forms (for token dictionaries: no token n-gram of a canonical may be a
    surface form; for emoticon dictionaries: no surface may be a substring
    of a canonical).  A single replacement pass is then idempotent.
    """

    def __init__(self, entries: Mapping[str, str], kind: DictionaryKind):
        self.kind = kind
        self.entries = dict(entries)
        for surface, canonical in self.entries.items():
            if not surface or not canonical:
                raise ValueError("empty surface or canonical form in dictionary")
        self._check_closure()
        self._index: dict[str, list[tuple[tuple[str, ...], str]]] | None = None
        self._regex: re.Pattern | None = None

    def _check_closure(self) -> None:
        surfaces = set(self.entries)
        if self.kind is DictionaryKind.EMOTICON:
            for surface, canonical in self.entries.items():
                for s in surfaces:
                    if s in canonical:
                        raise ValueError(
                            f"canonical {canonical!r} contains surface {s!r}; "
                            "replacement would not be idempotent"
                        )
            return
        token_surfaces = {tuple(s.split()) for s in surfaces}
        for canonical in self.entries.values():
            for gram in _token_ngrams(tuple(canonical.split())):
                if gram in token_surfaces:
                    raise ValueError(
                        f"canonical {canonical!r} contains surface {' '.join(gram)!r}; "
                        "replacement would not be idempotent"
                    )

    @property
    def canonical_vocab(self) -> frozenset[str]:
        """Lowercased tokens of all canonical forms."""
        vocab = set()
        for canonical in self.entries.values():
            vocab.update(t.casefold() for t in canonical.split())
        return frozenset(vocab)

    def token_index(self):
        """first token -> [(surface tokens, canonical)], longest surface first."""
        if self._index is None:
            index: dict[str, list[tuple[tuple[str, ...], str]]] = {}
            for surface, canonical in self.entries.items():
                tokens = tuple(surface.split())
                index.setdefault(tokens[0], []).append((tokens, canonical))
            for cands in index.values():
                cands.sort(key=lambda tc: len(tc[0]), reverse=True)
            self._index = index
        return self._index

    def regex(self) -> re.Pattern:
        """Alternation over surfaces, longest first, letter-boundary guarded."""
        if self._regex is None:
            parts = []
            for surface in sorted(self.entries, key=len, reverse=True):
                pat = re.escape(surface)
                # Surfaces with alphanumeric edges only match at word
                # boundaries, so "xD" stays out of "xDương" and ":0" out
                # of "10:00".
                if surface[0].isalnum():
                    pat = r"(?<!\w)" + pat
                if surface[-1].isalnum():
                    pat = pat + r"(?!\w)"
                parts.append(pat)
            self._regex = re.compile("|".join(parts))
        return self._regex

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class StopwordSet:
    words: frozenset[str]

    def __contains__(self, token: str) -> bool:
        return token.casefold() in self.words

    def __len__(self) -> int:
        return len(self.words)


class SegmentationLexicon:
    """Multi-syllable compound words for the greedy segmenter."""

    def __init__(self, phrases: Iterable[str]):
        entries = set()
        for phrase in phrases:
            tokens = tuple(t.casefold() for t in phrase.replace("_", " ").split())
            if len(tokens) >= 2:
                entries.add(tokens)
        self.entries = frozenset(entries)
        self.max_tokens = max((len(e) for e in entries), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tokens: tuple[str, ...]) -> bool:
        return tokens in self.entries


def load_replacements(path, kind: DictionaryKind) -> ReplacementDictionary:
    """Load a two-column (surface<TAB>canonical) UTF-8 dictionary file.

    Blank lines and lines starting with '#' are skipped.
    """
    p = require_file(path, f"{kind.value} dictionary")
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t") if "\t" in line else line.split(None, 1)
        if len(cols) != 2 or not cols[0].strip() or not cols[1].strip():
            raise ValueError(f"{p}:{lineno}: expected 'surface<TAB>canonical', got {raw!r}")
        entries[cols[0].strip()] = cols[1].strip()
    return ReplacementDictionary(entries, kind)


def load_stopwords(path) -> StopwordSet:
    p = require_file(path, "stopword list")
    words = set()
    for raw in p.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            words.add(line.casefold())
    return StopwordSet(frozenset(words))


def load_segmentation(path) -> SegmentationLexicon:
    p = require_file(path, "segmentation lexicon")
    phrases = [
        line.strip()
        for line in p.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.strip().startswith("#")
    ]
    return SegmentationLexicon(phrases)


def packaged_resource_dir() -> Path:
    return Path(str(_importlib_resources.files("senlex") / "resources"))


@dataclass
class NormalizerResources:
    """Dictionaries the passes draw on; any subset may be present."""

    misspellings: ReplacementDictionary | None = None
    emoticons: ReplacementDictionary | None = None
    teencode: ReplacementDictionary | None = None
    stopwords: StopwordSet | None = None
    segmentation: SegmentationLexicon | None = None
    # Adapter seam: an external word segmenter replaces the built-in greedy
    # matcher when provided.  Must map text -> text.
    segmenter: Callable[[str], str] | None = None

    @classmethod
    def from_paths(
        cls,
        misspellings=None,
        emoticons=None,
        teencode=None,
        stopwords=None,
        segmentation=None,
        segmenter: Callable[[str], str] | None = None,
    ) -> "NormalizerResources":
        return cls(
            misspellings=(
                load_replacements(misspellings, DictionaryKind.MISSPELLING)
                if misspellings
                else None
            ),
            emoticons=(
                load_replacements(emoticons, DictionaryKind.EMOTICON) if emoticons else None
            ),
            teencode=(
                load_replacements(teencode, DictionaryKind.TEENCODE) if teencode else None
            ),
            stopwords=load_stopwords(stopwords) if stopwords else None,
            segmentation=load_segmentation(segmentation) if segmentation else None,
            segmenter=segmenter,
        )

    @classmethod
    def default(cls) -> "NormalizerResources":
        """The dictionaries shipped with the package."""
        d = packaged_resource_dir()
        return cls.from_paths(
            misspellings=d / "misspellings.tsv",
            emoticons=d / "emoticons.tsv",
            teencode=d / "teencode.tsv",
            stopwords=d / "stopwords.txt",
            segmentation=d / "segmentation_words.txt",
        )


# ---------------------------------------------------------------------------
# Technique 1: word standardization
# ---------------------------------------------------------------------------

def _split_tone(ch: str) -> tuple[str, list[str]]:
    nfd = unicodedata.normalize("NFD", ch)
    tones = [c for c in nfd if c in _TONE_MARKS]
    base = unicodedata.normalize("NFC", "".join(c for c in nfd if c not in _TONE_MARKS))
    return base, tones


def _add_tone(ch: str, tone: str) -> str:
    return unicodedata.normalize("NFC", unicodedata.normalize("NFD", ch) + tone)


@lru_cache(maxsize=65536)
def _reposition_tone(token: str) -> str:
    """Move a syllable's tone mark to the standard dictionary position.

    Tokens without exactly one tone mark, or whose base letters do not form
    a single vowel group, are returned unchanged.  Placement rules:

      - "qu"/"gi" onsets absorb the glide, so the mark never lands on it
      - ê and ơ carry the mark whenever present
      - with a coda, or in a three-vowel group, the second vowel carries it
      - a final two-vowel group carries it on the first vowel ("tùy", "hòa")
    """
    chars = list(token)
    bases: list[str] = []
    tone_marks: list[str] = []
    for ch in chars:
        base, tones = _split_tone(ch)
        bases.append(base)
        tone_marks.extend(tones)
    if len(tone_marks) != 1:
        return token
    tone = tone_marks[0]

    is_vowel = [b.casefold() in _VOWEL_BASES for b in bases]
    runs: list[tuple[int, int]] = []
    start = None
    for i, v in enumerate(is_vowel):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(bases)))
    if len(runs) != 1:
        return token
    lo, hi = runs[0]
    nucleus = list(range(lo, hi))

    if len(nucleus) > 1 and lo > 0:
        first = bases[nucleus[0]].casefold()
        prev = bases[lo - 1].casefold()
        if (first == "u" and prev == "q") or (first == "i" and prev == "g"):
            nucleus = nucleus[1:]

    privileged = [i for i in nucleus if bases[i].casefold() in _PRIVILEGED_VOWELS]
    if len(nucleus) == 1:
        target = nucleus[0]
    elif privileged:
        target = privileged[-1]
    elif hi < len(bases):  # coda present
        target = nucleus[1]
    elif len(nucleus) == 3:
        target = nucleus[1]
    else:
        target = nucleus[0]

    return "".join(
        _add_tone(b, tone) if i == target else b for i, b in enumerate(bases)
    )


def _squeeze_trailing_vowels(token: str, known_words: frozenset[str]) -> str:
    """Collapse a doubled trailing vowel when the collapsed form is a known word."""
    if len(token) < 3 or not known_words:
        return token
    last = token[-1]
    if last != token[-2] or _split_tone(last)[0].casefold() not in _VOWEL_BASES:
        return token
    candidate = token[:-1]
    if _reposition_tone(candidate).casefold() in known_words:
        return candidate
    return token


def standardize_words(text: str, known_words: frozenset[str] | None = None) -> str:
    """Technique 1.

    Composes to NFC, squeezes elongated runs (>= 3 identical letters or
    ASCII punctuation -> 1), resolves doubled trailing vowels against
    ``known_words``, and repositions tone marks.  Total function: any
    Unicode input is accepted.
    """
    text = unicodedata.normalize("NFC", text)
    text = _LETTER_RUN_RE.sub(r"\1", text)
    text = _PUNCT_RUN_RE.sub(r"\1", text)
    vocab = known_words or frozenset()

    def fix_word(m: re.Match) -> str:
        token = m.group(0)
        if vocab:
            token = _squeeze_trailing_vowels(token, vocab)
        return _reposition_tone(token)

    return _LETTER_SEQ_RE.sub(fix_word, text)


# ---------------------------------------------------------------------------
# Technique 2: emoticons -> emoji
# ---------------------------------------------------------------------------

def emoticons_to_emoji(text: str, dictionary: ReplacementDictionary) -> str:
    """Technique 2: replace every dictionary emoticon by its emoji.

    Longest surface form wins at a given position; emoticons with letter
    edges ("xD") only match at letter boundaries.
    """
    if not dictionary.entries:
        return text
    return dictionary.regex().sub(lambda m: dictionary.entries[m.group(0)], text)


# ---------------------------------------------------------------------------
# Token-level replacement core shared by techniques 3, 4 and 5
# ---------------------------------------------------------------------------

def _scan_tokens(text: str, match_at) -> str:
    """Rewrite ``text`` by a leftmost-longest scan over whitespace tokens.

    ``match_at(words, i)`` returns ``(consumed, replacement)`` or None.
    Unmatched tokens and all untouched whitespace survive byte-identically;
    whitespace inside a matched span collapses into the replacement.
    """
    parts = _WS_SPLIT_RE.split(text)
    words = parts[0::2]
    seps = parts[1::2]
    out: list[str] = []
    i = 0
    n = len(words)
    while i < n:
        match = match_at(words, i) if words[i] else None
        if match is not None:
            consumed, replacement = match
            out.append(replacement)
            i += consumed
        else:
            out.append(words[i])
            i += 1
        if i - 1 < len(seps):
            out.append(seps[i - 1])
    return "".join(out)


def _replace_tokens(text: str, dictionary: ReplacementDictionary) -> str:
    index = dictionary.token_index()

    def match_at(words, i):
        for surface_tokens, canonical in index.get(words[i], ()):
            k = len(surface_tokens)
            if k <= len(words) - i and tuple(words[i : i + k]) == surface_tokens:
                return k, canonical
        return None

    return _scan_tokens(text, match_at)


def correct_misspellings(text: str, dictionary: ReplacementDictionary) -> str:
    """Technique 3: canonicalize misspellings and acronyms at token boundaries."""
    return _replace_tokens(text, dictionary)


def remove_stopword_tokens(text: str, stopwords: StopwordSet) -> str:
    parts = _WS_SPLIT_RE.split(text)
    words = parts[0::2]
    seps = parts[1::2]
    survivors = [
        (w, seps[i] if i < len(seps) else None)
        for i, w in enumerate(words)
        if not (w and w in stopwords)
    ]
    out: list[str] = []
    for j, (w, sep) in enumerate(survivors):
        out.append(w)
        if sep is not None and j < len(survivors) - 1:
            out.append(sep)
    return "".join(out)


def apply_teencode_stopwords(
    text: str,
    teencode: ReplacementDictionary,
    stopwords: StopwordSet | None = None,
    remove_stopwords: bool = False,
) -> str:
    """Technique 4: expand teencode, then optionally drop stopword tokens."""
    text = _replace_tokens(text, teencode)
    if remove_stopwords:
        if stopwords is None:
            raise ValueError("stopword removal requested but no stopword set given")
        text = remove_stopword_tokens(text, stopwords)
    return text


def segment_words(text: str, lexicon: SegmentationLexicon) -> str:
    """Technique 5: greedy longest-match compound joining.

    At each token, the longest lexicon entry starting there is joined with
    underscores; the scan then continues past it (leftmost-longest).
    """
    if lexicon.max_tokens < 2:
        return text

    def match_at(words, i):
        limit = min(lexicon.max_tokens, len(words) - i)
        for k in range(limit, 1, -1):
            span = tuple(w.casefold() for w in words[i : i + k])
            if span in lexicon.entries:
                return k, "_".join(words[i : i + k])
        return None

    return _scan_tokens(text, match_at)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

_REQUIRED_RESOURCES = {
    2: ("emoticons", "emoticon dictionary"),
    3: ("misspellings", "misspelling dictionary"),
    4: ("teencode", "teencode dictionary"),
}


def check_resources(
    techniques: TechniqueSet,
    resources: NormalizerResources,
    remove_stopwords: bool = False,
) -> None:
    """Raise ValueError when an enabled technique lacks its dictionary."""
    for index, (attr, label) in _REQUIRED_RESOURCES.items():
        if index in techniques and getattr(resources, attr) is None:
            raise ValueError(f"technique {index} enabled but no {label} provided")
    if 4 in techniques and remove_stopwords and resources.stopwords is None:
        raise ValueError("technique 4 with stopword removal needs a stopword set")
    if 5 in techniques and resources.segmentation is None and resources.segmenter is None:
        raise ValueError("technique 5 enabled but no segmentation lexicon or segmenter")


def run_pipeline(
    text: str,
    techniques,
    resources: NormalizerResources,
    remove_stopwords: bool = False,
) -> str:
    """Apply the enabled techniques in ascending order.

    Pure function of its inputs; applying it twice equals applying it once.
    """
    ts = TechniqueSet.coerce(techniques)
    check_resources(ts, resources, remove_stopwords)
    for index in ts:
        if index == 1:
            vocab = (
                resources.misspellings.canonical_vocab
                if resources.misspellings is not None
                else None
            )
            text = standardize_words(text, vocab)
        elif index == 2:
            text = emoticons_to_emoji(text, resources.emoticons)
        elif index == 3:
            text = correct_misspellings(text, resources.misspellings)
        elif index == 4:
            text = apply_teencode_stopwords(
                text, resources.teencode, resources.stopwords, remove_stopwords
            )
        elif index == 5:
            if resources.segmenter is not None:
                text = resources.segmenter(text)
            else:
                text = segment_words(text, resources.segmentation)
    return text


class TextNormalizer(BaseEstimator, TransformerMixin):
    """Stateless transformer applying a technique combination to raw texts.

    Parameters
    ----------
    techniques : str or iterable of int, default "1+2+3"
        Combination string ("1+2+3", "original") or technique indices.
    resources : NormalizerResources or None
        Dictionaries to use; None loads the packaged defaults.
    remove_stopwords : bool, default False
        Whether technique 4 drops stopword tokens after teencode expansion.
    """

    def __init__(self, techniques="1+2+3", resources=None, remove_stopwords=False):
        self.techniques = techniques
        self.resources = resources
        self.remove_stopwords = remove_stopwords

    def _setup(self):
        ts = TechniqueSet.coerce(self.techniques)
        res = self.resources if self.resources is not None else _default_resources()
        check_resources(ts, res, self.remove_stopwords)
        return ts, res

    def fit(self, X=None, y=None):
        self._setup()
        return self

    def transform(self, X) -> list[str]:
        ts, res = self._setup()
        return [
            run_pipeline(t, ts, res, self.remove_stopwords)
            for t in check_text_list(X)
        ]


_DEFAULT_RESOURCES: NormalizerResources | None = None


def _default_resources() -> NormalizerResources:
    global _DEFAULT_RESOURCES
    if _DEFAULT_RESOURCES is None:
        _DEFAULT_RESOURCES = NormalizerResources.default()
    return _DEFAULT_RESOURCES
