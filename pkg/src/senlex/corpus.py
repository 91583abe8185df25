"""Labeled corpus loading, descriptive statistics and deterministic splits.

Three dataset schemas are built in (an emotion corpus with 7 labels, a
sentiment corpus and a hate-speech corpus with 3 each) plus a custom
schema for arbitrary label sets.  Files are delimited text with a header
row; the column layout and delimiter live in a small format descriptor so
differently shaped datasets cost one config edit, not code.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ._validation import check_ratios, require_file
from .normalize import packaged_resource_dir
from .randomness import derive_rng

VSMEC_LABELS = ("FEAR", "SURPRISE", "ANGER", "ENJOYMENT", "SADNESS", "DISGUST", "OTHER")
VSFC_LABELS = ("POSITIVE", "NEGATIVE", "NEUTRAL")
VIHSD_LABELS = ("CLEAN", "OFFENSIVE", "HATE")

_FIXED_LABEL_COUNTS = {"VSMEC": 7, "VSFC": 3, "VIHSD": 3}


@dataclass(frozen=True)
class CorpusSchema:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if self.name not in (*_FIXED_LABEL_COUNTS, "CUSTOM"):
            raise ValueError(f"unknown schema name {self.name!r}")
        expected = _FIXED_LABEL_COUNTS.get(self.name)
        if expected is not None and len(self.labels) != expected:
            raise ValueError(
                f"schema {self.name} must have {expected} labels, got {len(self.labels)}"
            )
        if len(set(l.casefold() for l in self.labels)) != len(self.labels):
            raise ValueError("schema labels must be unique (case-insensitive)")
        if not self.labels:
            raise ValueError("schema needs at least one label")

    @classmethod
    def vsmec(cls) -> "CorpusSchema":
        return cls("VSMEC", VSMEC_LABELS)

    @classmethod
    def vsfc(cls) -> "CorpusSchema":
        return cls("VSFC", VSFC_LABELS)

    @classmethod
    def vihsd(cls) -> "CorpusSchema":
        return cls("VIHSD", VIHSD_LABELS)

    @classmethod
    def custom(cls, labels) -> "CorpusSchema":
        return cls("CUSTOM", tuple(labels))

    @classmethod
    def by_name(cls, name: str, labels=None) -> "CorpusSchema":
        key = name.strip().casefold()
        if key == "vsmec":
            return cls.vsmec()
        if key == "vsfc":
            return cls.vsfc()
        if key == "vihsd":
            return cls.vihsd()
        if key == "custom":
            if not labels:
                raise ValueError("custom schema needs an explicit label list")
            return cls.custom(labels)
        raise ValueError(f"unknown schema {name!r}")

    def canonical_label(self, raw: str) -> str:
        """Map a raw label to its declared spelling, case-insensitively."""
        want = raw.strip().casefold()
        for label in self.labels:
            if label.casefold() == want:
                return label
        raise ValueError(
            f"unknown label {raw!r} for schema {self.name}; expected one of {list(self.labels)}"
        )


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    label: str


@dataclass(frozen=True)
class CorpusFormat:
    """Where the text/label/id columns live in a delimited file."""

    delimiter: str = "\t"
    text_column: str = "text"
    label_column: str = "label"
    id_column: str | None = None


@dataclass(frozen=True)
class CorpusStats:
    size: int
    avg_length: float
    label_distribution: dict[str, float]  # label -> percentage of documents

    def __post_init__(self):
        total = sum(self.label_distribution.values())
        if self.size > 0 and abs(total - 100.0) > 0.01:
            raise ValueError(f"label percentages sum to {total}, expected 100")


def load_corpus(path, schema: CorpusSchema, fmt: CorpusFormat | None = None) -> list[Document]:
    """Load documents from a delimited file with a header row.

    Row order is preserved.  Malformed rows, labels outside the schema and
    files without data rows all raise with enough context to find the
    offending line.
    """
    fmt = fmt or CorpusFormat()
    p = require_file(path, "corpus file")
    docs: list[Document] = []
    with open(p, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=fmt.delimiter)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{p}: empty file")
        columns = {name.strip().casefold(): i for i, name in enumerate(header)}

        def col_index(name: str) -> int:
            idx = columns.get(name.strip().casefold())
            if idx is None:
                raise ValueError(
                    f"{p}: no column {name!r} in header {header}"
                )
            return idx

        text_i = col_index(fmt.text_column)
        label_i = col_index(fmt.label_column)
        id_i = col_index(fmt.id_column) if fmt.id_column else None
        width = max(text_i, label_i, id_i if id_i is not None else 0) + 1
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < width:
                raise ValueError(
                    f"{p}:{rowno}: expected at least {width} columns, got {len(row)}"
                )
            try:
                label = schema.canonical_label(row[label_i])
            except ValueError as e:
                raise ValueError(f"{p}:{rowno}: {e}") from None
            doc_id = row[id_i].strip() if id_i is not None else str(len(docs))
            docs.append(Document(id=doc_id, text=row[text_i], label=label))
    if not docs:
        raise ValueError(f"{p}: no data rows")
    return docs


def sample_corpus_path() -> Path:
    return packaged_resource_dir() / "sample_corpus.tsv"


def corpus_stats(docs: list[Document], schema: CorpusSchema) -> CorpusStats:
    """Size, mean whitespace-token length of the raw text, and label mix.

    Lengths are computed on the text exactly as loaded, before any
    normalization, since they describe the dataset itself.
    """
    if not docs:
        raise ValueError("cannot compute statistics of an empty corpus")
    lengths = [len(d.text.split()) for d in docs]
    counts = {label: 0 for label in schema.labels}
    for d in docs:
        counts[d.label] += 1
    n = len(docs)
    return CorpusStats(
        size=n,
        avg_length=float(sum(lengths)) / n,
        label_distribution={l: 100.0 * counts[l] / n for l in schema.labels},
    )


def _largest_remainder(n: int, ratios: tuple[float, ...]) -> list[int]:
    """Integer allocation of n items proportional to ratios, summing to n."""
    quotas = [n * r for r in ratios]
    base = [int(q) for q in quotas]
    short = n - sum(base)
    by_fraction = sorted(
        range(len(ratios)), key=lambda i: (quotas[i] - base[i], -i), reverse=True
    )
    for i in by_fraction[:short]:
        base[i] += 1
    return base


def split_corpus(
    docs: list[Document],
    ratios=(0.8, 0.1, 0.1),
    seed: int = 42,
    stratified: bool = True,
) -> tuple[list[Document], list[Document], list[Document]]:
    """Deterministic (train, dev, test) partition.

    The partition is exact: every document lands in exactly one part.
    Stratified mode allocates each label separately, keeping every part
    within one document of its per-class quota; classes smaller than the
    number of parts are rejected.
    """
    ratios = check_ratios(ratios)
    if any(r <= 0 for r in ratios):
        raise ValueError(f"split ratios must be positive, got {ratios}")
    parts: list[list[Document]] = [[], [], []]
    if stratified:
        by_label: dict[str, list[Document]] = {}
        for d in docs:
            by_label.setdefault(d.label, []).append(d)
        for label in sorted(by_label):
            group = by_label[label]
            if len(group) < len(ratios):
                raise ValueError(
                    f"label {label!r} has {len(group)} documents, "
                    f"fewer than the {len(ratios)} split parts"
                )
            rng = derive_rng(seed, "split", label)
            order = rng.permutation(len(group))
            alloc = _largest_remainder(len(group), ratios)
            start = 0
            for part, k in zip(parts, alloc):
                part.extend(group[i] for i in order[start : start + k])
                start += k
    else:
        rng = derive_rng(seed, "split")
        order = rng.permutation(len(docs))
        alloc = _largest_remainder(len(docs), ratios)
        start = 0
        for part, k in zip(parts, alloc):
            part.extend(docs[i] for i in order[start : start + k])
            start += k
    return parts[0], parts[1], parts[2]
