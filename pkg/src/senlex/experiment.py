"""Experiment orchestration: flat config files, the end-to-end training
pipeline (normalize, count, encode, train), checkpoint persistence with full
provenance, and the preprocessing/lexicon ablation grid.

Every stage draws its randomness from the one experiment seed through named
substreams, so changing one stage's behavior never shifts another's stream.
"""

from __future__ import annotations

import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ._validation import require_file
from .corpus import CorpusFormat, CorpusSchema, Document
from .evaluation import (
    AblationCell,
    AblationReport,
    ConfusionMatrix,
    EvalReport,
    confusion_matrix,
    metrics,
)
from .features import (
    EmbeddingMatrix,
    LexiconScaler,
    Vocabulary,
    build_vocab,
    encode_sequence,
    load_embeddings,
    random_embeddings,
)
from .lexicon import (
    EmotionCountVectorizer,
    EmotionLexicon,
    LabelMapping,
    builtin_mapping,
    load_lexicon,
    load_mapping,
    sample_lexicon_path,
)
from .models import (
    ModelConfig,
    ModelParams,
    TrainHistory,
    load_checkpoint,
    predict,
    save_checkpoint,
    train_model,
)
from .normalize import (
    NormalizerResources,
    TechniqueSet,
    check_resources,
    packaged_resource_dir,
    run_pipeline,
)
from .randomness import derive_seed

__all__ = [
    "ExperimentConfig",
    "TrainedPipeline",
    "load_config_file",
    "config_from_mapping",
    "load_experiment_config",
    "train_pipeline",
    "evaluate_pipeline",
    "save_pipeline",
    "load_pipeline",
    "run_ablation",
    "atomic_write_text",
]

_NONE_WORDS = {"", "none", "off", "null"}
_BUILTIN_MAPPINGS = {"vsmec6", "vsfc3", "vihsd2"}
_DICTIONARY_KEYS = ("misspellings", "emoticons", "teencode", "stopwords", "segmentation")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, resolvable from a flat config file."""

    dataset: str | None = None
    schema: str = "vsmec"
    labels: tuple[str, ...] | None = None
    text_column: str = "text"
    label_column: str = "label"
    id_column: str | None = None
    delimiter: str = "\t"
    techniques: str = "1+2+3"
    remove_stopwords: bool = False
    misspellings: str | None = None
    emoticons: str | None = None
    teencode: str | None = None
    stopwords: str | None = None
    segmentation: str | None = None
    lexicon: str | None = "sample"
    mapping: str | None = None
    scaling: str = "log1p"
    embeddings: str | None = None
    embedding_dim: int = 64
    min_frequency: int = 1
    model: str = "textcnn"
    max_len: int = 100
    filter_widths: tuple[int, ...] = (1, 2, 3, 5)
    filters_per_width: int = 32
    dropout: float = 0.2
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 20
    patience: int = 5
    trainable_embeddings: bool = True
    class_weight: str | None = None
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    stratified: bool = True
    out_dir: str = "runs"
    seed: int = 42

    def __post_init__(self) -> None:
        TechniqueSet.coerce(self.techniques)  # fail early on bad strings
        if self.class_weight is not None and self.class_weight != "balanced":
            raise ValueError(
                f"class_weight must be 'balanced' or none, got {self.class_weight!r}"
            )

    def corpus_schema(self) -> CorpusSchema:
        return CorpusSchema.by_name(self.schema, self.labels)

    def corpus_format(self) -> CorpusFormat:
        return CorpusFormat(
            delimiter=self.delimiter,
            text_column=self.text_column,
            label_column=self.label_column,
            id_column=self.id_column,
        )

    def resource_paths(self) -> dict[str, str]:
        """Dictionary paths with packaged defaults filled in."""
        packaged = packaged_resource_dir()
        defaults = {
            "misspellings": packaged / "misspellings.tsv",
            "emoticons": packaged / "emoticons.tsv",
            "teencode": packaged / "teencode.tsv",
            "stopwords": packaged / "stopwords.txt",
            "segmentation": packaged / "segmentation_words.txt",
        }
        return {
            key: str(getattr(self, key) or defaults[key]) for key in _DICTIONARY_KEYS
        }

    def build_resources(self) -> NormalizerResources:
        return NormalizerResources.from_paths(**self.resource_paths())

    def lexicon_enabled(self) -> bool:
        return self.lexicon is not None and self.lexicon.casefold() not in _NONE_WORDS

    def lexicon_path(self) -> Path:
        if self.lexicon is None or self.lexicon.casefold() == "sample":
            return sample_lexicon_path()
        return Path(self.lexicon)

    def resolve_mapping(self) -> LabelMapping | None:
        if self.mapping is None or self.mapping.casefold() in _NONE_WORDS:
            return None
        if self.mapping.casefold() in _BUILTIN_MAPPINGS:
            return builtin_mapping(self.mapping)
        return load_mapping(self.mapping)

    def validate_files(self) -> None:
        """Check every referenced file before any work starts."""
        if self.dataset is not None:
            require_file(self.dataset, "dataset")
        for key, path in self.resource_paths().items():
            require_file(path, f"{key} dictionary")
        if self.lexicon_enabled():
            require_file(self.lexicon_path(), "emotion lexicon")
        if self.mapping and self.mapping.casefold() not in (
            _NONE_WORDS | _BUILTIN_MAPPINGS
        ):
            require_file(self.mapping, "label mapping")
        if self.embeddings is not None:
            require_file(self.embeddings, "embedding file")

    def to_dict(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


def _parse_bool(raw: str, key: str) -> bool:
    value = raw.strip().casefold()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {raw!r}")


def _parse_optional(raw: str) -> str | None:
    return None if raw.strip().casefold() in _NONE_WORDS else raw.strip()


def _converters() -> dict[str, object]:
    def intval(raw, key):
        return int(raw)

    def floatval(raw, key):
        return float(raw)

    def strval(raw, key):
        return raw.strip()

    def optval(raw, key):
        return _parse_optional(raw)

    def int_tuple(raw, key):
        return tuple(int(part) for part in raw.replace(" ", "").split(",") if part)

    def float_tuple(raw, key):
        return tuple(float(part) for part in raw.replace(" ", "").split(",") if part)

    def str_tuple(raw, key):
        parts = tuple(part.strip() for part in raw.split(",") if part.strip())
        return parts or None

    def delimiter(raw, key):
        value = raw.strip()
        return "\t" if value in ("\\t", "tab", "TAB") else value

    table: dict[str, object] = {}
    for key in (
        "embedding_dim",
        "min_frequency",
        "max_len",
        "filters_per_width",
        "batch_size",
        "epochs",
        "patience",
        "seed",
    ):
        table[key] = intval
    for key in ("dropout", "learning_rate"):
        table[key] = floatval
    for key in ("remove_stopwords", "trainable_embeddings", "stratified"):
        table[key] = _parse_bool
    table["filter_widths"] = int_tuple
    table["ratios"] = float_tuple
    table["labels"] = str_tuple
    for key in (
        "dataset",
        "id_column",
        *_DICTIONARY_KEYS,
        "lexicon",
        "mapping",
        "embeddings",
        "class_weight",
    ):
        table[key] = optval
    for key in (
        "schema",
        "text_column",
        "label_column",
        "techniques",
        "scaling",
        "model",
        "optimizer",
        "out_dir",
    ):
        table[key] = strval
    table["delimiter"] = delimiter
    return table


_CONVERTERS = _converters()


def load_config_file(path: str | os.PathLike[str], _depth: int = 0) -> dict[str, str]:
    """Parse a flat ``key = value`` file.

    ``include = other.cfg`` (path relative to the including file) splices
    the other file's keys in at that line: they override earlier keys and
    are overridden by later ones.
    """
    if _depth > 8:
        raise ValueError(f"config include chain too deep at {path}")
    p = require_file(path, "config file")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{p}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().casefold()
        value = value.strip()
        if key == "include":
            included = load_config_file(p.parent / value, _depth + 1)
            out.update(included)
        else:
            out[key] = value
    return out


def config_from_mapping(mapping: Mapping[str, str]) -> ExperimentConfig:
    """Build a config from string key/value pairs, rejecting unknown keys."""
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs: dict[str, object] = {}
    for key, raw in mapping.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        converter = _CONVERTERS[key]
        try:
            kwargs[key] = converter(raw, key)
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from None
    return ExperimentConfig(**kwargs)


def load_experiment_config(
    path: str | os.PathLike[str],
    overrides: Mapping[str, str] | None = None,
) -> ExperimentConfig:
    mapping = load_config_file(path)
    for key, value in (overrides or {}).items():
        if value is not None:
            mapping[key] = value
    return config_from_mapping(mapping)


@dataclass
class TrainedPipeline:
    """A fitted end-to-end pipeline: normalization, features, and model."""

    params: ModelParams
    history: TrainHistory
    classes: tuple[str, ...]
    vocab: Vocabulary
    techniques: str
    remove_stopwords: bool
    resources: NormalizerResources
    resource_paths: dict[str, str]
    counter: EmotionCountVectorizer | None
    scaler: LexiconScaler | None
    experiment: dict[str, object]

    def normalize(self, texts: Sequence[str]) -> list[str]:
        ts = TechniqueSet.coerce(self.techniques)
        return [
            run_pipeline(t, ts, self.resources, self.remove_stopwords) for t in texts
        ]

    def encode(self, normalized: Sequence[str]) -> tuple[np.ndarray, np.ndarray | None]:
        max_len = self.params.config.max_len
        ids = np.stack(
            [encode_sequence(t.casefold().split(), self.vocab, max_len) for t in normalized]
        )
        lex = None
        if self.counter is not None:
            counts = self.counter.transform(list(normalized))
            lex = self.scaler.transform(counts)
        return ids, lex

    def predict_texts(self, texts: Sequence[str]) -> tuple[list[str], np.ndarray]:
        normalized = self.normalize(texts)
        ids, lex = self.encode(normalized)
        indices, probs = predict(self.params, ids, lex)
        return [self.classes[i] for i in indices], probs


def _balanced_weights(y: np.ndarray, class_count: int) -> tuple[float, ...]:
    counts = np.bincount(y, minlength=class_count)
    weights = len(y) / (class_count * np.maximum(counts, 1))
    return tuple(float(w) for w in weights)


def _load_embedding_matrix(
    cfg: ExperimentConfig, vocab: Vocabulary, seed: int
) -> EmbeddingMatrix:
    if cfg.embeddings is not None:
        return load_embeddings(cfg.embeddings, vocab, seed=seed)
    return random_embeddings(vocab, cfg.embedding_dim, seed=seed)


def train_pipeline(
    cfg: ExperimentConfig,
    train_docs: Sequence[Document],
    dev_docs: Sequence[Document] = (),
    *,
    techniques: str | None = None,
    model: str | None = None,
    use_lexicon: bool | None = None,
    seed: int | None = None,
) -> TrainedPipeline:
    """Run the full preprocessing/feature/training pipeline on one split.

    The keyword overrides exist for ablation cells, which vary one axis at
    a time against a shared base config.
    """
    techniques = cfg.techniques if techniques is None else techniques
    model_kind = cfg.model if model is None else model
    use_lexicon = cfg.lexicon_enabled() if use_lexicon is None else use_lexicon
    seed = cfg.seed if seed is None else seed
    if not train_docs:
        raise ValueError("cannot train on an empty corpus")

    schema = cfg.corpus_schema()
    ts = TechniqueSet.coerce(techniques)
    resources = cfg.build_resources()
    check_resources(ts, resources, cfg.remove_stopwords)

    norm_train = [
        run_pipeline(d.text, ts, resources, cfg.remove_stopwords) for d in train_docs
    ]
    norm_dev = [
        run_pipeline(d.text, ts, resources, cfg.remove_stopwords) for d in dev_docs
    ]
    train_tokens = [t.casefold().split() for t in norm_train]
    vocab = build_vocab(train_tokens, min_freq=cfg.min_frequency)
    matrix = _load_embedding_matrix(cfg, vocab, seed)

    encoded_train = np.stack(
        [encode_sequence(toks, vocab, cfg.max_len) for toks in train_tokens]
    )
    counter = scaler = None
    lex_train = lex_dev = None
    if use_lexicon:
        lexicon_obj = load_lexicon(cfg.lexicon_path())
        counter = EmotionCountVectorizer(
            lexicon=lexicon_obj, mapping=cfg.resolve_mapping()
        ).fit()
        counts_train = counter.transform(norm_train)
        scaler = LexiconScaler(cfg.scaling).fit(counts_train)
        lex_train = scaler.transform(counts_train)
        if norm_dev:
            lex_dev = scaler.transform(counter.transform(norm_dev))

    label_index = {label: i for i, label in enumerate(schema.labels)}
    y_train = np.array(
        [label_index[schema.canonical_label(d.label)] for d in train_docs],
        dtype=np.int64,
    )
    class_weights = (
        _balanced_weights(y_train, len(schema.labels))
        if cfg.class_weight == "balanced"
        else None
    )
    model_config = ModelConfig(
        kind=model_kind,
        class_count=len(schema.labels),
        embedding_dim=matrix.dim,
        max_len=cfg.max_len,
        filter_widths=cfg.filter_widths,
        filters_per_width=cfg.filters_per_width,
        dropout=cfg.dropout,
        lexicon_dim=0 if lex_train is None else lex_train.shape[1],
        batch_size=cfg.batch_size,
        optimizer=cfg.optimizer,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        patience=cfg.patience,
        trainable_embeddings=cfg.trainable_embeddings,
        class_weights=class_weights,
        seed=seed,
    )
    dev_kwargs: dict[str, object] = {}
    if dev_docs:
        dev_kwargs = {
            "dev_token_ids": np.stack(
                [
                    encode_sequence(t.casefold().split(), vocab, cfg.max_len)
                    for t in norm_dev
                ]
            ),
            "dev_labels": np.array(
                [label_index[schema.canonical_label(d.label)] for d in dev_docs],
                dtype=np.int64,
            ),
            "dev_lexicon": lex_dev,
        }
    params, history = train_model(
        model_config, matrix, encoded_train, y_train, lexicon=lex_train, **dev_kwargs
    )
    experiment = cfg.to_dict()
    experiment.update(
        {
            "techniques": str(ts),
            "model": model_kind,
            "lexicon_used": use_lexicon,
            "seed": seed,
        }
    )
    return TrainedPipeline(
        params=params,
        history=history,
        classes=schema.labels,
        vocab=vocab,
        techniques=str(ts),
        remove_stopwords=cfg.remove_stopwords,
        resources=resources,
        resource_paths=cfg.resource_paths(),
        counter=counter,
        scaler=scaler,
        experiment=experiment,
    )


def evaluate_pipeline(
    pipe: TrainedPipeline, docs: Sequence[Document]
) -> tuple[EvalReport, ConfusionMatrix]:
    """Predict a labeled split and score it against the gold labels."""
    if not docs:
        raise ValueError("cannot evaluate an empty document list")
    schema_labels = pipe.classes
    preds, _ = pipe.predict_texts([d.text for d in docs])
    canon = {label.casefold(): label for label in schema_labels}
    golds = []
    for d in docs:
        key = d.label.strip().casefold()
        if key not in canon:
            raise ValueError(f"document {d.id}: unknown label {d.label!r}")
        golds.append(canon[key])
    cm = confusion_matrix(golds, preds, schema_labels)
    return metrics(cm), cm


def save_pipeline(path: str | os.PathLike[str], pipe: TrainedPipeline) -> None:
    """Persist the pipeline as a single self-describing checkpoint file."""
    lexicon_entries = mapping_state = None
    if pipe.counter is not None:
        lexicon_obj, mapping = pipe.counter._resolve()
        lexicon_entries = {
            surface: sorted(flags) for surface, flags in lexicon_obj.entries.items()
        }
        if mapping is not None:
            mapping_state = {
                "scheme": mapping.scheme,
                "targets": list(mapping.targets),
                "rules": {
                    emotion: (target if target is not None else "-")
                    for emotion, target in mapping.rules.items()
                },
            }
    extra = {
        "format": "senlex-pipeline",
        "classes": list(pipe.classes),
        "vocab_tokens": list(pipe.vocab.tokens),
        "min_frequency": pipe.vocab.min_frequency,
        "techniques": pipe.techniques,
        "remove_stopwords": pipe.remove_stopwords,
        "resource_paths": pipe.resource_paths,
        "lexicon_entries": lexicon_entries,
        "mapping": mapping_state,
        "scaler": None if pipe.scaler is None else pipe.scaler.state_dict(),
        "history": {
            "train_loss": list(pipe.history.train_loss),
            "dev_accuracy": list(pipe.history.dev_accuracy),
            "dev_macro_f1": list(pipe.history.dev_macro_f1),
            "best_epoch": pipe.history.best_epoch,
        },
        "experiment": pipe.experiment,
    }
    save_checkpoint(path, pipe.params, extra)


def load_pipeline(path: str | os.PathLike[str]) -> TrainedPipeline:
    """Rebuild a pipeline saved by save_pipeline().

    The dictionaries are re-read from the paths recorded at save time; a
    missing one is an error because inference must replicate the exact
    preprocessing the model was trained with.
    """
    params, extra = load_checkpoint(path)
    if extra.get("format") != "senlex-pipeline":
        raise ValueError(f"{path}: checkpoint lacks pipeline state")
    vocab = Vocabulary.from_tokens(
        extra["vocab_tokens"], min_frequency=extra.get("min_frequency", 1)
    )
    resource_paths = dict(extra["resource_paths"])
    resources = NormalizerResources.from_paths(**resource_paths)
    counter = scaler = None
    if extra.get("lexicon_entries") is not None:
        lexicon_obj = EmotionLexicon(
            entries={
                surface: frozenset(flags)
                for surface, flags in extra["lexicon_entries"].items()
            }
        )
        mapping_state = extra.get("mapping")
        mapping = None
        if mapping_state is not None:
            mapping = LabelMapping(
                scheme=mapping_state["scheme"],
                targets=tuple(mapping_state["targets"]),
                rules={
                    emotion: (None if target == "-" else target)
                    for emotion, target in mapping_state["rules"].items()
                },
            )
        counter = EmotionCountVectorizer(lexicon=lexicon_obj, mapping=mapping).fit()
        scaler = LexiconScaler.from_state(extra["scaler"])
    history_state = extra["history"]
    history = TrainHistory(
        train_loss=tuple(history_state["train_loss"]),
        dev_accuracy=tuple(history_state["dev_accuracy"]),
        dev_macro_f1=tuple(history_state["dev_macro_f1"]),
        best_epoch=history_state["best_epoch"],
    )
    return TrainedPipeline(
        params=params,
        history=history,
        classes=tuple(extra["classes"]),
        vocab=vocab,
        techniques=extra["techniques"],
        remove_stopwords=extra["remove_stopwords"],
        resources=resources,
        resource_paths=resource_paths,
        counter=counter,
        scaler=scaler,
        experiment=dict(extra.get("experiment", {})),
    )


def run_ablation(
    cfg: ExperimentConfig,
    splits: tuple[Sequence[Document], Sequence[Document], Sequence[Document]],
    technique_sets: Sequence[str],
    lexicon_flags: Sequence[bool] = (True, False),
    model_kinds: Sequence[str] | None = None,
) -> AblationReport:
    """Train and evaluate every grid cell; failures annotate their cell.

    Each cell derives its own seed from the experiment seed and the cell
    coordinates, so cells are independent and the grid is reproducible as
    a whole.
    """
    train_docs, dev_docs, test_docs = splits
    if model_kinds is None:
        model_kinds = (cfg.model,)
    report = AblationReport()
    for model_kind in model_kinds:
        for lexicon_flag in lexicon_flags:
            for tech in technique_sets:
                canonical = str(TechniqueSet.coerce(tech))
                cell = AblationCell(
                    model=model_kind, lexicon=bool(lexicon_flag), techniques=canonical
                )
                cell_seed = derive_seed(
                    cfg.seed,
                    "ablation",
                    model_kind,
                    "on" if lexicon_flag else "off",
                    canonical,
                )
                try:
                    pipe = train_pipeline(
                        cfg,
                        train_docs,
                        dev_docs,
                        techniques=canonical,
                        model=model_kind,
                        use_lexicon=bool(lexicon_flag),
                        seed=cell_seed,
                    )
                    cell_report, _ = evaluate_pipeline(pipe, test_docs)
                    report.cells[cell] = cell_report
                except Exception as exc:  # cell isolation: grid must continue
                    report.failures[cell] = str(exc)
    return report


def atomic_write_text(path: str | os.PathLike[str], text: str) -> None:
    """Write a text file that appears complete or not at all."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, target)
