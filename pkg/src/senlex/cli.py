"""Command line for the toolkit: corpus stats, preprocessing, training,
evaluation, the ablation grid, and prediction.

Exit codes: 0 on success, 1 for invalid input (bad flags, bad config, missing
files, malformed data), 2 for runtime failures such as diverged training.
Every artifact a command writes embeds the resolved configuration and seed,
and all writes go through a temp-file-then-rename step so readers never see
a half-written file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .corpus import CorpusSchema, CorpusStats, corpus_stats, load_corpus, split_corpus
from .evaluation import (
    ConfusionMatrix,
    render_ablation,
    render_report,
    row_normalize,
)
from .experiment import (
    ExperimentConfig,
    TrainedPipeline,
    atomic_write_text,
    config_from_mapping,
    evaluate_pipeline,
    load_config_file,
    load_pipeline,
    run_ablation,
    save_pipeline,
    train_pipeline,
)
from .normalize import TechniqueSet, check_resources, run_pipeline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_RUNTIME"]


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here a bad invocation is a
    validation failure and must exit 1 like every other invalid input."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(
    parser: argparse.ArgumentParser,
    *,
    techniques: bool = True,
    lexicon: bool = True,
    out_help: str = "also write the JSON payload to this file",
    out_required: bool = False,
) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="override the experiment seed")
    if techniques:
        parser.add_argument(
            "--techniques", metavar="SPEC", help="technique combination, e.g. 1+2+3 or original"
        )
    if lexicon:
        parser.add_argument(
            "--lexicon", metavar="PATH", help="emotion lexicon file, 'sample', or 'none'"
        )
    parser.add_argument(
        "--mapping", metavar="NAME", help="label mapping scheme name or mapping file"
    )
    parser.add_argument("--out", metavar="PATH", required=out_required, help=out_help)
    parser.add_argument(
        "--format", choices=("table", "json"), default="table", help="stdout format"
    )


def build_parser() -> _Parser:
    parser = _Parser(
        prog="senlex",
        description="Lexicon-augmented Vietnamese sentiment classification toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("stats", help="corpus size, length, and label statistics")
    p.add_argument("input", nargs="?", metavar="INPUT", help="corpus file (or config 'dataset')")
    _add_common(p)

    p = sub.add_parser("preprocess", help="normalize a corpus file into a new TSV")
    p.add_argument("input", metavar="INPUT", help="corpus file to normalize")
    _add_common(p, out_help="output TSV path", out_required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("input", nargs="?", metavar="INPUT", help="corpus file (or config 'dataset')")
    _add_common(p, out_help="output directory (config 'out_dir')")

    p = sub.add_parser("eval", help="score a checkpoint on a corpus split")
    p.add_argument("--checkpoint", required=True, metavar="FILE", help="trained checkpoint")
    p.add_argument(
        "--split",
        choices=("train", "dev", "test"),
        default="test",
        help="which split of the recorded dataset to score",
    )
    p.add_argument("--config", metavar="FILE", help="config to cross-check and resolve paths")
    p.add_argument("--out", metavar="PATH", help="also write the JSON payload to this file")
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("ablate", help="train and score a grid of pipeline variants")
    p.add_argument("input", nargs="?", metavar="INPUT", help="corpus file (or config 'dataset')")
    _add_common(p, techniques=False, lexicon=False, out_help="output directory (config 'out_dir')")
    p.add_argument(
        "--techniques",
        metavar="LIST",
        help="comma-separated technique combinations (default: original plus the configured one)",
    )
    p.add_argument(
        "--lexicon", metavar="LIST", default="on,off", help="comma-separated on/off flags"
    )
    p.add_argument("--models", metavar="LIST", help="comma-separated model kinds")

    p = sub.add_parser("predict", help="classify texts with a trained checkpoint")
    p.add_argument("--checkpoint", required=True, metavar="FILE", help="trained checkpoint")
    p.add_argument(
        "text", nargs="*", metavar="TEXT", help="texts to classify (stdin lines when omitted)"
    )
    p.add_argument("--out", metavar="PATH", help="also write the JSON payload to this file")
    p.add_argument("--format", choices=("table", "json"), default="table")

    return parser


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _resolve_config(
    args: argparse.Namespace,
    extra: dict[str, str | None] | None = None,
    skip: tuple[str, ...] = (),
) -> ExperimentConfig:
    """Merge config file < command-line flags < extras into one config."""
    mapping = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in ("seed", "techniques", "lexicon", "mapping"):
        if key in skip:
            continue
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = str(value)
    for key, value in (extra or {}).items():
        if value is not None:
            mapping[key] = value
    return config_from_mapping(mapping)


def _to_json(payload: object) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2)


def _emit(text: str, out: str | None) -> None:
    print(text)
    if out:
        atomic_write_text(out, text if text.endswith("\n") else text + "\n")


def _require_dataset(cfg: ExperimentConfig) -> str:
    if cfg.dataset is None:
        raise ValueError("no dataset: pass INPUT or set 'dataset' in the config")
    return cfg.dataset


def _load_split_docs(cfg: ExperimentConfig):
    docs = load_corpus(_require_dataset(cfg), cfg.corpus_schema(), cfg.corpus_format())
    return split_corpus(docs, cfg.ratios, seed=cfg.seed, stratified=cfg.stratified)


_HIST_BUCKETS = (
    (0, 0, "0"),
    (1, 5, "1-5"),
    (6, 10, "6-10"),
    (11, 15, "11-15"),
    (16, 20, "16-20"),
    (21, 30, "21-30"),
    (31, 50, "31-50"),
    (51, 100, "51-100"),
    (101, None, "101+"),
)


def length_histogram(docs) -> dict[str, int]:
    """Whitespace-token document lengths bucketed into fixed ranges."""
    out = {label: 0 for _, _, label in _HIST_BUCKETS}
    for d in docs:
        n = len(d.text.split())
        for lo, hi, label in _HIST_BUCKETS:
            if n >= lo and (hi is None or n <= hi):
                out[label] += 1
                break
    return out


def _render_stats(stats: CorpusStats, hist: dict[str, int]) -> str:
    lines = [
        f"documents       {stats.size}",
        f"average length  {stats.avg_length:.2f}",
        "label distribution",
    ]
    width = max(len(label) for label in stats.label_distribution)
    for label, pct in stats.label_distribution.items():
        lines.append(f"  {label:<{width}}  {pct:6.2f}%")
    lines.append("length histogram")
    for bucket, count in hist.items():
        lines.append(f"  {bucket:<7} {count}")
    return "\n".join(lines)


def _render_confusion(cm: ConfusionMatrix) -> str:
    normalized = row_normalize(cm)
    labels = [str(l) for l in cm.labels]
    width = max(8, max(len(l) for l in labels) + 2)
    lines = ["confusion matrix (rows gold, columns predicted)"]
    lines.append(" " * width + "".join(f"{l:>{width}}" for l in labels))
    for i, label in enumerate(labels):
        cells = "".join(f"{int(v):>{width}}" for v in cm.grid[i])
        lines.append(f"{label:<{width}}{cells}")
    lines.append("row-normalized (%)")
    lines.append(" " * width + "".join(f"{l:>{width}}" for l in labels))
    for i, label in enumerate(labels):
        cells = "".join(f"{100 * v:>{width}.2f}" for v in normalized.fractions[i])
        lines.append(f"{label:<{width}}{cells}")
    if normalized.zero_support:
        flagged = ", ".join(str(l) for l in normalized.zero_support)
        lines.append(f"zero-support rows: {flagged}")
    return "\n".join(lines)


def _history_payload(pipe: TrainedPipeline) -> dict[str, object]:
    return {
        "experiment": pipe.experiment,
        "history": {
            "train_loss": list(pipe.history.train_loss),
            "dev_accuracy": list(pipe.history.dev_accuracy),
            "dev_macro_f1": list(pipe.history.dev_macro_f1),
            "best_epoch": pipe.history.best_epoch,
        },
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_stats(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args, {"dataset": args.input})
    schema = cfg.corpus_schema()
    docs = load_corpus(_require_dataset(cfg), schema, cfg.corpus_format())
    stats = corpus_stats(docs, schema)
    hist = length_histogram(docs)
    if args.format == "json":
        payload = {
            "experiment": cfg.to_dict(),
            "size": stats.size,
            "avg_length": stats.avg_length,
            "label_distribution": stats.label_distribution,
            "length_histogram": hist,
        }
        _emit(_to_json(payload), args.out)
    else:
        _emit(_render_stats(stats, hist), args.out)
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args, {"dataset": args.input})
    docs = load_corpus(args.input, cfg.corpus_schema(), cfg.corpus_format())
    ts = TechniqueSet.coerce(cfg.techniques)
    resources = cfg.build_resources()
    check_resources(ts, resources, cfg.remove_stopwords)
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(("id", "text", "label"))
    for d in docs:
        writer.writerow((d.id, run_pipeline(d.text, ts, resources, cfg.remove_stopwords), d.label))
    atomic_write_text(args.out, buf.getvalue())
    meta = {"experiment": cfg.to_dict(), "input": args.input, "rows": len(docs)}
    atomic_write_text(args.out + ".meta.json", _to_json(meta) + "\n")
    print(f"wrote {len(docs)} rows to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args, {"dataset": args.input, "out_dir": args.out})
    _require_dataset(cfg)
    cfg.validate_files()
    train_docs, dev_docs, _ = _load_split_docs(cfg)
    pipe = train_pipeline(cfg, train_docs, dev_docs)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_pipeline(out_dir / "model.ckpt", pipe)
    atomic_write_text(out_dir / "history.json", _to_json(_history_payload(pipe)) + "\n")
    atomic_write_text(out_dir / "config.json", _to_json(pipe.experiment) + "\n")
    best = pipe.history.best_epoch
    print(
        f"trained {pipe.experiment['model']} for {len(pipe.history.train_loss)} "
        f"epochs (best epoch {best + 1})"
    )
    if pipe.history.dev_accuracy:
        print(
            f"dev accuracy {100 * pipe.history.dev_accuracy[best]:.2f}%"
            f"  dev macro F1 {100 * pipe.history.dev_macro_f1[best]:.2f}%"
        )
    print(f"wrote {out_dir / 'model.ckpt'}")
    return EXIT_OK


def _check_compatible(pipe: TrainedPipeline, cfg: ExperimentConfig) -> None:
    """List every way the config disagrees with what the checkpoint recorded."""
    diffs = []
    if cfg.corpus_schema().labels != pipe.classes:
        diffs.append(
            f"classes {list(cfg.corpus_schema().labels)} != {list(pipe.classes)}"
        )
    canonical = str(TechniqueSet.coerce(cfg.techniques))
    if canonical != pipe.techniques:
        diffs.append(f"techniques {canonical!r} != {pipe.techniques!r}")
    if cfg.lexicon_enabled() != (pipe.counter is not None):
        recorded = "on" if pipe.counter is not None else "off"
        diffs.append(f"lexicon {'on' if cfg.lexicon_enabled() else 'off'} != {recorded}")
    if cfg.remove_stopwords != pipe.remove_stopwords:
        diffs.append(f"remove_stopwords {cfg.remove_stopwords} != {pipe.remove_stopwords}")
    if diffs:
        raise ValueError("checkpoint incompatible with config: " + "; ".join(diffs))


def cmd_eval(args: argparse.Namespace) -> int:
    pipe = load_pipeline(args.checkpoint)
    snapshot = pipe.experiment
    dataset = snapshot.get("dataset")
    if args.config:
        cfg = _resolve_config(args)
        _check_compatible(pipe, cfg)
        dataset = cfg.dataset or dataset
    if dataset is None:
        raise ValueError("checkpoint records no dataset and none was configured")
    schema_labels = snapshot.get("labels")
    schema = CorpusSchema.by_name(
        snapshot.get("schema", "custom"),
        tuple(schema_labels) if schema_labels else None,
    )
    docs = load_corpus(dataset, schema)
    # reproduce the training split exactly from the recorded provenance
    splits = split_corpus(
        docs,
        tuple(snapshot.get("ratios", (0.8, 0.1, 0.1))),
        seed=int(snapshot["seed"]),
        stratified=bool(snapshot.get("stratified", True)),
    )
    chosen = dict(zip(("train", "dev", "test"), splits))[args.split]
    report, cm = evaluate_pipeline(pipe, chosen)
    normalized = row_normalize(cm)
    payload = {
        "experiment": snapshot,
        "split": args.split,
        "report": report.to_dict(),
        "confusion": {"labels": [str(l) for l in cm.labels], "grid": cm.grid.tolist()},
        "row_normalized": {
            "labels": [str(l) for l in normalized.labels],
            "fractions": normalized.fractions.tolist(),
            "zero_support": [str(l) for l in normalized.zero_support],
        },
    }
    if args.format == "json":
        print(_to_json(payload))
    else:
        print(render_report(report, title=f"{args.split} split"))
        print()
        print(_render_confusion(cm))
    if args.out:
        atomic_write_text(args.out, _to_json(payload) + "\n")
    return EXIT_OK


_LEXICON_FLAGS = {"on": True, "true": True, "off": False, "false": False}


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(
        args,
        {"dataset": args.input, "out_dir": args.out},
        skip=("techniques", "lexicon"),
    )
    # only the dataset is fatal up front; anything cell-dependent (lexicon,
    # embeddings, dictionaries) fails inside its cells and stays in the report
    _require_dataset(cfg)
    if args.techniques:
        techs = [t.strip() for t in args.techniques.split(",")]
    else:
        techs = ["original"]
        if str(TechniqueSet.coerce(cfg.techniques)) != "original":
            techs.append(cfg.techniques)
    flags = []
    for raw in args.lexicon.split(","):
        key = raw.strip().casefold()
        if key not in _LEXICON_FLAGS:
            raise ValueError(f"--lexicon entries must be on/off, got {raw!r}")
        flags.append(_LEXICON_FLAGS[key])
    models = (
        [m.strip() for m in args.models.split(",")] if args.models else [cfg.model]
    )
    splits = _load_split_docs(cfg)
    report = run_ablation(cfg, splits, techs, flags, models)
    payload = {"experiment": cfg.to_dict(), "grid": report.to_dict()}
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "ablation.json", _to_json(payload) + "\n")
    if args.format == "json":
        print(_to_json(payload))
    else:
        print(render_ablation(report))
    print(f"wrote {out_dir / 'ablation.json'}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    pipe = load_pipeline(args.checkpoint)
    texts = list(args.text) if args.text else [line.rstrip("\n") for line in sys.stdin]
    if not texts:
        raise ValueError("no texts to classify")
    labels, probs = pipe.predict_texts(texts)
    if args.format == "json":
        payload = [
            {
                "text": text,
                "label": label,
                "probabilities": {
                    cls: float(p) for cls, p in zip(pipe.classes, row)
                },
            }
            for text, label, row in zip(texts, labels, probs)
        ]
        _emit(_to_json(payload), args.out)
    else:
        lines = []
        for text, label, row in zip(texts, labels, probs):
            dist = " ".join(f"{cls}={p:.4f}" for cls, p in zip(pipe.classes, row))
            lines.append(f"{label}\t{dist}\t{text}")
        _emit("\n".join(lines), args.out)
    return EXIT_OK


_COMMANDS = {
    "stats": cmd_stats,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "predict": cmd_predict,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, KeyError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
