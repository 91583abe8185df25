"""From-scratch text classifiers: logistic regression and a 1-D convolutional net.

Both models consume padded token-index sequences plus an optional block of
scaled lexicon features that is concatenated onto the pooled representation
before the output layer.  All arithmetic is float64 numpy.

Gradient convention: backward() returns gradients of the *summed*
cross-entropy over the batch; the training loop divides by the batch size so
updates follow the mean loss.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_fraction, check_text_list
from .evaluation import confusion_matrix, metrics
from .features import (
    PAD_INDEX,
    EmbeddingMatrix,
    LexiconScaler,
    build_vocab,
    encode_sequence,
    load_embeddings,
    random_embeddings,
)
from .lexicon import EmotionCountVectorizer
from .randomness import derive_rng

__all__ = [
    "ModelKind",
    "OptimizerKind",
    "ModelConfig",
    "ModelParams",
    "TrainHistory",
    "init_model",
    "forward",
    "backward",
    "cross_entropy",
    "predict",
    "train_model",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
    "LogisticTextClassifier",
    "TextCNNClassifier",
]


class ModelKind(Enum):
    LOGREG = "logreg"
    TEXTCNN = "textcnn"

    @classmethod
    def coerce(cls, value: "ModelKind | str") -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).casefold())
        except ValueError:
            raise ValueError(
                f"unknown model kind {value!r}; known: {[m.value for m in cls]}"
            ) from None


class OptimizerKind(Enum):
    SGD = "sgd"
    ADAM = "adam"

    @classmethod
    def coerce(cls, value: "OptimizerKind | str") -> "OptimizerKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).casefold())
        except ValueError:
            raise ValueError(
                f"unknown optimizer {value!r}; known: {[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and training hyperparameters for one model."""

    kind: ModelKind
    class_count: int
    embedding_dim: int
    max_len: int = 100
    filter_widths: tuple[int, ...] = (1, 2, 3, 5)
    filters_per_width: int = 32
    dropout: float = 0.2
    lexicon_dim: int = 0
    batch_size: int = 32
    optimizer: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 1e-3
    epochs: int = 20
    patience: int = 5
    trainable_embeddings: bool = True
    class_weights: tuple[float, ...] | None = None
    seed: int = 42

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind.coerce(self.kind))
        object.__setattr__(self, "optimizer", OptimizerKind.coerce(self.optimizer))
        widths = tuple(int(w) for w in self.filter_widths)
        object.__setattr__(self, "filter_widths", widths)
        if self.class_count < 2:
            raise ValueError(f"class_count must be >= 2, got {self.class_count}")
        if self.embedding_dim < 1:
            raise ValueError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")
        if not widths:
            raise ValueError("filter_widths must not be empty")
        if len(set(widths)) != len(widths):
            raise ValueError(f"filter_widths must be unique, got {widths}")
        if any(w < 1 for w in widths):
            raise ValueError(f"filter widths must be >= 1, got {widths}")
        if max(widths) > self.max_len:
            raise ValueError(
                f"filter width {max(widths)} exceeds max_len {self.max_len}"
            )
        if self.filters_per_width < 1:
            raise ValueError(
                f"filters_per_width must be >= 1, got {self.filters_per_width}"
            )
        check_fraction(self.dropout, "dropout")
        if self.lexicon_dim < 0:
            raise ValueError(f"lexicon_dim must be >= 0, got {self.lexicon_dim}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")
        if self.class_weights is not None:
            weights = tuple(float(w) for w in self.class_weights)
            if len(weights) != self.class_count:
                raise ValueError(
                    f"class_weights has {len(weights)} entries for "
                    f"{self.class_count} classes"
                )
            if any(not math.isfinite(w) or w <= 0 for w in weights):
                raise ValueError(f"class weights must be positive, got {weights}")
            object.__setattr__(self, "class_weights", weights)

    @property
    def pooled_dim(self) -> int:
        """Width of the document representation before lexicon fusion."""
        if self.kind is ModelKind.LOGREG:
            return self.embedding_dim
        return self.filters_per_width * len(self.filter_widths)

    @property
    def feature_dim(self) -> int:
        return self.pooled_dim + self.lexicon_dim

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind.value,
            "class_count": self.class_count,
            "embedding_dim": self.embedding_dim,
            "max_len": self.max_len,
            "filter_widths": list(self.filter_widths),
            "filters_per_width": self.filters_per_width,
            "dropout": self.dropout,
            "lexicon_dim": self.lexicon_dim,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer.value,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "patience": self.patience,
            "trainable_embeddings": self.trainable_embeddings,
            "class_weights": list(self.class_weights) if self.class_weights else None,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, object]) -> "ModelConfig":
        kwargs = dict(data)
        kwargs["filter_widths"] = tuple(kwargs.get("filter_widths", (1, 2, 3, 5)))
        weights = kwargs.get("class_weights")
        kwargs["class_weights"] = tuple(weights) if weights else None
        return cls(**kwargs)


@dataclass
class ModelParams:
    """Named tensors plus the config that shaped them.

    ``version`` counts optimizer updates; forward caches record the version
    they were computed under so a stale cache cannot feed backward().
    """

    config: ModelConfig
    tensors: dict[str, np.ndarray]
    trainable: tuple[str, ...]
    version: int = 0

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: tensor.copy() for name, tensor in self.tensors.items()}


def _conv_names(config: ModelConfig) -> list[tuple[int, str, str]]:
    return [
        (w, f"conv{w}_kernel", f"conv{w}_bias") for w in config.filter_widths
    ]


def init_model(config: ModelConfig, embeddings: EmbeddingMatrix) -> ModelParams:
    """Allocate parameters: seeded-uniform kernels, zero output layer.

    The embedding matrix is copied in as a tensor; it is trainable for the
    convolutional model (when configured) and a fixed feature table for
    logistic regression.
    """
    if embeddings.dim != config.embedding_dim:
        raise ValueError(
            f"embedding matrix has dim {embeddings.dim} but config expects "
            f"{config.embedding_dim}"
        )
    tensors: dict[str, np.ndarray] = {"embedding": embeddings.matrix.copy()}
    trainable: list[str] = []
    if config.kind is ModelKind.TEXTCNN:
        if config.trainable_embeddings:
            trainable.append("embedding")
        d, nf = config.embedding_dim, config.filters_per_width
        for w, kernel_name, bias_name in _conv_names(config):
            bound = math.sqrt(6.0 / (w * d + nf))
            rng = derive_rng(config.seed, "init", kernel_name)
            tensors[kernel_name] = rng.uniform(-bound, bound, size=(w, d, nf))
            tensors[bias_name] = np.zeros(nf)
            trainable.extend([kernel_name, bias_name])
    tensors["out_weight"] = np.zeros((config.feature_dim, config.class_count))
    tensors["out_bias"] = np.zeros(config.class_count)
    trainable.extend(["out_weight", "out_bias"])
    return ModelParams(config=config, tensors=tensors, trainable=tuple(trainable))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(
    logits: np.ndarray,
    labels: np.ndarray,
    class_weights: tuple[float, ...] | None = None,
) -> float:
    """Summed cross-entropy of the batch, computed via log-sum-exp."""
    top = logits.max(axis=1)
    lse = top + np.log(np.exp(logits - top[:, None]).sum(axis=1))
    per_doc = lse - logits[np.arange(len(labels)), labels]
    if class_weights is not None:
        per_doc = per_doc * np.asarray(class_weights)[labels]
    return float(per_doc.sum())


def _check_batch(
    params: ModelParams, token_ids: np.ndarray, lexicon: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray | None]:
    config = params.config
    token_ids = np.asarray(token_ids)
    if token_ids.ndim != 2 or token_ids.shape[1] != config.max_len:
        raise ValueError(
            f"token ids must have shape (batch, {config.max_len}), "
            f"got {token_ids.shape}"
        )
    if not np.issubdtype(token_ids.dtype, np.integer):
        raise ValueError(f"token ids must be integers, got dtype {token_ids.dtype}")
    vocab_size = params.tensors["embedding"].shape[0]
    if token_ids.size and (token_ids.min() < 0 or token_ids.max() >= vocab_size):
        raise ValueError(f"token ids must lie in [0, {vocab_size})")
    if config.lexicon_dim == 0:
        if lexicon is not None:
            raise ValueError("model was configured without lexicon fusion")
        return token_ids, None
    if lexicon is None:
        raise ValueError(f"model expects a (batch, {config.lexicon_dim}) lexicon block")
    lexicon = np.asarray(lexicon, dtype=np.float64)
    if lexicon.shape != (token_ids.shape[0], config.lexicon_dim):
        raise ValueError(
            f"lexicon block must have shape ({token_ids.shape[0]}, "
            f"{config.lexicon_dim}), got {lexicon.shape}"
        )
    return token_ids, lexicon


def _require_finite(values: np.ndarray, layer: str) -> None:
    if not np.isfinite(values).all():
        raise RuntimeError(f"non-finite values in {layer}")


def forward(
    params: ModelParams,
    token_ids: np.ndarray,
    lexicon: np.ndarray | None = None,
    *,
    train_mode: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict[str, object]]:
    """Compute logits for a batch; returns (logits, cache for backward()).

    Dropout is applied to the pooled+fused vector only when ``train_mode``
    is on, using inverted scaling so evaluation needs no correction.
    """
    config = params.config
    token_ids, lexicon = _check_batch(params, token_ids, lexicon)
    if token_ids.shape[0] == 0:
        raise ValueError("cannot run forward on an empty batch")
    embedded = params.tensors["embedding"][token_ids]
    cache: dict[str, object] = {
        "version": params.version,
        "token_ids": token_ids,
        "embedded": embedded,
    }
    if config.kind is ModelKind.TEXTCNN:
        pooled_parts = []
        per_width: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for w, kernel_name, bias_name in _conv_names(config):
            windows = sliding_window_view(embedded, w, axis=1)
            pre = np.einsum("btdw,wdf->btf", windows, params.tensors[kernel_name])
            pre = pre + params.tensors[bias_name]
            active = np.maximum(pre, 0.0)
            argmax = active.argmax(axis=1)
            pooled_parts.append(active.max(axis=1))
            per_width[w] = (pre, argmax)
        pooled = np.concatenate(pooled_parts, axis=1)
        _require_finite(pooled, "convolution layer")
        cache["per_width"] = per_width
    else:
        mask = token_ids != PAD_INDEX
        counts = mask.sum(axis=1)
        summed = (embedded * mask[:, :, None]).sum(axis=1)
        pooled = summed / np.maximum(counts, 1)[:, None]
        _require_finite(pooled, "mean-pooling layer")
        cache["mask"] = mask
        cache["counts"] = counts
    fused = pooled if lexicon is None else np.concatenate([pooled, lexicon], axis=1)
    if train_mode and config.dropout > 0.0:
        if dropout_rng is None:
            raise ValueError("train_mode with dropout > 0 needs a dropout_rng")
        keep = 1.0 - config.dropout
        drop_mask = (dropout_rng.random(fused.shape) >= config.dropout) / keep
    else:
        drop_mask = None
    hidden = fused if drop_mask is None else fused * drop_mask
    logits = hidden @ params.tensors["out_weight"] + params.tensors["out_bias"]
    _require_finite(logits, "output layer")
    probs = _softmax(logits)
    cache["fused"] = fused
    cache["drop_mask"] = drop_mask
    cache["hidden"] = hidden
    cache["probs"] = probs
    return logits, cache


def backward(
    params: ModelParams, cache: dict[str, object], labels: np.ndarray
) -> dict[str, np.ndarray]:
    """Gradients of the summed batch cross-entropy for every trainable tensor."""
    config = params.config
    if cache.get("version") != params.version:
        raise RuntimeError(
            "stale forward cache: parameters were updated after forward()"
        )
    probs: np.ndarray = cache["probs"]
    labels = np.asarray(labels)
    if labels.shape != (probs.shape[0],):
        raise ValueError(
            f"labels must have shape ({probs.shape[0]},), got {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= config.class_count):
        raise ValueError(f"labels must lie in [0, {config.class_count})")
    batch = probs.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(batch), labels] -= 1.0
    if config.class_weights is not None:
        dlogits *= np.asarray(config.class_weights)[labels][:, None]

    hidden: np.ndarray = cache["hidden"]
    grads: dict[str, np.ndarray] = {
        "out_weight": hidden.T @ dlogits,
        "out_bias": dlogits.sum(axis=0),
    }
    if config.kind is ModelKind.LOGREG:
        return grads

    dhidden = dlogits @ params.tensors["out_weight"].T
    drop_mask = cache["drop_mask"]
    dfused = dhidden if drop_mask is None else dhidden * drop_mask
    dpooled = dfused[:, : config.pooled_dim]

    embedded: np.ndarray = cache["embedded"]
    token_ids: np.ndarray = cache["token_ids"]
    per_width: dict[int, tuple[np.ndarray, np.ndarray]] = cache["per_width"]
    dembedded = np.zeros_like(embedded)
    offset = 0
    nf = config.filters_per_width
    for w, kernel_name, bias_name in _conv_names(config):
        pre, argmax = per_width[w]
        dpool = dpooled[:, offset : offset + nf]
        offset += nf
        dactive = np.zeros_like(pre)
        np.put_along_axis(dactive, argmax[:, None, :], dpool[:, None, :], axis=1)
        dpre = dactive * (pre > 0.0)
        windows = sliding_window_view(embedded, w, axis=1)
        grads[kernel_name] = np.einsum("btdw,btf->wdf", windows, dpre)
        grads[bias_name] = dpre.sum(axis=(0, 1))
        kernel = params.tensors[kernel_name]
        steps = dpre.shape[1]
        for o in range(w):
            dembedded[:, o : o + steps, :] += dpre @ kernel[o].T
    if "embedding" in params.trainable:
        dembedding = np.zeros_like(params.tensors["embedding"])
        np.add.at(dembedding, token_ids, dembedded)
        grads["embedding"] = dembedding
    return grads


def predict(
    params: ModelParams,
    token_ids: np.ndarray,
    lexicon: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Return (class indices, probability rows); ties pick the lowest index."""
    _, cache = forward(params, token_ids, lexicon, train_mode=False)
    probs: np.ndarray = cache["probs"]
    return probs.argmax(axis=1), probs


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch telemetry; dev columns are empty when no dev set was given."""

    train_loss: tuple[float, ...]
    dev_accuracy: tuple[float, ...]
    dev_macro_f1: tuple[float, ...]
    best_epoch: int

    def __post_init__(self) -> None:
        if self.dev_macro_f1 and len(self.dev_macro_f1) != len(self.train_loss):
            raise ValueError("history columns must cover the same epochs")
        if not 0 <= self.best_epoch < len(self.train_loss):
            raise ValueError(f"best_epoch {self.best_epoch} out of range")


def _sgd_step(
    params: ModelParams, grads: dict[str, np.ndarray], lr: float
) -> None:
    for name in params.trainable:
        params.tensors[name] -= lr * grads[name]
    params.version += 1


@dataclass
class _AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "_AdamState":
        return cls(
            m={n: np.zeros_like(params.tensors[n]) for n in params.trainable},
            v={n: np.zeros_like(params.tensors[n]) for n in params.trainable},
        )


def _adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    lr: float,
    state: _AdamState,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    state.t += 1
    correct1 = 1.0 - beta1**state.t
    correct2 = 1.0 - beta2**state.t
    for name in params.trainable:
        g = grads[name]
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = state.m[name] / correct1
        v_hat = state.v[name] / correct2
        params.tensors[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    params.version += 1


def _dev_scores(
    params: ModelParams,
    token_ids: np.ndarray,
    labels: np.ndarray,
    lexicon: np.ndarray | None,
) -> tuple[float, float]:
    preds, _ = predict(params, token_ids, lexicon)
    cm = confusion_matrix(
        labels.tolist(), preds.tolist(), list(range(params.config.class_count))
    )
    report = metrics(cm)
    return report.accuracy, report.macro_f1


def train_model(
    config: ModelConfig,
    embeddings: EmbeddingMatrix,
    token_ids: np.ndarray,
    labels: np.ndarray,
    *,
    lexicon: np.ndarray | None = None,
    dev_token_ids: np.ndarray | None = None,
    dev_labels: np.ndarray | None = None,
    dev_lexicon: np.ndarray | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Mini-batch training; returns the best-dev-macro-F1 parameter snapshot.

    Without a dev set the final epoch's parameters are returned.  Early
    stopping triggers after ``config.patience`` epochs without dev
    improvement (0 disables it).  A non-finite loss or parameter aborts
    with an error naming the epoch and batch.
    """
    params = init_model(config, embeddings)
    labels = np.asarray(labels)
    token_ids, lexicon = _check_batch(params, token_ids, lexicon)
    n = token_ids.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"labels must have shape ({n},), got {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= config.class_count):
        raise ValueError(f"labels must lie in [0, {config.class_count})")
    has_dev = dev_token_ids is not None
    if has_dev:
        if dev_labels is None:
            raise ValueError("dev_token_ids given without dev_labels")
        dev_token_ids, dev_lexicon = _check_batch(params, dev_token_ids, dev_lexicon)
        dev_labels = np.asarray(dev_labels)
    elif dev_labels is not None or dev_lexicon is not None:
        raise ValueError("dev labels or lexicon given without dev_token_ids")

    shuffle_rng = derive_rng(config.seed, "train", "shuffle")
    dropout_rng = derive_rng(config.seed, "train", "dropout")
    adam = (
        _AdamState.for_params(params)
        if config.optimizer is OptimizerKind.ADAM
        else None
    )
    losses: list[float] = []
    dev_accuracy: list[float] = []
    dev_macro: list[float] = []
    best_score = -1.0
    best_epoch = 0
    best_tensors: dict[str, np.ndarray] | None = None
    epochs_without_gain = 0

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for batch_no, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            batch_lex = None if lexicon is None else lexicon[idx]
            try:
                logits, cache = forward(
                    params,
                    token_ids[idx],
                    batch_lex,
                    train_mode=True,
                    dropout_rng=dropout_rng,
                )
            except RuntimeError as exc:
                raise RuntimeError(
                    f"training diverged at epoch {epoch + 1}, "
                    f"batch {batch_no + 1}: {exc}"
                ) from None
            batch_loss = cross_entropy(logits, labels[idx], config.class_weights)
            if not math.isfinite(batch_loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch + 1}, batch {batch_no + 1}: "
                    "loss is not finite"
                )
            loss_sum += batch_loss
            grads = backward(params, cache, labels[idx])
            scale = 1.0 / len(idx)
            grads = {name: g * scale for name, g in grads.items()}
            if adam is not None:
                _adam_step(params, grads, config.learning_rate, adam)
            else:
                _sgd_step(params, grads, config.learning_rate)
        for name in params.trainable:
            if not np.isfinite(params.tensors[name]).all():
                raise RuntimeError(
                    f"training diverged: tensor {name!r} is non-finite "
                    f"after epoch {epoch + 1}"
                )
        losses.append(loss_sum / n)
        if has_dev:
            accuracy, macro = _dev_scores(params, dev_token_ids, dev_labels, dev_lexicon)
            dev_accuracy.append(accuracy)
            dev_macro.append(macro)
            if macro > best_score:
                best_score = macro
                best_epoch = epoch
                best_tensors = params.snapshot()
                epochs_without_gain = 0
            else:
                epochs_without_gain += 1
                if config.patience and epochs_without_gain >= config.patience:
                    break
        else:
            best_epoch = epoch

    if best_tensors is not None:
        params.tensors = best_tensors
        params.version += 1
    history = TrainHistory(
        train_loss=tuple(losses),
        dev_accuracy=tuple(dev_accuracy),
        dev_macro_f1=tuple(dev_macro),
        best_epoch=best_epoch,
    )
    return params, history


def gradient_check(
    params: ModelParams,
    token_ids: np.ndarray,
    labels: np.ndarray,
    lexicon: np.ndarray | None = None,
    *,
    step: float = 1e-4,
    max_coords: int = 128,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Compare backward() with central finite differences of the summed loss.

    Runs on a randomized copy of the parameters (the zero output layer of a
    fresh model would zero most gradients and make the check vacuous).
    Returns the max relative error per trainable tensor; tensors larger
    than ``max_coords`` are probed at a seeded coordinate sample.
    """
    if rng is None:
        rng = derive_rng(params.config.seed, "gradcheck")
    work = ModelParams(
        config=params.config,
        tensors=params.snapshot(),
        trainable=params.trainable,
    )
    for name in work.trainable:
        work.tensors[name] = rng.uniform(-0.5, 0.5, size=work.tensors[name].shape)
    labels = np.asarray(labels)
    weights = params.config.class_weights

    _, cache = forward(work, token_ids, lexicon, train_mode=False)
    analytic = backward(work, cache, labels)

    def loss_now() -> float:
        logits, _ = forward(work, token_ids, lexicon, train_mode=False)
        return cross_entropy(logits, labels, weights)

    errors: dict[str, float] = {}
    for name in work.trainable:
        flat = work.tensors[name].reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        if flat.size <= max_coords:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        worst = 0.0
        for c in coords:
            original = flat[c]
            flat[c] = original + step
            loss_plus = loss_now()
            flat[c] = original - step
            loss_minus = loss_now()
            flat[c] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            denom = max(abs(grad_flat[c]), abs(numeric), 1e-6)
            worst = max(worst, abs(grad_flat[c] - numeric) / denom)
        errors[name] = worst
    return errors


_CHECKPOINT_MAGIC = b"SENLEXW1"


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def save_checkpoint(
    path: str | os.PathLike[str],
    params: ModelParams,
    extra: dict[str, object] | None = None,
) -> None:
    """Write a deterministic binary checkpoint (no timestamps, sorted keys).

    ``extra`` must be JSON-serializable; callers use it to persist the
    surrounding pipeline state (vocabulary, class names, scaler bounds).
    The write is atomic: the file appears complete or not at all.
    """
    names = sorted(params.tensors)
    header = {
        "config": params.config.to_dict(),
        "trainable": list(params.trainable),
        "tensors": [
            {"name": name, "shape": list(params.tensors[name].shape), "dtype": "float64"}
            for name in names
        ],
        "extra": extra or {},
    }
    header_bytes = json.dumps(
        header, ensure_ascii=False, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(params.tensors[name], dtype="<f8").tobytes()
        for name in names
    )
    blob = (
        _CHECKPOINT_MAGIC
        + struct.pack("<Q", len(header_bytes))
        + header_bytes
        + payload
    )
    _atomic_write_bytes(Path(path), blob)


def load_checkpoint(
    path: str | os.PathLike[str],
) -> tuple[ModelParams, dict[str, object]]:
    """Read a checkpoint written by save_checkpoint(); exact round trip."""
    blob = Path(path).read_bytes()
    if blob[: len(_CHECKPOINT_MAGIC)] != _CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint (bad magic bytes)")
    offset = len(_CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    config = ModelConfig.from_dict(header["config"])
    tensors: dict[str, np.ndarray] = {}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape)) * 8 if shape else 8
        raw = blob[offset : offset + nbytes]
        if len(raw) != nbytes:
            raise ValueError(f"{path}: truncated tensor {spec['name']!r}")
        offset += nbytes
        tensors[spec["name"]] = (
            np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        )
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} unexpected trailing bytes")
    params = ModelParams(
        config=config, tensors=tensors, trainable=tuple(header["trainable"])
    )
    return params, header.get("extra", {})


def _tokenize(text: str) -> list[str]:
    return text.casefold().split()


class _TextClassifierBase(BaseEstimator, ClassifierMixin):
    """Shared fit/predict plumbing for the two text classifiers."""

    _kind: ModelKind

    def _model_config(self, class_count: int, dim: int, lexicon_dim: int) -> ModelConfig:
        raise NotImplementedError

    def _resolve_class_weights(
        self, y_indexed: np.ndarray, class_count: int
    ) -> tuple[float, ...] | None:
        spec = self.class_weight
        if spec is None:
            return None
        if spec == "balanced":
            counts = np.bincount(y_indexed, minlength=class_count)
            weights = len(y_indexed) / (class_count * np.maximum(counts, 1))
            return tuple(float(w) for w in weights)
        return tuple(float(spec.get(label, 1.0)) for label in self.classes_)

    def _lexicon_block(self, X: list[str], fitting: bool) -> np.ndarray | None:
        if self.lexicon is None:
            return None
        if fitting:
            self.vectorizer_ = EmotionCountVectorizer(
                lexicon=self.lexicon, mapping=self.mapping
            ).fit()
            counts = self.vectorizer_.transform(X)
            self.scaler_ = LexiconScaler(self.scaling).fit(counts)
        else:
            counts = self.vectorizer_.transform(X)
        return self.scaler_.transform(counts)

    def _dev_split(
        self, y_indexed: np.ndarray, class_count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        fraction = self.validation_fraction
        check_fraction(fraction, "validation_fraction")
        all_idx = np.arange(len(y_indexed))
        if fraction == 0.0:
            return all_idx, np.array([], dtype=np.int64)
        rng = derive_rng(self.seed, "fit", "dev")
        dev_parts = []
        for c in range(class_count):
            members = rng.permutation(np.flatnonzero(y_indexed == c))
            take = min(int(round(fraction * len(members))), len(members) - 1)
            if take > 0:
                dev_parts.append(members[:take])
        dev_idx = (
            np.sort(np.concatenate(dev_parts)) if dev_parts else np.array([], dtype=np.int64)
        )
        train_idx = np.setdiff1d(all_idx, dev_idx)
        return train_idx, dev_idx

    def fit(self, X, y):
        texts = check_text_list(X)
        y = list(y)
        if len(y) != len(texts):
            raise ValueError(f"got {len(texts)} texts but {len(y)} labels")
        if not texts:
            raise ValueError("cannot fit on an empty corpus")
        self.classes_ = np.unique(np.asarray(y))
        if len(self.classes_) < 2:
            raise ValueError("need at least two distinct classes")
        label_index = {label: i for i, label in enumerate(self.classes_)}
        y_indexed = np.array([label_index[label] for label in y], dtype=np.int64)

        token_seqs = [_tokenize(t) for t in texts]
        self.vocabulary_ = build_vocab(token_seqs, min_freq=self.min_frequency)
        if self.embeddings_path is not None:
            matrix = load_embeddings(self.embeddings_path, self.vocabulary_, seed=self.seed)
        else:
            matrix = random_embeddings(self.vocabulary_, self.embedding_dim, seed=self.seed)
        self.embedding_coverage_ = matrix.coverage
        encoded = np.stack(
            [encode_sequence(seq, self.vocabulary_, self.max_len) for seq in token_seqs]
        )
        lex = self._lexicon_block(texts, fitting=True)
        lexicon_dim = 0 if lex is None else lex.shape[1]

        config = self._model_config(len(self.classes_), matrix.dim, lexicon_dim)
        config = replace(
            config,
            class_weights=self._resolve_class_weights(y_indexed, len(self.classes_)),
        )
        train_idx, dev_idx = self._dev_split(y_indexed, len(self.classes_))
        dev_kwargs: dict[str, object] = {}
        if len(dev_idx):
            dev_kwargs = {
                "dev_token_ids": encoded[dev_idx],
                "dev_labels": y_indexed[dev_idx],
                "dev_lexicon": None if lex is None else lex[dev_idx],
            }
        self.config_ = config
        self.model_, self.history_ = train_model(
            config,
            matrix,
            encoded[train_idx],
            y_indexed[train_idx],
            lexicon=None if lex is None else lex[train_idx],
            **dev_kwargs,
        )
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise ValueError("this classifier must be fit before predicting")

    def _encode(self, X) -> tuple[np.ndarray, np.ndarray | None]:
        texts = check_text_list(X)
        if not texts:
            raise ValueError("cannot predict on an empty batch")
        encoded = np.stack(
            [encode_sequence(_tokenize(t), self.vocabulary_, self.max_len) for t in texts]
        )
        return encoded, self._lexicon_block(texts, fitting=False)

    def predict(self, X):
        self._check_fitted()
        encoded, lex = self._encode(X)
        indices, _ = predict(self.model_, encoded, lex)
        return self.classes_[indices]

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        encoded, lex = self._encode(X)
        _, probs = predict(self.model_, encoded, lex)
        return probs


class LogisticTextClassifier(_TextClassifierBase):
    """Multinomial logistic regression over mean-pooled token embeddings.

    The embedding table is a fixed feature map (only the output layer is
    trained).  When ``lexicon`` is set, scaled emotion counts are
    concatenated onto the pooled vector.
    """

    _kind = ModelKind.LOGREG

    def __init__(
        self,
        lexicon=None,
        mapping=None,
        scaling="log1p",
        max_len: int = 100,
        min_frequency: int = 1,
        embedding_dim: int = 64,
        embeddings_path=None,
        optimizer="adam",
        learning_rate: float = 1e-3,
        epochs: int = 20,
        batch_size: int = 32,
        dropout: float = 0.0,
        patience: int = 5,
        validation_fraction: float = 0.0,
        class_weight=None,
        seed: int = 42,
    ):
        self.lexicon = lexicon
        self.mapping = mapping
        self.scaling = scaling
        self.max_len = max_len
        self.min_frequency = min_frequency
        self.embedding_dim = embedding_dim
        self.embeddings_path = embeddings_path
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.dropout = dropout
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.class_weight = class_weight
        self.seed = seed

    def _model_config(self, class_count: int, dim: int, lexicon_dim: int) -> ModelConfig:
        return ModelConfig(
            kind=ModelKind.LOGREG,
            class_count=class_count,
            embedding_dim=dim,
            max_len=self.max_len,
            dropout=self.dropout,
            lexicon_dim=lexicon_dim,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
        )


class TextCNNClassifier(_TextClassifierBase):
    """Convolutional text classifier: parallel 1-D filters, ReLU,
    max-over-time pooling, optional lexicon fusion, softmax output."""

    _kind = ModelKind.TEXTCNN

    def __init__(
        self,
        lexicon=None,
        mapping=None,
        scaling="log1p",
        max_len: int = 100,
        min_frequency: int = 1,
        embedding_dim: int = 64,
        embeddings_path=None,
        filter_widths: tuple[int, ...] = (1, 2, 3, 5),
        filters_per_width: int = 32,
        trainable_embeddings: bool = True,
        optimizer="adam",
        learning_rate: float = 1e-3,
        epochs: int = 20,
        batch_size: int = 32,
        dropout: float = 0.2,
        patience: int = 5,
        validation_fraction: float = 0.0,
        class_weight=None,
        seed: int = 42,
    ):
        self.lexicon = lexicon
        self.mapping = mapping
        self.scaling = scaling
        self.max_len = max_len
        self.min_frequency = min_frequency
        self.embedding_dim = embedding_dim
        self.embeddings_path = embeddings_path
        self.filter_widths = filter_widths
        self.filters_per_width = filters_per_width
        self.trainable_embeddings = trainable_embeddings
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.dropout = dropout
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.class_weight = class_weight
        self.seed = seed

    def _model_config(self, class_count: int, dim: int, lexicon_dim: int) -> ModelConfig:
        return ModelConfig(
            kind=ModelKind.TEXTCNN,
            class_count=class_count,
            embedding_dim=dim,
            max_len=self.max_len,
            filter_widths=tuple(self.filter_widths),
            filters_per_width=self.filters_per_width,
            dropout=self.dropout,
            lexicon_dim=lexicon_dim,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            patience=self.patience,
            trainable_embeddings=self.trainable_embeddings,
            seed=self.seed,
        )
