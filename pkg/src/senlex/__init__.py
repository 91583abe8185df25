"""Lexicon-augmented sentiment classification for Vietnamese text."""

from __future__ import annotations

from .corpus import (
    CorpusFormat,
    CorpusSchema,
    CorpusStats,
    Document,
    corpus_stats,
    load_corpus,
    sample_corpus_path,
    split_corpus,
)
from .evaluation import (
    AblationCell,
    AblationReport,
    ClassMetrics,
    ConfusionMatrix,
    EvalReport,
    confusion_matrix,
    metrics,
    render_ablation,
    render_report,
    row_normalize,
)
from .experiment import (
    ExperimentConfig,
    TrainedPipeline,
    evaluate_pipeline,
    load_experiment_config,
    load_pipeline,
    run_ablation,
    save_pipeline,
    train_pipeline,
)
from .features import (
    EmbeddingMatrix,
    FeatureScaling,
    LexiconScaler,
    SequenceEncoder,
    Vocabulary,
    build_vocab,
    encode_sequence,
    load_embeddings,
    random_embeddings,
)
from .lexicon import (
    EMOTIONS,
    EmotionCountVector,
    EmotionCountVectorizer,
    EmotionLexicon,
    LabelMapping,
    build_matcher,
    builtin_mapping,
    count_emotions,
    load_lexicon,
    load_mapping,
    map_labels,
    sample_lexicon_path,
)
from .models import (
    LogisticTextClassifier,
    ModelConfig,
    TextCNNClassifier,
    TrainHistory,
    gradient_check,
    load_checkpoint,
    predict,
    save_checkpoint,
    train_model,
)
from .normalize import (
    NormalizerResources,
    TechniqueSet,
    TextNormalizer,
    packaged_resource_dir,
    run_pipeline,
)
from .randomness import derive_rng, derive_seed

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # corpus
    "CorpusFormat",
    "CorpusSchema",
    "CorpusStats",
    "Document",
    "corpus_stats",
    "load_corpus",
    "sample_corpus_path",
    "split_corpus",
    # normalization
    "NormalizerResources",
    "TechniqueSet",
    "TextNormalizer",
    "packaged_resource_dir",
    "run_pipeline",
    # lexicon
    "EMOTIONS",
    "EmotionCountVector",
    "EmotionCountVectorizer",
    "EmotionLexicon",
    "LabelMapping",
    "build_matcher",
    "builtin_mapping",
    "count_emotions",
    "load_lexicon",
    "load_mapping",
    "map_labels",
    "sample_lexicon_path",
    # features
    "EmbeddingMatrix",
    "FeatureScaling",
    "LexiconScaler",
    "SequenceEncoder",
    "Vocabulary",
    "build_vocab",
    "encode_sequence",
    "load_embeddings",
    "random_embeddings",
    # models
    "LogisticTextClassifier",
    "ModelConfig",
    "TextCNNClassifier",
    "TrainHistory",
    "gradient_check",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "train_model",
    # evaluation
    "AblationCell",
    "AblationReport",
    "ClassMetrics",
    "ConfusionMatrix",
    "EvalReport",
    "confusion_matrix",
    "metrics",
    "render_ablation",
    "render_report",
    "row_normalize",
    # experiments
    "ExperimentConfig",
    "TrainedPipeline",
    "evaluate_pipeline",
    "load_experiment_config",
    "load_pipeline",
    "run_ablation",
    "save_pipeline",
    "train_pipeline",
    # randomness
    "derive_rng",
    "derive_seed",
]
