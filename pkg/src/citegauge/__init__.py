"""citegauge: classify citations as incidental or influential from full texts."""

from .corpus import (
    CitationPair,
    Corpus,
    CorpusStats,
    PaperRecord,
    filter_valid_pairs,
    load_corpus,
    load_pairs,
)
from .citeparse import count_direct_citations
from .features import (
    FeatureVector,
    TfidfModel,
    author_overlap,
    cosine_similarity,
    extract_features,
    fit_tfidf,
    tokenize,
    vectorize,
)
from .forest import ForestConfig, ForestModel, predict, predict_proba, train
from .evaluation import (
    EvaluationReport,
    cross_validate,
    interpolated_precision,
    mean_average_precision,
    pearson,
    pr_curve,
    run_evaluation,
    stratified_folds,
)

__version__ = "0.1.0"

__all__ = [
    "CitationPair",
    "Corpus",
    "CorpusStats",
    "EvaluationReport",
    "FeatureVector",
    "ForestConfig",
    "ForestModel",
    "PaperRecord",
    "TfidfModel",
    "author_overlap",
    "cosine_similarity",
    "count_direct_citations",
    "cross_validate",
    "extract_features",
    "filter_valid_pairs",
    "fit_tfidf",
    "interpolated_precision",
    "load_corpus",
    "load_pairs",
    "mean_average_precision",
    "pearson",
    "pr_curve",
    "predict",
    "predict_proba",
    "run_evaluation",
    "stratified_folds",
    "tokenize",
    "train",
    "vectorize",
]
