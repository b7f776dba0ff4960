"""The three per-pair predictors: direct-citation count, author overlap,
and abstract tf-idf cosine similarity."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .citeparse import DEFAULT_MATCH_THRESHOLD, analyze_citations
from .corpus import CitationPair, Corpus
from .errors import ConfigurationError, DataError
from .textnorm import normalize_author, tokenize

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("f1", "f4", "f9")


@dataclass
class FeatureVector:
    f1_direct_count: int
    f4_author_overlap: float
    f9_abstract_sim: float

    def as_row(self) -> tuple[float, float, float]:
        return (float(self.f1_direct_count), self.f4_author_overlap, self.f9_abstract_sim)


@dataclass
class TfidfModel:
    """Vocabulary, document frequencies, and document count fitted on a collection.

    Immutable after fitting; shared read-only across threads.
    """

    vocabulary: dict[str, int]
    document_frequency: dict[str, int]
    document_count: int

    def idf(self, term: str) -> float:
        # smoothed idf: ln((1 + N) / (1 + df)) + 1
        df = self.document_frequency[term]
        return math.log((1 + self.document_count) / (1 + df)) + 1.0


def fit_tfidf(abstracts: Sequence[str]) -> TfidfModel:
    """Fit a tf-idf model over a document collection (at least 2 documents).

    The vocabulary covers every term in any document and is sorted
    lexicographically, so the model is independent of document order.
    """
    if len(abstracts) < 2:
        raise ConfigurationError(
            f"tf-idf needs at least 2 documents, got {len(abstracts)}"
        )
    document_frequency: dict[str, int] = {}
    for text in abstracts:
        for term in set(tokenize(text)):
            document_frequency[term] = document_frequency.get(term, 0) + 1
    vocabulary = {term: dim for dim, term in enumerate(sorted(document_frequency))}
    return TfidfModel(vocabulary, document_frequency, len(abstracts))


def vectorize(model: TfidfModel, text: str) -> dict[int, float]:
    """Sparse tf-idf vector of a text: raw term frequency times idf, by dimension.

    Out-of-vocabulary terms are ignored; empty or fully out-of-vocabulary text
    gives the zero vector.
    """
    counts: dict[str, int] = {}
    for term in tokenize(text):
        if term in model.vocabulary:
            counts[term] = counts.get(term, 0) + 1
    return {model.vocabulary[term]: tf * model.idf(term) for term, tf in counts.items()}


def _as_sparse(vector) -> Mapping:
    if isinstance(vector, Mapping):
        return vector
    return {i: v for i, v in enumerate(vector)}


def cosine_similarity(a, b) -> float:
    """Cosine of two nonnegative vectors (sparse mappings or dense sequences),
    clamped to [0, 1]. Zero-norm inputs give 0."""
    sa, sb = _as_sparse(a), _as_sparse(b)
    norm_sq_a = sum(v * v for v in sa.values())
    norm_sq_b = sum(v * v for v in sb.values())
    if norm_sq_a == 0.0 or norm_sq_b == 0.0:
        return 0.0
    dot = sum(v * sb[k] for k, v in sa.items() if k in sb)
    return min(1.0, max(0.0, dot / math.sqrt(norm_sq_a * norm_sq_b)))


def author_overlap(
    citing_authors: Iterable[str], cited_authors: Iterable[str], mode: str = "jaccard"
) -> float:
    """Jaccard overlap of normalized author-name sets, in [0, 1].

    Names reduce to "surname first-initial" labels; duplicates and ordering are
    irrelevant. mode="boolean" collapses any overlap to 1.0. Either side empty
    gives 0.
    """
    if mode not in ("jaccard", "boolean"):
        raise ConfigurationError(f"unknown author-overlap mode: {mode!r}")
    set_a = {normalize_author(a) for a in citing_authors} - {""}
    set_b = {normalize_author(a) for a in cited_authors} - {""}
    if not set_a or not set_b:
        return 0.0
    shared = len(set_a & set_b)
    if mode == "boolean":
        return 1.0 if shared else 0.0
    return shared / len(set_a | set_b)


def extract_features(
    pair: CitationPair,
    corpus: Corpus,
    tfidf: TfidfModel,
    f4_mode: str = "jaccard",
    match_threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> FeatureVector:
    """Compute the full feature vector for one citation pair. Deterministic."""
    citing = corpus.get(pair.citing_id)
    cited = corpus.get(pair.cited_id)
    if citing is None or cited is None:
        missing = pair.citing_id if citing is None else pair.cited_id
        raise DataError(f"pair {pair.citing_id} -> {pair.cited_id}: missing record {missing}")
    f1 = analyze_citations(citing, cited, threshold=match_threshold).count
    f4 = author_overlap(citing.authors, cited.authors, mode=f4_mode)
    f9 = cosine_similarity(
        vectorize(tfidf, citing.abstract or ""), vectorize(tfidf, cited.abstract or "")
    )
    return FeatureVector(f1, f4, f9)


def fit_corpus_tfidf(corpus: Corpus) -> TfidfModel:
    """Fit tf-idf over every abstract present in the corpus (not just paired papers)."""
    abstracts = [r.abstract for r in corpus.records() if r.abstract is not None]
    return fit_tfidf(abstracts)


def compute_feature_matrix(
    corpus: Corpus,
    pairs: Sequence[CitationPair],
    tfidf: TfidfModel | None = None,
    f4_mode: str = "jaccard",
    match_threshold: float = DEFAULT_MATCH_THRESHOLD,
    threads: int = 1,
) -> tuple[list[tuple[CitationPair, FeatureVector]], list[dict]]:
    """Extract features for every pair, collecting per-pair warnings.

    Per-pair extraction is read-only over shared state, so it parallelizes
    freely; results are identical for any thread count. Pairs that fail
    extraction are excluded and reported in the warnings list.
    """
    if tfidf is None:
        tfidf = fit_corpus_tfidf(corpus)
    abstract_vectors = {
        r.id: vectorize(tfidf, r.abstract) for r in corpus.records() if r.abstract is not None
    }

    warnings: list[dict] = []

    def one(pair: CitationPair):
        citing = corpus.get(pair.citing_id)
        cited = corpus.get(pair.cited_id)
        if citing is None or cited is None:
            return pair, None, [
                {
                    "citing_id": pair.citing_id,
                    "cited_id": pair.cited_id,
                    "type": "extraction-error",
                    "detail": "missing record",
                }
            ]
        analysis = analyze_citations(citing, cited, threshold=match_threshold)
        notes = [
            {
                "citing_id": pair.citing_id,
                "cited_id": pair.cited_id,
                "type": "warning",
                "detail": w,
            }
            for w in analysis.warnings
        ]
        if analysis.unresolved:
            notes.append(
                {
                    "citing_id": pair.citing_id,
                    "cited_id": pair.cited_id,
                    "type": "unresolved-markers",
                    "detail": f"{len(analysis.unresolved)} marker(s) could not be linked",
                }
            )
        f4 = author_overlap(citing.authors, cited.authors, mode=f4_mode)
        f9 = cosine_similarity(
            abstract_vectors.get(pair.citing_id, {}), abstract_vectors.get(pair.cited_id, {})
        )
        return pair, FeatureVector(analysis.count, f4, f9), notes

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]

    rows: list[tuple[CitationPair, FeatureVector]] = []
    for pair, vector, notes in results:
        warnings.extend(notes)
        if vector is not None:
            rows.append((pair, vector))
    return rows, warnings


def write_feature_matrix(
    rows: Sequence[tuple[CitationPair, FeatureVector]], path: str | Path
) -> None:
    """Write the feature matrix CSV: citing_id,cited_id,f1,f4,f9,label (floats at 6 dp)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["citing_id", "cited_id", "f1", "f4", "f9", "label"])
        for pair, vec in rows:
            writer.writerow(
                [
                    pair.citing_id,
                    pair.cited_id,
                    vec.f1_direct_count,
                    f"{vec.f4_author_overlap:.6f}",
                    f"{vec.f9_abstract_sim:.6f}",
                    pair.label,
                ]
            )
