"""Cross-validated scoring and the metric battery: interpolated precision at
fixed recall levels, Pearson correlation with two-tailed significance, and
mean average precision.

Rankings break score ties by ascending pair id, so every metric here is
deterministic. Interpolated precision rows are checked for monotonicity every
time a report is assembled.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc

from .corpus import CitationPair, CorpusStats, pair_key
from .errors import ConfigurationError, EvaluationError
from .features import FEATURE_NAMES
from .forest import ForestConfig, SplitMix64, derive_seed, predict_proba, train

logger = logging.getLogger(__name__)

DEFAULT_RECALL_LEVELS = (0.05, 0.1, 0.3, 0.5, 0.7, 0.9)

FEATURE_SET_ALL = "all"


@dataclass
class FoldAssignment:
    k: int
    fold_of: dict[tuple[str, str], int]


@dataclass
class ScoredPair:
    pair: CitationPair
    score: float


@dataclass
class CorrelationResult:
    r: float
    p_value: float
    n: int


@dataclass
class EvaluationReport:
    pr_grid: dict[str, dict[float, float]]  # feature set -> recall level -> precision
    correlations: dict[str, CorrelationResult | None]
    map_score: float
    stats: CorpusStats
    config: dict
    pr_points: dict[str, list[tuple[float, float]]] = field(default_factory=dict)


def stratified_folds(pairs: Sequence[CitationPair], k: int, seed: int) -> FoldAssignment:
    """Partition pairs into k folds, stratified by label.

    Within each class, pairs are put into canonical (sorted-id) order, shuffled
    by a seeded stream, and dealt round-robin, so per-fold class counts differ
    by at most 1 and the assignment is independent of input order. Classes
    smaller than k simply spread one per fold until exhausted.
    """
    if k < 2:
        raise ConfigurationError(f"fold count must be >= 2, got {k}")
    if k > len(pairs):
        raise ConfigurationError(f"fold count {k} exceeds pair count {len(pairs)}")

    fold_of: dict[tuple[str, str], int] = {}
    for label in (0, 1):
        members = sorted((pair_key(p) for p in pairs if p.label == label))
        rng = SplitMix64(derive_seed(seed, label))
        rng.shuffle(members)
        for position, key in enumerate(members):
            fold_of[key] = position % k
    return FoldAssignment(k=k, fold_of=fold_of)


def cross_validate(
    pairs: Sequence[CitationPair],
    features: Mapping[tuple[str, str], Sequence[float]],
    config: ForestConfig,
    k: int,
    seed: int,
    feature_names: Sequence[str] = FEATURE_NAMES,
    fold_log: list | None = None,
) -> list[ScoredPair]:
    """Stratified k-fold cross-validation: each fold is scored by a forest
    trained on the other k-1 folds. Returns one ScoredPair per input pair, in
    input order. Per-fold model seeds derive from ``seed`` and the fold index.

    ``fold_log``, when given, collects (fold, train_keys, test_keys) tuples.
    """
    for pair in pairs:
        if pair_key(pair) not in features:
            raise EvaluationError(f"no feature vector for pair {pair_key(pair)}")

    assignment = stratified_folds(pairs, k, seed)
    scores: dict[tuple[str, str], float] = {}
    for fold in range(k):
        train_pairs = [p for p in pairs if assignment.fold_of[pair_key(p)] != fold]
        test_pairs = [p for p in pairs if assignment.fold_of[pair_key(p)] == fold]
        if not test_pairs:
            continue
        labels = {p.label for p in train_pairs}
        if len(labels) < 2:
            raise EvaluationError(
                f"fold {fold}: training split contains a single class "
                f"({len(train_pairs)} rows, labels {sorted(labels)})"
            )
        fold_config = replace(config, seed=derive_seed(seed, 1000 + fold))
        model = train(
            [(features[pair_key(p)], p.label) for p in train_pairs],
            fold_config,
            row_ids=[pair_key(p) for p in train_pairs],
            feature_names=feature_names,
        )
        if fold_log is not None:
            fold_log.append(
                (fold, [pair_key(p) for p in train_pairs], [pair_key(p) for p in test_pairs])
            )
        for pair in test_pairs:
            scores[pair_key(pair)] = predict_proba(model, features[pair_key(pair)])
    return [ScoredPair(pair=p, score=scores[pair_key(p)]) for p in pairs]


def _ranked(scored: Sequence[ScoredPair]) -> list[ScoredPair]:
    return sorted(scored, key=lambda s: (-s.score, pair_key(s.pair)))


def pr_curve(scored: Sequence[ScoredPair]) -> list[tuple[float, float]]:
    """Precision/recall points, one per ranking prefix, ties broken by pair id."""
    positives = sum(s.pair.label for s in scored)
    if positives == 0:
        raise EvaluationError("precision/recall undefined: no positive pairs")
    points = []
    true_pos = 0
    for rank, item in enumerate(_ranked(scored), start=1):
        true_pos += item.pair.label
        points.append((true_pos / positives, true_pos / rank))
    return points


def interpolated_precision(
    curve: Sequence[tuple[float, float]], recall_levels: Sequence[float]
) -> dict[float, float]:
    """Max precision over all curve points with recall >= each level (0 if none)."""
    result = {}
    for level in recall_levels:
        eligible = [prec for recall, prec in curve if recall >= level - 1e-12]
        result[level] = max(eligible) if eligible else 0.0
    return result


def pearson(values: Sequence[float], labels: Sequence[int]) -> CorrelationResult:
    """Sample Pearson r with a two-tailed p-value from the t distribution
    (n-2 degrees of freedom, via the regularized incomplete beta function)."""
    n = len(values)
    if n != len(labels):
        raise ConfigurationError("values and labels must have equal length")
    if n < 3:
        raise EvaluationError(f"correlation needs n >= 3, got {n}")
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    var_x = float(dx @ dx)
    var_y = float(dy @ dy)
    if var_x == 0.0 or var_y == 0.0:
        raise EvaluationError("correlation undefined: zero variance")
    r = float(dx @ dy) / math.sqrt(var_x * var_y)
    r = max(-1.0, min(1.0, r))

    dof = n - 2
    if 1.0 - r * r < 1e-15:
        p_value = 0.0
    else:
        t_sq = r * r * dof / (1.0 - r * r)
        p_value = float(betainc(dof / 2.0, 0.5, dof / (dof + t_sq)))
    return CorrelationResult(r=r, p_value=p_value, n=n)


def mean_average_precision(scored: Sequence[ScoredPair]) -> float:
    """Average over positives of the precision at each positive's rank."""
    positives = sum(s.pair.label for s in scored)
    if positives == 0:
        raise EvaluationError("average precision undefined: no positive pairs")
    total = 0.0
    true_pos = 0
    for rank, item in enumerate(_ranked(scored), start=1):
        if item.pair.label == 1:
            true_pos += 1
            total += true_pos / rank
    return total / positives


def direct_rank_scores(
    pairs: Sequence[CitationPair],
    features: Mapping[tuple[str, str], Sequence[float]],
    feature_index: int,
) -> list[ScoredPair]:
    """Rank pairs by one raw feature value, scaled by the maximum so scores lie
    in [0, 1]; the ordering (and all rank metrics) is unchanged by the scaling."""
    values = [float(features[pair_key(p)][feature_index]) for p in pairs]
    top = max(values) if values else 0.0
    if top <= 0.0:
        return [ScoredPair(p, 0.0) for p in pairs]
    return [ScoredPair(p, v / top) for p, v in zip(pairs, values)]


def build_report(
    pairs: Sequence[CitationPair],
    features: Mapping[tuple[str, str], Sequence[float]],
    scored_sets: Mapping[str, Sequence[ScoredPair]],
    recall_levels: Sequence[float] = DEFAULT_RECALL_LEVELS,
    stats: CorpusStats | None = None,
    config_echo: dict | None = None,
    feature_names: Sequence[str] = FEATURE_NAMES,
) -> EvaluationReport:
    """Assemble the full evaluation report.

    ``scored_sets`` maps feature-set names (single features plus "all") to their
    pooled scored lists. Correlations are computed feature-vs-label directly;
    the MAP figure comes from the "all" set when present, else the first set.
    """
    pr_grid: dict[str, dict[float, float]] = {}
    pr_points: dict[str, list[tuple[float, float]]] = {}
    for name, scored in scored_sets.items():
        curve = pr_curve(scored)
        grid = interpolated_precision(curve, recall_levels)
        ordered = [grid[level] for level in sorted(grid)]
        if any(a < b - 1e-12 for a, b in zip(ordered, ordered[1:])):
            raise EvaluationError(f"interpolated precision not monotone for {name}")
        pr_grid[name] = grid
        pr_points[name] = curve

    labels = [p.label for p in pairs]
    correlations: dict[str, CorrelationResult | None] = {}
    for j, name in enumerate(feature_names):
        values = [float(features[pair_key(p)][j]) for p in pairs]
        try:
            correlations[name] = pearson(values, labels)
        except EvaluationError as exc:
            logger.warning("correlation for %s undefined: %s", name, exc)
            correlations[name] = None

    map_source = scored_sets.get(FEATURE_SET_ALL)
    if map_source is None:
        map_source = next(iter(scored_sets.values()))
    return EvaluationReport(
        pr_grid=pr_grid,
        correlations=correlations,
        map_score=mean_average_precision(map_source),
        stats=stats or CorpusStats(),
        config=dict(config_echo or {}),
        pr_points=pr_points,
    )


def run_evaluation(
    pairs: Sequence[CitationPair],
    features: Mapping[tuple[str, str], Sequence[float]],
    forest_config: ForestConfig,
    k: int,
    seed: int,
    recall_levels: Sequence[float] = DEFAULT_RECALL_LEVELS,
    single_feature_mode: str = "direct_rank",
    stats: CorpusStats | None = None,
    config_echo: dict | None = None,
) -> EvaluationReport:
    """Cross-validate the all-features forest, rank each single feature, and
    build the report. single_feature_mode "forest" scores each feature with its
    own one-feature cross-validated forest instead of the raw value ranking."""
    if single_feature_mode not in ("direct_rank", "forest"):
        raise ConfigurationError(f"unknown single-feature mode: {single_feature_mode!r}")

    scored_sets: dict[str, Sequence[ScoredPair]] = {}
    for j, name in enumerate(FEATURE_NAMES):
        if single_feature_mode == "direct_rank":
            scored_sets[name] = direct_rank_scores(pairs, features, j)
        else:
            projected = {key: (row[j],) for key, row in features.items()}
            single_config = replace(forest_config, features_per_split=1)
            scored_sets[name] = cross_validate(
                pairs, projected, single_config, k, derive_seed(seed, 2000 + j),
                feature_names=(name,),
            )
    scored_sets[FEATURE_SET_ALL] = cross_validate(pairs, features, forest_config, k, seed)

    return build_report(
        pairs,
        features,
        scored_sets,
        recall_levels=recall_levels,
        stats=stats,
        config_echo=config_echo,
    )


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "pr_grid": {
            name: {f"{level:g}": precision for level, precision in grid.items()}
            for name, grid in report.pr_grid.items()
        },
        "correlations": {
            name: asdict(corr) if corr is not None else None
            for name, corr in report.correlations.items()
        },
        "map_score": report.map_score,
        "stats": asdict(report.stats),
        "config": report.config,
        "pr_points": {
            name: [[recall, precision] for recall, precision in points]
            for name, points in report.pr_points.items()
        },
    }


def write_report_json(report: EvaluationReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _set_order(report: EvaluationReport) -> list[str]:
    singles = [n for n in FEATURE_NAMES if n in report.pr_grid]
    extras = [n for n in report.pr_grid if n not in singles]
    return singles + extras


def write_pr_grid_csv(report: EvaluationReport, path: str | Path) -> None:
    """One row per feature set, one column per recall level."""
    levels = sorted({level for grid in report.pr_grid.values() for level in grid})
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["feature_set"] + [f"p_at_r{level:g}" for level in levels])
        for name in _set_order(report):
            grid = report.pr_grid[name]
            writer.writerow([name] + [f"{grid[level]:.6f}" if level in grid else "" for level in levels])


def write_correlations_csv(report: EvaluationReport, path: str | Path) -> None:
    """One row per single feature: precision at recall 0.9 plus the Pearson result."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["feature", "p_at_r0.9", "pearson_r", "p_value", "n"])
        for name in FEATURE_NAMES:
            if name not in report.correlations:
                continue
            p_at_90 = ""
            if name in report.pr_points:
                p_at_90 = f"{interpolated_precision(report.pr_points[name], [0.9])[0.9]:.6f}"
            corr = report.correlations[name]
            if corr is None:
                writer.writerow([name, p_at_90, "", "", ""])
            else:
                writer.writerow([name, p_at_90, f"{corr.r:.6f}", f"{corr.p_value:.6g}", corr.n])


def write_pr_points_csv(report: EvaluationReport, path: str | Path) -> None:
    """Plot-ready curve points: recall,precision,feature_set."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["recall", "precision", "feature_set"])
        for name in _set_order(report):
            for recall, precision in report.pr_points.get(name, []):
                writer.writerow([f"{recall:.6f}", f"{precision:.6f}", name])
