"""Command-line interface wiring corpus -> parsing -> features -> training -> evaluation.

Every command is deterministic given its configuration (including the seed);
re-running a command produces byte-identical artifacts. Exit codes: 0 success,
1 usage or configuration error, 2 data error, 3 internal error. The
CITEGAUGE_LOG environment variable (DEBUG/INFO/WARNING/ERROR) controls log
verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import citeparse, corpus as corpus_mod, evaluation, features as features_mod
from .errors import ConfigurationError, DataError
from .forest import ForestConfig

logger = logging.getLogger(__name__)

_CONFIG_FIELDS = (
    "corpus_dir",
    "pairs_file",
    "seed",
    "trees",
    "folds",
    "recall_levels",
    "f4_mode",
    "single_feature_mode",
    "threads",
    "output_dir",
)


@dataclass
class RunConfig:
    corpus_dir: str | None = None
    pairs_file: str | None = None
    seed: int = 42
    trees: int = 100
    folds: int = 10
    recall_levels: list[float] = field(
        default_factory=lambda: list(evaluation.DEFAULT_RECALL_LEVELS)
    )
    f4_mode: str = "jaccard"
    single_feature_mode: str = "direct_rank"
    threads: int = 1
    output_dir: str = "citegauge-out"

    def validate(self) -> None:
        if self.folds < 2:
            raise ConfigurationError("--folds must be >= 2")
        if self.trees < 1:
            raise ConfigurationError("--trees must be >= 1")
        if self.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        if self.f4_mode not in ("jaccard", "boolean"):
            raise ConfigurationError("--f4-mode must be jaccard or boolean")
        if self.single_feature_mode not in ("direct_rank", "forest"):
            raise ConfigurationError("--single-feature-mode must be direct_rank or forest")
        levels = self.recall_levels
        if not levels or any(not 0.0 < r <= 1.0 for r in levels):
            raise ConfigurationError("recall levels must lie in (0, 1]")
        if any(a >= b for a, b in zip(levels, levels[1:])):
            raise ConfigurationError("recall levels must be strictly increasing")


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--corpus", dest="corpus_dir", metavar="DIR")
    common.add_argument("--pairs", dest="pairs_file", metavar="FILE")
    common.add_argument("--seed", type=int)
    common.add_argument("--trees", type=int)
    common.add_argument("--folds", type=int)
    common.add_argument("--recall-levels", dest="recall_levels", metavar="CSV")
    common.add_argument("--f4-mode", dest="f4_mode", choices=["jaccard", "boolean"])
    common.add_argument(
        "--single-feature-mode",
        dest="single_feature_mode",
        choices=["direct_rank", "forest"],
    )
    common.add_argument("--threads", type=int)
    common.add_argument("--output", dest="output_dir", metavar="DIR")
    common.add_argument("--config", dest="config_file", metavar="JSON")

    parser = _Parser(prog="citegauge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="load and validate corpus and pairs")
    sub.add_parser("features", parents=[common], help="write the feature matrix CSV")
    sub.add_parser("evaluate", parents=[common], help="cross-validate and write the report")
    report = sub.add_parser("report", help="render a report JSON as aligned tables")
    report.add_argument("report_path", metavar="REPORT_JSON")
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    """Flags beat the --config file, which beats the defaults."""
    file_values = {}
    if getattr(args, "config_file", None):
        config_path = Path(args.config_file)
        if not config_path.is_file():
            raise ConfigurationError(f"config file not found: {config_path}")
        try:
            loaded = json.loads(config_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(loaded) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        file_values = loaded

    merged = RunConfig()
    for name in _CONFIG_FIELDS:
        flag_value = getattr(args, name, None)
        if name == "recall_levels" and isinstance(flag_value, str):
            try:
                flag_value = [float(part) for part in flag_value.split(",") if part.strip()]
            except ValueError as exc:
                raise ConfigurationError(f"bad --recall-levels: {exc}") from exc
        if flag_value is not None:
            setattr(merged, name, flag_value)
        elif name in file_values:
            setattr(merged, name, file_values[name])
    merged.validate()
    return merged


def _require_inputs(config: RunConfig) -> None:
    if not config.corpus_dir or not config.pairs_file:
        raise ConfigurationError("--corpus and --pairs are required")


def _load_dataset(config: RunConfig):
    corpus = corpus_mod.load_corpus(config.corpus_dir)
    pairs, stats, issues = corpus_mod.load_pairs(config.pairs_file, corpus)
    valid = corpus_mod.filter_valid_pairs(pairs, corpus, stats)
    return corpus, pairs, valid, stats, issues


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_ingest(config: RunConfig) -> int:
    _require_inputs(config)
    corpus, pairs, _, stats, issues = _load_dataset(config)

    unresolved_by_paper = {}
    unparseable = []
    for citing_id in sorted({p.citing_id for p in pairs}):
        main_text, entries = citeparse.paper_bibliography(corpus[citing_id])
        if not entries:
            unparseable.append(citing_id)
            continue
        _, unresolved = citeparse.find_in_text_citations(main_text, entries)
        if unresolved:
            unresolved_by_paper[citing_id] = len(unresolved)

    out = _out_dir(config)
    _write_json(
        out / "ingest_report.json",
        {
            "stats": asdict(stats),
            "load_issues": [asdict(i) for i in corpus.load_report],
            "pair_issues": [asdict(i) for i in issues],
            "unresolved_markers": unresolved_by_paper,
            "unparseable_bibliographies": unparseable,
        },
    )

    print(f"papers loaded: {len(corpus)} ({len(corpus.load_report)} malformed skipped)")
    print(
        f"pairs loaded: {stats.total_pairs} "
        f"({stats.incidental_count} incidental / {stats.influential_count} influential)"
    )
    print(
        f"pairs after abstract filter: {stats.filtered_pairs} "
        f"({stats.positive_after_filter} influential)"
    )
    if issues:
        print(f"dropped pair rows: {len(issues)}")
    total_unresolved = sum(unresolved_by_paper.values())
    print(
        f"unresolved citation markers: {total_unresolved} across "
        f"{len(unresolved_by_paper)} paper(s); unparseable bibliographies: {len(unparseable)}"
    )
    print(f"report written to {out / 'ingest_report.json'}")
    return 0


def _feature_rows(config: RunConfig, corpus, valid_pairs):
    return features_mod.compute_feature_matrix(
        corpus,
        valid_pairs,
        f4_mode=config.f4_mode,
        threads=config.threads,
    )


def cmd_features(config: RunConfig) -> int:
    _require_inputs(config)
    corpus, _, valid, stats, _ = _load_dataset(config)
    if not valid:
        raise DataError("no pairs survived the abstract filter; nothing to extract")

    rows, warnings = _feature_rows(config, corpus, valid)
    if not rows:
        raise DataError("feature extraction failed for every pair")

    out = _out_dir(config)
    features_mod.write_feature_matrix(rows, out / "features.csv")
    _write_json(out / "features_warnings.json", warnings)
    print(f"feature matrix: {len(rows)} pairs -> {out / 'features.csv'}")
    print(f"warnings: {len(warnings)} -> {out / 'features_warnings.json'}")
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    _require_inputs(config)
    corpus, _, valid, stats, _ = _load_dataset(config)
    if not valid:
        raise DataError("no pairs survived the abstract filter; nothing to evaluate")

    rows, _ = _feature_rows(config, corpus, valid)
    pairs = [pair for pair, _ in rows]
    feature_map = {corpus_mod.pair_key(pair): vec.as_row() for pair, vec in rows}

    report = evaluation.run_evaluation(
        pairs,
        feature_map,
        ForestConfig(tree_count=config.trees, seed=config.seed),
        k=config.folds,
        seed=config.seed,
        recall_levels=config.recall_levels,
        single_feature_mode=config.single_feature_mode,
        stats=stats,
        config_echo={name: getattr(config, name) for name in _CONFIG_FIELDS},
    )

    out = _out_dir(config)
    evaluation.write_report_json(report, out / "report.json")
    evaluation.write_pr_grid_csv(report, out / "pr_grid.csv")
    evaluation.write_correlations_csv(report, out / "correlations.csv")
    evaluation.write_pr_points_csv(report, out / "pr_points.csv")

    for name in features_mod.FEATURE_NAMES:
        corr = report.correlations[name]
        if corr is None:
            print(f"pearson {name}: undefined (zero variance)")
        else:
            print(f"pearson {name}: r={corr.r:.4f} p={corr.p_value:.4g} n={corr.n}")
    print(f"MAP (all-features forest): {report.map_score:.4f}")
    print(f"report written to {out / 'report.json'}")
    return 0


def _render_report(data: dict) -> str:
    for required in ("pr_grid", "correlations", "map_score"):
        if required not in data:
            raise DataError(f"report missing '{required}'")

    lines = []
    grid = data["pr_grid"]
    levels = sorted({float(level) for row in grid.values() for level in row})
    singles = [n for n in features_mod.FEATURE_NAMES if n in grid]
    names = singles + [n for n in grid if n not in singles]

    header = ["feature_set"] + [f"P@R={level:g}" for level in levels]
    table = [header]
    for name in names:
        row = [name]
        for level in levels:
            value = grid[name].get(f"{level:g}")
            row.append("-" if value is None else f"{value:.2f}")
        table.append(row)
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines.append("interpolated precision at recall levels")
    for row in table:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())

    lines.append("")
    lines.append("feature correlations with the gold labels")
    corr_table = [["feature", "pearson_r", "p_value", "n"]]
    for name, corr in data["correlations"].items():
        if corr is None:
            corr_table.append([name, "undefined", "-", "-"])
        else:
            corr_table.append(
                [name, f"{corr['r']:.3f}", f"{corr['p_value']:.3g}", str(corr["n"])]
            )
    widths = [max(len(row[i]) for row in corr_table) for i in range(4)]
    for row in corr_table:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())

    lines.append("")
    lines.append(f"MAP: {data['map_score']:.4f}")
    return "\n".join(lines)


def cmd_report(report_path: str) -> int:
    path = Path(report_path)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DataError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError("report is not a JSON object")
    print(_render_report(data))
    return 0


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CITEGAUGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.report_path)
        config = _merge_config(args)
        if args.command == "ingest":
            return cmd_ingest(config)
        if args.command == "features":
            return cmd_features(config)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        raise ConfigurationError(f"unknown command: {args.command}")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - exit-code contract
        logger.debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
