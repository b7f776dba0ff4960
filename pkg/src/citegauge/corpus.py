"""Load and validate the paper corpus and the labeled citation-pair dataset.

A corpus is a directory of UTF-8 JSON documents, one object per file, with keys
``id``, ``title``, ``authors``, ``abstract`` (string or null), ``body`` and
``references`` (array of strings or null). Labels come from a TSV file with one
``citing_id<TAB>cited_id<TAB>label`` row per pair; a header row is detected by a
non-numeric third column.

Records are treated as immutable after loading and are safe to share across
threads read-only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass
class PaperRecord:
    """One publication: identity, metadata, and full running text."""

    id: str
    title: str
    authors: list[str]
    abstract: str | None = None
    body: str = ""
    references: list[str] | None = None


@dataclass
class CitationPair:
    """A labeled citing -> cited relation. Label 0 is incidental, 1 influential."""

    citing_id: str
    cited_id: str
    label: int


def pair_key(pair: CitationPair) -> tuple[str, str]:
    return (pair.citing_id, pair.cited_id)


@dataclass
class CorpusStats:
    """Raw and post-filter label counts for one dataset load."""

    total_pairs: int = 0
    incidental_count: int = 0
    influential_count: int = 0
    filtered_pairs: int = 0
    positive_after_filter: int = 0

    def check(self) -> None:
        """Raise DataError if the count arithmetic does not add up."""
        if self.incidental_count + self.influential_count != self.total_pairs:
            raise DataError(
                f"corpus stats inconsistent: {self.incidental_count} + "
                f"{self.influential_count} != {self.total_pairs}"
            )
        if self.filtered_pairs > self.total_pairs:
            raise DataError("filtered_pairs exceeds total_pairs")
        if self.positive_after_filter > self.influential_count:
            raise DataError("positive_after_filter exceeds influential_count")


@dataclass
class LoadIssue:
    """One recoverable problem encountered while loading (file- or row-level)."""

    source: str
    message: str


@dataclass
class Corpus:
    """Immutable paper index keyed by id, plus the per-file load report."""

    papers: dict[str, PaperRecord] = field(default_factory=dict)
    load_report: list[LoadIssue] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.papers

    def __getitem__(self, paper_id: str) -> PaperRecord:
        return self.papers[paper_id]

    def __iter__(self) -> Iterator[str]:
        return iter(self.papers)

    def get(self, paper_id: str) -> PaperRecord | None:
        return self.papers.get(paper_id)

    def records(self) -> list[PaperRecord]:
        return list(self.papers.values())


def has_abstract(record: PaperRecord | None) -> bool:
    """True when the record exists and carries a non-blank abstract."""
    return record is not None and record.abstract is not None


def paper_from_dict(data: dict, source: str = "<dict>") -> PaperRecord:
    """Build a validated PaperRecord from a decoded document object.

    Normalization: author strings are stripped and blanks dropped, a
    whitespace-only abstract becomes None, an empty references list becomes
    None. Violating the schema raises DataError.
    """
    if not isinstance(data, dict):
        raise DataError(f"{source}: document is not a JSON object")

    paper_id = data.get("id")
    if not isinstance(paper_id, str) or not paper_id.strip():
        raise DataError(f"{source}: missing or empty 'id'")

    title = data.get("title")
    if not isinstance(title, str):
        raise DataError(f"{source}: 'title' must be a string")

    raw_authors = data.get("authors")
    if not isinstance(raw_authors, list) or any(not isinstance(a, str) for a in raw_authors):
        raise DataError(f"{source}: 'authors' must be an array of strings")
    authors = [a.strip() for a in raw_authors if a.strip()]

    abstract = data.get("abstract")
    if abstract is not None and not isinstance(abstract, str):
        raise DataError(f"{source}: 'abstract' must be a string or null")
    if abstract is not None and not abstract.strip():
        abstract = None

    body = data.get("body")
    if not isinstance(body, str):
        raise DataError(f"{source}: 'body' must be a string")

    references = data.get("references")
    if references is not None:
        if not isinstance(references, list) or any(not isinstance(r, str) for r in references):
            raise DataError(f"{source}: 'references' must be an array of strings or null")
        references = [r for r in references if r.strip()] or None

    return PaperRecord(
        id=paper_id,
        title=title,
        authors=authors,
        abstract=abstract,
        body=body,
        references=references,
    )


def paper_to_dict(record: PaperRecord) -> dict:
    """Serialize a PaperRecord to the document-file object layout."""
    return {
        "id": record.id,
        "title": record.title,
        "authors": list(record.authors),
        "abstract": record.abstract,
        "body": record.body,
        "references": list(record.references) if record.references else None,
    }


def write_paper(record: PaperRecord, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(paper_to_dict(record), ensure_ascii=False, indent=2), encoding="utf-8"
    )


def load_corpus(path: str | Path) -> Corpus:
    """Load every ``*.json`` document under ``path`` into an id-keyed index.

    Malformed files are collected into the corpus load report and skipped;
    an unreadable directory or a duplicated id is fatal.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise DataError(f"corpus directory not readable: {directory}")

    corpus = Corpus()
    seen_files: dict[str, str] = {}
    for doc_path in sorted(directory.glob("*.json")):
        try:
            data = json.loads(doc_path.read_text(encoding="utf-8"))
            record = paper_from_dict(data, source=doc_path.name)
        except DataError as exc:
            corpus.load_report.append(LoadIssue(doc_path.name, str(exc)))
            continue
        except (OSError, ValueError) as exc:
            corpus.load_report.append(LoadIssue(doc_path.name, f"unreadable document: {exc}"))
            continue
        if record.id in corpus.papers:
            raise DataError(
                f"duplicate paper id '{record.id}' in {seen_files[record.id]} and {doc_path.name}"
            )
        seen_files[record.id] = doc_path.name
        corpus.papers[record.id] = record

    if corpus.load_report:
        logger.warning("corpus load skipped %d malformed document(s)", len(corpus.load_report))
    return corpus


def _looks_numeric(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def load_pairs(
    path: str | Path, corpus: Corpus
) -> tuple[list[CitationPair], CorpusStats, list[LoadIssue]]:
    """Load labeled citation pairs from a TSV file against a loaded corpus.

    Rows referencing ids absent from the corpus, malformed rows, and rows with
    labels outside {0, 1} are reported and dropped. The returned stats reflect
    raw label counts of the kept pairs, before any abstract filtering.
    """
    pairs_path = Path(path)
    if not pairs_path.is_file():
        raise DataError(f"pairs file not readable: {pairs_path}")

    pairs: list[CitationPair] = []
    issues: list[LoadIssue] = []
    first_data_row = True
    for lineno, line in enumerate(pairs_path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cols = [c.strip() for c in line.split("\t")]
        if first_data_row and len(cols) >= 3 and not _looks_numeric(cols[2]):
            first_data_row = False  # header row
            continue
        first_data_row = False
        if len(cols) != 3 or not cols[0] or not cols[1]:
            issues.append(LoadIssue(f"line {lineno}", f"malformed row: {line!r}"))
            continue
        citing_id, cited_id, label_text = cols
        if not _looks_numeric(label_text) or int(label_text) not in (0, 1):
            issues.append(LoadIssue(f"line {lineno}", f"label outside {{0,1}}: {label_text!r}"))
            continue
        if citing_id == cited_id:
            issues.append(LoadIssue(f"line {lineno}", f"self-pair rejected: {citing_id}"))
            continue
        missing = [p for p in (citing_id, cited_id) if p not in corpus]
        if missing:
            issues.append(
                LoadIssue(f"line {lineno}", f"dropped pair with unknown id(s): {', '.join(missing)}")
            )
            continue
        pairs.append(CitationPair(citing_id, cited_id, int(label_text)))

    influential = sum(p.label for p in pairs)
    stats = CorpusStats(
        total_pairs=len(pairs),
        incidental_count=len(pairs) - influential,
        influential_count=influential,
        filtered_pairs=len(pairs),
        positive_after_filter=influential,
    )
    stats.check()
    if issues:
        logger.warning("pair load dropped %d row(s)", len(issues))
    return pairs, stats, issues


def filter_valid_pairs(
    pairs: list[CitationPair], corpus: Corpus, stats: CorpusStats | None = None
) -> list[CitationPair]:
    """Keep only pairs where both endpoints have a non-empty abstract.

    Ordering is preserved and the filter is idempotent. When ``stats`` is
    given, its filtered counts are updated in place.
    """
    kept = [
        p
        for p in pairs
        if has_abstract(corpus.get(p.citing_id)) and has_abstract(corpus.get(p.cited_id))
    ]
    if stats is not None:
        stats.filtered_pairs = len(kept)
        stats.positive_after_filter = sum(p.label for p in kept)
        stats.check()
    return kept
