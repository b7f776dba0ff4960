"""Reference-section segmentation, bibliography parsing, and in-text citation counting.

All functions here are pure over immutable inputs and safe to call concurrently.
Detection failures never raise: an unparseable bibliography or an unlinkable
marker degrades to a warning and a zero count.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .corpus import PaperRecord
from .textnorm import fold, surname_key, tokenize

logger = logging.getLogger(__name__)

# Reference-section heading on a line of its own; the *last* occurrence wins.
_HEADING_RE = re.compile(
    r"^[ \t]*(?:References|REFERENCES|Bibliography|BIBLIOGRAPHY)[ \t]*:?[ \t]*$",
    re.MULTILINE,
)

# Entry-start keys inside the reference block: "[7] ..." or "7. ..."
_BRACKET_KEY_RE = re.compile(r"^[ \t]*\[(\d{1,3})\]")
_DOTTED_KEY_RE = re.compile(r"^[ \t]*(\d{1,3})\.(?=\s)")

_YEAR_RE = re.compile(r"(?<!\d)(1[89]\d{2}|20\d{2}|2100)(?!\d)")

# Name token for author-year markers; capitalization is checked in code because
# the class must stay unicode-friendly.
_NAME = r"[^\W\d_][\w'’\-]+"

# Numeric in-text markers: [3], [2,5], [1-4], [2, 7; 9]. \s spans line breaks.
_NUM_MARKER_RE = re.compile(r"\[\s*\d{1,3}(?:\s*(?:[,;]|[-–])\s*\d{1,3})*\s*\]")
_RANGE_ITEM_RE = re.compile(r"(\d{1,3})\s*[-–]\s*(\d{1,3})|(\d{1,3})")

# Parenthetical author-year: one "(...)" group, split on ';' into segments like
# "Smith, 2010", "Smith and Lee, 2011", "Smith et al., 2012", "see Smith 2013".
_PAREN_RE = re.compile(r"\(([^()]{1,300})\)", re.DOTALL)
_PAREN_SEG_RE = re.compile(
    rf"^(?:(?:see|cf|e\.g|i\.e)\.?,?\s+)?"
    rf"({_NAME})(?:\s*(?:,|\s)\s*(?:and|&)\s+({_NAME}))?"
    rf"(?:,?\s+et\s+al\.?)?"
    rf",?\s+((?:1[89]|20)\d{{2}})[a-z]?$",
    re.DOTALL,
)

# Narrative author-year: "Smith (2010)", "Smith and Lee (2011)", "Smith et al. (2012)".
_NARRATIVE_RE = re.compile(
    rf"\b({_NAME})(?:\s*(?:,|\s)\s*(?:and|&)\s+({_NAME}))?"
    rf"(?:,?\s+et\s+al\.?)?"
    rf"\s*\(\s*((?:1[89]|20)\d{{2}})[a-z]?\s*\)",
    re.DOTALL,
)

# Capitalized tokens that are never surnames in author position.
_SURNAME_STOP = frozenset({"and", "et", "al", "in", "ed", "eds", "the"})

DEFAULT_MATCH_THRESHOLD = 0.5
DEFAULT_TITLE_WEIGHT = 0.7
DEFAULT_SURNAME_WEIGHT = 0.3


@dataclass
class BibliographyEntry:
    """One parsed reference-list entry."""

    index: int
    raw: str
    surname_tokens: list[str] = field(default_factory=list)
    year: int | None = None
    numeric_key: int | None = None


@dataclass
class InTextCitation:
    """A detected citation marker linked to a bibliography entry."""

    offset: int
    marker: str
    entry_index: int


@dataclass
class UnresolvedMarker:
    """A citation-shaped span that could not be linked to any entry."""

    offset: int
    marker: str
    detail: str


@dataclass
class CitationAnalysis:
    """Full result of counting one citing paper's direct citations of a target."""

    count: int
    best_score: float
    matched_entry_indices: list[int]
    citations: list[InTextCitation]
    unresolved: list[UnresolvedMarker]
    bibliography_parsed: bool
    warnings: list[str] = field(default_factory=list)


def segment_references(body: str) -> tuple[str, list[str]]:
    """Split body text into (main_text, reference entry strings).

    The reference section starts at the last heading line; an empty entry list
    means the bibliography could not be located. main_text is a prefix of body,
    so character offsets into it are valid body offsets.
    """
    headings = list(_HEADING_RE.finditer(body))
    if not headings:
        return body, []
    last = headings[-1]
    return body[: last.start()], _split_entries(body[last.end() :])


def _split_entries(block: str) -> list[str]:
    lines = block.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    bracket_starts = [i for i, ln in enumerate(lines) if _BRACKET_KEY_RE.match(ln)]
    dotted_starts = [i for i, ln in enumerate(lines) if _DOTTED_KEY_RE.match(ln)]

    if bracket_starts:
        starts = bracket_starts
    elif dotted_starts:
        starts = dotted_starts
    else:
        # No numeric keys: blank lines separate paragraphs; within a paragraph,
        # year-bearing lines start entries and yearless lines are wraps.
        entries = []
        paragraph: list[str] = []
        for ln in [ln.strip() for ln in lines] + [""]:
            if ln:
                paragraph.append(ln)
            elif paragraph:
                entries.extend(_split_unkeyed(paragraph))
                paragraph = []
        return entries

    entries = []
    for pos, start in enumerate(starts):
        end = starts[pos + 1] if pos + 1 < len(starts) else len(lines)
        joined = " ".join(ln.strip() for ln in lines[start:end] if ln.strip())
        if joined:
            entries.append(joined)
    return entries


def _split_unkeyed(paragraph: list[str]) -> list[str]:
    year_flags = [bool(_YEAR_RE.search(ln)) for ln in paragraph]
    if sum(year_flags) < 2:
        return [" ".join(paragraph)]
    entries, buf = [], []
    for ln, has_year in zip(paragraph, year_flags):
        if has_year and buf:
            entries.append(" ".join(buf))
            buf = [ln]
        else:
            buf.append(ln)
    entries.append(" ".join(buf))
    return entries


def _author_segment(text: str) -> str:
    """Author-position prefix of an entry: everything before the year, or before
    the first period that does not terminate a single-letter initial."""
    year = _YEAR_RE.search(text)
    if year:
        return text[: year.start()]
    for match in re.finditer(r"\.", text):
        before = text[: match.start()].rstrip()
        last_word = before.split()[-1] if before.split() else ""
        if len(last_word) == 1 and last_word.isalpha():
            continue  # initial like "J."
        return text[: match.start()]
    return ""


def parse_bib_entry(raw: str, index: int) -> BibliographyEntry:
    """Extract numeric key, year, and author surnames from one raw entry string.

    Entries with no detectable authors or year come back with empty
    surname_tokens and year None; they stay linkable by numeric key only.
    """
    entry = BibliographyEntry(index=index, raw=raw)

    rest = raw
    key_match = _BRACKET_KEY_RE.match(raw) or _DOTTED_KEY_RE.match(raw)
    if key_match:
        entry.numeric_key = int(key_match.group(1))
        rest = raw[key_match.end() :]

    year_match = _YEAR_RE.search(rest)
    if year_match:
        entry.year = int(year_match.group(1))

    for token in re.findall(_NAME, _author_segment(rest)):
        if token[0].isupper() and fold(token) not in _SURNAME_STOP:
            entry.surname_tokens.append(token)
    return entry


def match_entry_to_paper(
    entry: BibliographyEntry,
    cited: PaperRecord,
    title_weight: float = DEFAULT_TITLE_WEIGHT,
    surname_weight: float = DEFAULT_SURNAME_WEIGHT,
) -> float:
    """Score how well a bibliography entry refers to a given paper, in [0, 1].

    Weighted sum of the fraction of the cited title's tokens found in the raw
    entry and the fraction of the cited authors' surnames found among the
    entry's surnames (folded; the raw entry text is a fallback source).
    """
    title_tokens = set(tokenize(cited.title))
    raw_tokens = set(tokenize(entry.raw))
    title_score = len(title_tokens & raw_tokens) / len(title_tokens) if title_tokens else 0.0

    cited_surnames = {surname_key(a) for a in cited.authors} - {""}
    if cited_surnames:
        entry_surnames = {fold(t) for t in entry.surname_tokens} | {fold(t) for t in raw_tokens}
        surname_score = len(cited_surnames & entry_surnames) / len(cited_surnames)
    else:
        surname_score = 0.0

    return title_weight * title_score + surname_weight * surname_score


def _link_author_year(
    entries: list[BibliographyEntry], name1: str, name2: str | None, year: int
) -> BibliographyEntry | None:
    first = fold(name1)
    candidates = [
        e for e in entries if e.year == year and first in {fold(s) for s in e.surname_tokens}
    ]
    if name2:
        second = fold(name2)
        narrowed = [e for e in candidates if second in {fold(s) for s in e.surname_tokens}]
        candidates = narrowed or candidates
    if not candidates:
        return None
    return min(candidates, key=lambda e: e.index)


def find_in_text_citations(
    main_text: str, entries: list[BibliographyEntry]
) -> tuple[list[InTextCitation], list[UnresolvedMarker]]:
    """Detect numeric and author-year citation markers and link them to entries.

    Numeric markers link via numeric_key, ranges expand inclusively, and each
    linked entry yields one InTextCitation. Author-year markers link via
    first-author surname plus year (ties broken by lowest entry index).
    Citation-shaped spans that link to nothing are reported as unresolved.
    """
    citations: list[InTextCitation] = []
    unresolved: list[UnresolvedMarker] = []

    by_key: dict[int, BibliographyEntry] = {}
    for entry in entries:
        if entry.numeric_key is not None:
            by_key.setdefault(entry.numeric_key, entry)

    for match in _NUM_MARKER_RE.finditer(main_text):
        missing: list[int] = []
        for item in _RANGE_ITEM_RE.finditer(match.group(0)):
            if item.group(3) is not None:
                keys = [int(item.group(3))]
            else:
                lo, hi = int(item.group(1)), int(item.group(2))
                if lo > hi:
                    missing.append(lo)
                    continue
                keys = list(range(lo, hi + 1))
            for key in keys:
                entry = by_key.get(key)
                if entry is None:
                    missing.append(key)
                else:
                    citations.append(InTextCitation(match.start(), match.group(0), entry.index))
        if missing:
            unresolved.append(
                UnresolvedMarker(
                    match.start(),
                    match.group(0),
                    f"no entry for key(s) {', '.join(map(str, missing))}",
                )
            )

    def handle_author_year(offset: int, marker: str, name1: str, name2: str | None, year: str):
        if not name1[0].isupper() or (name2 and not name2[0].isupper()):
            return
        entry = _link_author_year(entries, name1, name2, int(year))
        if entry is None:
            unresolved.append(
                UnresolvedMarker(offset, marker, f"no entry for {name1} {year}")
            )
        else:
            citations.append(InTextCitation(offset, marker, entry.index))

    for paren in _PAREN_RE.finditer(main_text):
        inner = paren.group(1)
        seg_start = 0
        for segment in inner.split(";"):
            seg = segment.strip()
            seg_match = _PAREN_SEG_RE.match(seg)
            if seg_match:
                offset = paren.start(1) + seg_start + segment.index(seg[0])
                handle_author_year(
                    offset, seg, seg_match.group(1), seg_match.group(2), seg_match.group(3)
                )
            seg_start += len(segment) + 1

    for match in _NARRATIVE_RE.finditer(main_text):
        handle_author_year(
            match.start(), match.group(0), match.group(1), match.group(2), match.group(3)
        )

    citations.sort(key=lambda c: (c.offset, c.entry_index))
    unresolved.sort(key=lambda u: (u.offset, u.marker))
    return citations, unresolved


def paper_bibliography(record: PaperRecord) -> tuple[str, list[BibliographyEntry]]:
    """Bibliography entries for a paper, parsed from its explicit reference list
    when present, otherwise segmented out of the body. Returns (main_text, entries)."""
    if record.references:
        raws = list(record.references)
        main_text = record.body
    else:
        main_text, raws = segment_references(record.body)
    return main_text, [parse_bib_entry(raw, i) for i, raw in enumerate(raws, start=1)]


def analyze_citations(
    citing: PaperRecord,
    cited: PaperRecord,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
    title_weight: float = DEFAULT_TITLE_WEIGHT,
    surname_weight: float = DEFAULT_SURNAME_WEIGHT,
) -> CitationAnalysis:
    """Count in-text citations of ``cited`` within ``citing`` with full diagnostics.

    The target entry is the bibliography entry with the best match score; every
    detected marker linked to a best-scoring entry counts, provided the best
    score reaches the threshold. Failures degrade to count 0 with a warning.
    """
    main_text, entries = paper_bibliography(citing)
    if not entries:
        warning = f"{citing.id}: bibliography unparseable, direct-citation count forced to 0"
        logger.warning(warning)
        return CitationAnalysis(0, 0.0, [], [], [], False, [warning])

    detections, unresolved = find_in_text_citations(main_text, entries)

    scores = {
        e.index: match_entry_to_paper(e, cited, title_weight, surname_weight) for e in entries
    }
    best_score = max(scores.values())
    if best_score < threshold:
        warning = (
            f"{citing.id} -> {cited.id}: no bibliography entry matches the cited paper "
            f"(best score {best_score:.3f})"
        )
        logger.warning(warning)
        return CitationAnalysis(0, best_score, [], detections, unresolved, True, [warning])

    matched = sorted(idx for idx, s in scores.items() if s == best_score)
    matched_set = set(matched)
    count = sum(1 for c in detections if c.entry_index in matched_set)
    return CitationAnalysis(count, best_score, matched, detections, unresolved, True)


def count_direct_citations(
    citing: PaperRecord, cited: PaperRecord, threshold: float = DEFAULT_MATCH_THRESHOLD
) -> int:
    """Number of in-text citation instances of ``cited`` in ``citing``'s main text."""
    return analyze_citations(citing, cited, threshold=threshold).count
