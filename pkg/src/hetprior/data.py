"""Parsing, validation and subsetting of meta-analysis collections.

The on-disk format is CSV with header ``analysis_id,study_id,estimate,std_err``
plus an optional ``seq`` column giving a recency order (later = more recent).
When ``seq`` is absent it defaults to the data-row index, so file order is the
recency order. A single meta-analysis uses the same schema with exactly one
``analysis_id``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

__all__ = [
    "StudyRecord",
    "MetaAnalysisCollection",
    "ValidationReport",
    "AnalysisSummary",
    "FormatError",
    "RecordError",
    "parse_collection",
    "serialize_collection",
    "validate_collection",
    "subset_recent",
]

_REQUIRED_COLUMNS = ("analysis_id", "study_id", "estimate", "std_err")
_OPTIONAL_COLUMNS = ("seq",)


class FormatError(ValueError):
    """The CSV header or overall structure is not as expected."""


class RecordError(ValueError):
    """A data row is invalid; the message includes the 1-based row number."""


def _is_finite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


@dataclass(frozen=True)
class StudyRecord:
    """One study: an estimate with its standard error, in effect-measure
    units (for instance log odds ratios)."""

    analysis_id: str
    study_id: str
    estimate: float
    std_err: float
    seq: int

    def __post_init__(self):
        if not _is_finite(self.estimate):
            raise ValueError(f"estimate must be finite, got {self.estimate!r}")
        if not (_is_finite(self.std_err) and self.std_err > 0.0):
            raise ValueError(f"std_err must be positive and finite, got {self.std_err!r}")


@dataclass(frozen=True)
class MetaAnalysisCollection:
    """An ordered set of meta-analyses, each a list of study records.

    ``analyses`` maps out as a list of ``(analysis_id, [StudyRecord, ...])``
    pairs in first-appearance order.
    """

    analyses: tuple[tuple[str, tuple[StudyRecord, ...]], ...]

    def __post_init__(self):
        ids = [aid for aid, _ in self.analyses]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate analysis_id(s): {dup}")
        seen_pairs: set[tuple[str, str]] = set()
        for aid, records in self.analyses:
            if len(records) < 1:
                raise ValueError(f"analysis {aid!r} has no studies")
            for r in records:
                key = (r.analysis_id, r.study_id)
                if key in seen_pairs:
                    raise ValueError(f"duplicate (analysis_id, study_id) pair: {key}")
                seen_pairs.add(key)

    @property
    def n_analyses(self) -> int:
        return len(self.analyses)

    @property
    def analysis_ids(self) -> list[str]:
        return [aid for aid, _ in self.analyses]

    @property
    def sizes(self) -> list[int]:
        """Per-analysis study counts k_j, in collection order."""
        return [len(records) for _, records in self.analyses]

    @property
    def n_studies(self) -> int:
        return sum(self.sizes)

    def records(self) -> list[StudyRecord]:
        """All records in collection order."""
        return [r for _, recs in self.analyses for r in recs]

    def analysis(self, analysis_id: str) -> tuple[StudyRecord, ...]:
        for aid, records in self.analyses:
            if aid == analysis_id:
                return records
        raise KeyError(analysis_id)


@dataclass(frozen=True)
class AnalysisSummary:
    analysis_id: str
    k: int
    warning: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    analyses: tuple[AnalysisSummary, ...]
    n_analyses: int
    n_studies: int

    @property
    def warnings(self) -> list[str]:
        return [a.warning for a in self.analyses if a.warning is not None]


def _parse_float(raw: str, column: str, row_number: int) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise RecordError(f"row {row_number}: non-numeric {column} {raw!r}") from None


def parse_collection(text: str) -> MetaAnalysisCollection:
    """Parse CSV content into a collection.

    Parameters
    ----------
    text : str
        CSV with header ``analysis_id,study_id,estimate,std_err`` and an
        optional trailing ``seq`` column of integers.

    Returns
    -------
    MetaAnalysisCollection
        Records grouped by ``analysis_id`` in first-appearance order.
        Missing ``seq`` values default to the data-row index (0-based).

    Raises
    ------
    FormatError
        On a missing or unknown header column.
    RecordError
        On a bad data row; the message carries the 1-based row number
        (header = row 1).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty input: expected a header row") from None
    header = [h.strip() for h in header]
    for col in _REQUIRED_COLUMNS:
        if col not in header:
            raise FormatError(f"missing required column {col!r}")
    for col in header:
        if col not in _REQUIRED_COLUMNS + _OPTIONAL_COLUMNS:
            raise FormatError(f"unknown column {col!r}")
    if len(set(header)) != len(header):
        raise FormatError(f"duplicate column in header: {header}")
    idx = {col: header.index(col) for col in header}
    has_seq = "seq" in idx

    groups: dict[str, list[StudyRecord]] = {}
    order: list[str] = []
    seen_pairs: set[tuple[str, str]] = set()
    data_row = 0
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise RecordError(
                f"row {row_number}: expected {len(header)} fields, got {len(row)}"
            )
        aid = row[idx["analysis_id"]].strip()
        sid = row[idx["study_id"]].strip()
        if not aid:
            raise RecordError(f"row {row_number}: empty analysis_id")
        if not sid:
            raise RecordError(f"row {row_number}: empty study_id")
        estimate = _parse_float(row[idx["estimate"]], "estimate", row_number)
        std_err = _parse_float(row[idx["std_err"]], "std_err", row_number)
        if has_seq and row[idx["seq"]].strip():
            raw_seq = row[idx["seq"]].strip()
            try:
                seq = int(raw_seq)
            except ValueError:
                raise RecordError(f"row {row_number}: non-integer seq {raw_seq!r}") from None
        else:
            seq = data_row
        try:
            record = StudyRecord(aid, sid, estimate, std_err, seq)
        except ValueError as exc:
            raise RecordError(f"row {row_number}: {exc}") from None
        if (aid, sid) in seen_pairs:
            raise RecordError(f"row {row_number}: duplicate (analysis_id, study_id) ({aid!r}, {sid!r})")
        seen_pairs.add((aid, sid))
        if aid not in groups:
            groups[aid] = []
            order.append(aid)
        groups[aid].append(record)
        data_row += 1

    if not order:
        raise FormatError("no data rows")
    return MetaAnalysisCollection(tuple((aid, tuple(groups[aid])) for aid in order))


def serialize_collection(c: MetaAnalysisCollection) -> str:
    """CSV text that :func:`parse_collection` maps back to ``c`` exactly.

    Floats are written with ``repr`` (shortest exact round-trip form);
    the ``seq`` column is always included.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["analysis_id", "study_id", "estimate", "std_err", "seq"])
    for record in c.records():
        writer.writerow(
            [record.analysis_id, record.study_id, repr(record.estimate), repr(record.std_err), record.seq]
        )
    return out.getvalue()


def validate_collection(c: MetaAnalysisCollection) -> ValidationReport:
    """Report per-analysis sizes and totals; flag single-study analyses.

    A k_j = 1 analysis is allowed — the model stays well-defined — but it
    carries almost no information about heterogeneity, so it gets a
    warning entry rather than an error.
    """
    summaries = []
    for aid, records in c.analyses:
        k = len(records)
        warning = None
        if k == 1:
            warning = f"analysis {aid!r} has a single study; it is nearly uninformative about heterogeneity"
        summaries.append(AnalysisSummary(analysis_id=aid, k=k, warning=warning))
    return ValidationReport(
        analyses=tuple(summaries),
        n_analyses=c.n_analyses,
        n_studies=c.n_studies,
    )


def subset_recent(c: MetaAnalysisCollection, n: int) -> MetaAnalysisCollection:
    """The ``n`` most recent analyses, in their original relative order.

    Recency of an analysis is the largest ``seq`` among its records; ties
    are broken by position in the file (later wins). Raises ``ValueError``
    if ``n`` exceeds the number of analyses.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > c.n_analyses:
        raise ValueError(f"n = {n} exceeds the number of analyses ({c.n_analyses})")
    ranked = sorted(
        range(c.n_analyses),
        key=lambda i: (max(r.seq for r in c.analyses[i][1]), i),
    )
    keep = sorted(ranked[-n:])
    return MetaAnalysisCollection(tuple(c.analyses[i] for i in keep))
