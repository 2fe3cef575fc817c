"""Domain records shared across the pipeline.

Every record validates its invariants on construction, so anything that
reaches downstream modules (or comes back from disk) is known-good.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from typing import Any, Iterable, Optional

ACCESSION_RE = re.compile(r"^\d{10}-\d{2}-\d{6}$")

# Standard 10-K item ids in filing order. Anything else is not treated as a
# section heading; a whole-document fallback uses OTHER_ITEM.
STANDARD_ITEMS = (
    "1", "1A", "1B", "1C", "2", "3", "4", "4A", "5", "6", "7", "7A",
    "8", "9", "9A", "9B", "9C", "10", "11", "12", "13", "14", "15", "16",
)
OTHER_ITEM = "OTHER"

ITEM_BUSINESS = "1"
ITEM_RISK = "1A"

_ITEM_RANK = {item: i for i, item in enumerate(STANDARD_ITEMS)}
_ITEM_RANK[OTHER_ITEM] = len(STANDARD_ITEMS)


def item_rank(item_id: str) -> int:
    """Sort key placing items in their standard filing order."""
    return _ITEM_RANK[item_id]


class ValidationError(ValueError):
    """A record violates one of its declared invariants."""


class Scope(str, Enum):
    """Which part of a filing a metric is computed over."""

    ALL = "all"
    BUSINESS = "business"   # Item 1
    RISK = "risk"           # Item 1A

    @property
    def item_id(self) -> Optional[str]:
        if self is Scope.BUSINESS:
            return ITEM_BUSINESS
        if self is Scope.RISK:
            return ITEM_RISK
        return None

    def contains(self, item_id: str) -> bool:
        return self.item_id is None or item_id == self.item_id


def sentence_key(text: str) -> str:
    """Canonical dedup key for a sentence: lowercased, whitespace-collapsed."""
    return " ".join(text.lower().split())


def _parse_date(value: Any) -> Optional[date]:
    if value is None or value == "":
        return None
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value))


@dataclass(frozen=True)
class FilingRef:
    """Identity and metadata of one filing submission."""

    cik: int
    accession_number: str
    form_type: str
    filing_date: date
    period_end: Optional[date]
    company_name: str
    sic: str = ""

    def __post_init__(self) -> None:
        if self.cik <= 0:
            raise ValidationError(f"cik must be positive, got {self.cik}")
        if not ACCESSION_RE.match(self.accession_number):
            raise ValidationError(
                f"bad accession number {self.accession_number!r} "
                "(expected NNNNNNNNNN-NN-NNNNNN)"
            )
        if not self.form_type:
            raise ValidationError("form_type must be non-empty")
        if self.period_end is not None and self.period_end > self.filing_date:
            raise ValidationError(
                f"period_end {self.period_end} is after filing_date {self.filing_date}"
            )
        if self.sic and not re.match(r"^\d{1,4}$", self.sic):
            raise ValidationError(f"sic must be a 1-4 digit code, got {self.sic!r}")

    @property
    def accession_nodash(self) -> str:
        return self.accession_number.replace("-", "")

    def to_dict(self) -> dict[str, Any]:
        return {
            "cik": self.cik,
            "accession_number": self.accession_number,
            "form_type": self.form_type,
            "filing_date": self.filing_date.isoformat(),
            "period_end": self.period_end.isoformat() if self.period_end else None,
            "company_name": self.company_name,
            "sic": self.sic,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FilingRef":
        return cls(
            cik=int(data["cik"]),
            accession_number=data["accession_number"],
            form_type=data["form_type"],
            filing_date=_parse_date(data["filing_date"]),  # type: ignore[arg-type]
            period_end=_parse_date(data.get("period_end")),
            company_name=data.get("company_name", ""),
            sic=data.get("sic") or "",
        )


@dataclass(frozen=True)
class RawFiling:
    """Bytes of a filing's primary document plus provenance."""

    ref: FilingRef
    content: bytes
    content_kind: str  # "html" or "plain_text"
    retrieved_at: datetime
    source_url: str

    def __post_init__(self) -> None:
        if not self.content:
            raise ValidationError("filing content must be non-empty")
        if self.content_kind not in ("html", "plain_text"):
            raise ValidationError(f"unknown content_kind {self.content_kind!r}")


@dataclass(frozen=True)
class FilingSection:
    """One numbered Item of a filing, as offsets into the normalized text."""

    item_id: str
    title: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.item_id not in _ITEM_RANK:
            raise ValidationError(f"unknown item id {self.item_id!r}")
        if not 0 <= self.start < self.end:
            raise ValidationError(
                f"bad section span [{self.start}, {self.end}) for item {self.item_id}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "title": self.title,
            "start": self.start,
            "end": self.end,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FilingSection":
        return cls(
            item_id=data["item_id"],
            title=data.get("title", ""),
            start=int(data["start"]),
            end=int(data["end"]),
        )


@dataclass(frozen=True)
class ParsedFiling:
    """Normalized document text with its section table."""

    ref: FilingRef
    text: str
    sections: tuple[FilingSection, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        prev_end = 0
        for sec in self.sections:
            if sec.item_id in seen:
                raise ValidationError(f"duplicate section for item {sec.item_id}")
            seen.add(sec.item_id)
            if sec.start < prev_end:
                raise ValidationError(
                    f"section {sec.item_id} overlaps the previous section"
                )
            if sec.end > len(self.text):
                raise ValidationError(f"section {sec.item_id} runs past end of text")
            prev_end = sec.end

    def section(self, item_id: str) -> Optional[FilingSection]:
        for sec in self.sections:
            if sec.item_id == item_id:
                return sec
        return None

    def section_text(self, item_id: str) -> Optional[str]:
        sec = self.section(item_id)
        if sec is None:
            return None
        return self.text[sec.start:sec.end]

    def to_dict(self) -> dict[str, Any]:
        return {
            "ref": self.ref.to_dict(),
            "text": self.text,
            "sections": [s.to_dict() for s in self.sections],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ParsedFiling":
        return cls(
            ref=FilingRef.from_dict(data["ref"]),
            text=data["text"],
            sections=tuple(FilingSection.from_dict(s) for s in data["sections"]),
        )


@dataclass(frozen=True)
class MatchRecord:
    """One keyword occurrence inside one sentence of a filing."""

    filing: FilingRef
    item_id: str
    sentence_index: int
    keyword_id: str
    char_start: int
    char_end: int
    sentence_text: str

    def __post_init__(self) -> None:
        if self.char_start >= self.char_end:
            raise ValidationError(
                f"empty match span [{self.char_start}, {self.char_end})"
            )
        if not self.sentence_text:
            raise ValidationError("sentence_text must be non-empty")
        if self.sentence_index < 0:
            raise ValidationError("sentence_index must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "filing": self.filing.to_dict(),
            "item_id": self.item_id,
            "sentence_index": self.sentence_index,
            "keyword_id": self.keyword_id,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "sentence_text": self.sentence_text,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MatchRecord":
        return cls(
            filing=FilingRef.from_dict(data["filing"]),
            item_id=data["item_id"],
            sentence_index=int(data["sentence_index"]),
            keyword_id=data["keyword_id"],
            char_start=int(data["char_start"]),
            char_end=int(data["char_end"]),
            sentence_text=data["sentence_text"],
        )


@dataclass(frozen=True)
class SentenceRecord:
    """A deduplicated keyword-bearing sentence of one filing."""

    filing: FilingRef
    item_id: str
    sentence_index: int
    sentence_text: str
    normalized_key: str
    keyword_ids: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.keyword_ids:
            raise ValidationError("keyword_ids must be non-empty")
        if self.normalized_key != sentence_key(self.sentence_text):
            raise ValidationError("normalized_key does not match sentence_text")

    def to_dict(self) -> dict[str, Any]:
        return {
            "filing": self.filing.to_dict(),
            "item_id": self.item_id,
            "sentence_index": self.sentence_index,
            "sentence_text": self.sentence_text,
            "normalized_key": self.normalized_key,
            "keyword_ids": sorted(self.keyword_ids),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SentenceRecord":
        return cls(
            filing=FilingRef.from_dict(data["filing"]),
            item_id=data["item_id"],
            sentence_index=int(data["sentence_index"]),
            sentence_text=data["sentence_text"],
            normalized_key=data["normalized_key"],
            keyword_ids=frozenset(data["keyword_ids"]),
        )


_PCT_METRICS = {"pct_companies"}
_STAT_METRICS = _PCT_METRICS | {
    "avg_unique_sentences",
    "total_matches",
    "total_sentences",
}


@dataclass(frozen=True)
class StatRow:
    """One aggregation cell: year x scope x SIC group x metric."""

    year: int
    scope: Scope
    metric: str
    value: float
    sic_group: Optional[str] = None

    def __post_init__(self) -> None:
        if self.metric not in _STAT_METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}")
        if self.metric in _PCT_METRICS and not 0.0 <= self.value <= 1.0:
            raise ValidationError(f"{self.metric} must be in [0, 1], got {self.value}")
        if self.value < 0:
            raise ValidationError(f"{self.metric} must be >= 0, got {self.value}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "year": self.year,
            "scope": self.scope.value,
            "sic_group": self.sic_group,
            "metric": self.metric,
            "value": self.value,
        }


def sorted_refs(refs: Iterable[FilingRef]) -> list[FilingRef]:
    """Stable order used everywhere: (cik, accession_number)."""
    return sorted(refs, key=lambda r: (r.cik, r.accession_number))
