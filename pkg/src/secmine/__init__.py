"""secmine: mine SEC 10-K filings for keyword-based disclosures."""

__version__ = "0.1.0"

from .models import (  # noqa: F401
    FilingRef,
    FilingSection,
    MatchRecord,
    ParsedFiling,
    RawFiling,
    Scope,
    SentenceRecord,
    StatRow,
)
