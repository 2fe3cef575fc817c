"""Corpus-level disclosure statistics.

All metrics run over a CorpusIndex, an immutable view of the corpus that
keeps one filing per company and reporting year. A filing "mentions" a
topic within a scope when it has at least one extracted sentence record
whose item falls in that scope.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import timedelta
from statistics import NormalDist
from typing import Iterable, Mapping, Optional, Sequence

from .models import (
    FilingRef,
    MatchRecord,
    Scope,
    SentenceRecord,
    StatRow,
)

log = logging.getLogger(__name__)

UNKNOWN_SIC = "UNKNOWN"

# Shift puts the date near the middle of a 12-month fiscal period, so the
# chosen calendar year is the one covering the majority of the period.
_HALF_YEAR = timedelta(days=182)


class AnalyticsError(ValueError):
    """A metric was requested on data where it is undefined."""


def assign_reporting_year(ref: FilingRef) -> int:
    """Reporting year of a filing: the year containing period_end - 182 days.

    Filings without a period end fall back to the year before the filing
    date, which is right for the common file-early-next-year case.
    """
    if ref.period_end is None:
        log.warning(
            "filing %s has no period_end; using filing year - 1",
            ref.accession_number,
        )
        return ref.filing_date.year - 1
    return (ref.period_end - _HALF_YEAR).year


class CorpusIndex:
    """Immutable aggregation view over filings and their extracted records.

    One filing is kept per (cik, reporting year): the one with the latest
    filing date. Extracted records for dropped duplicates are ignored.
    """

    def __init__(
        self,
        filings: Iterable[FilingRef],
        sentence_records: Iterable[SentenceRecord] = (),
        match_records: Iterable[MatchRecord] = (),
        sections_present: Optional[Mapping[str, frozenset[str]]] = None,
    ):
        chosen: dict[tuple[int, int], FilingRef] = {}
        years: dict[str, int] = {}
        for ref in filings:
            year = assign_reporting_year(ref)
            years[ref.accession_number] = year
            key = (ref.cik, year)
            prev = chosen.get(key)
            if prev is None or ref.filing_date > prev.filing_date:
                if prev is not None:
                    log.info(
                        "cik %d year %d: keeping %s over %s",
                        ref.cik, year, ref.accession_number, prev.accession_number,
                    )
                chosen[key] = ref

        self._filings = {ref.accession_number: ref for ref in chosen.values()}
        self._year_of = {
            acc: years[acc] for acc in self._filings
        }
        self._by_year: dict[int, list[FilingRef]] = {}
        for ref in self._filings.values():
            self._by_year.setdefault(self._year_of[ref.accession_number], []).append(ref)
        for refs in self._by_year.values():
            refs.sort(key=lambda r: (r.cik, r.accession_number))

        self._sentences: dict[str, list[SentenceRecord]] = {}
        for rec in sentence_records:
            acc = rec.filing.accession_number
            if acc in self._filings:
                self._sentences.setdefault(acc, []).append(rec)
        self._matches: dict[str, list[MatchRecord]] = {}
        for rec in match_records:
            acc = rec.filing.accession_number
            if acc in self._filings:
                self._matches.setdefault(acc, []).append(rec)
        self._sections_present = dict(sections_present or {})

    # -- basic access --------------------------------------------------------

    @property
    def years(self) -> list[int]:
        return sorted(self._by_year)

    def filings_for_year(self, year: int) -> list[FilingRef]:
        return list(self._by_year.get(year, []))

    def reporting_year(self, accession_number: str) -> int:
        return self._year_of[accession_number]

    def sentences_for(self, ref: FilingRef) -> list[SentenceRecord]:
        return list(self._sentences.get(ref.accession_number, []))

    def matches_for(self, ref: FilingRef) -> list[MatchRecord]:
        return list(self._matches.get(ref.accession_number, []))

    def all_filings(self) -> list[FilingRef]:
        return sorted(
            self._filings.values(), key=lambda r: (r.cik, r.accession_number)
        )

    def all_matches(self) -> list[MatchRecord]:
        out: list[MatchRecord] = []
        for ref in self.all_filings():
            out.extend(self._matches.get(ref.accession_number, []))
        return out

    def sections_present_for(self, ref: FilingRef) -> frozenset[str]:
        return self._sections_present.get(ref.accession_number, frozenset())

    def sentence_count(self, ref: FilingRef, scope: Scope) -> int:
        return sum(
            1
            for rec in self._sentences.get(ref.accession_number, [])
            if scope.contains(rec.item_id)
        )

    def mentions(self, ref: FilingRef, scope: Scope) -> bool:
        return self.sentence_count(ref, scope) > 0

    # -- metrics ---------------------------------------------------------------

    def _year_filings_or_raise(self, year: int) -> list[FilingRef]:
        refs = self._by_year.get(year)
        if not refs:
            raise AnalyticsError(f"no filings for reporting year {year}")
        return refs


def pct_companies_mentioning(index: CorpusIndex, year: int, scope: Scope) -> float:
    """Fraction of the year's filings with at least one sentence in scope."""
    refs = index._year_filings_or_raise(year)
    hits = sum(1 for ref in refs if index.mentions(ref, scope))
    return hits / len(refs)


def avg_unique_sentences(
    index: CorpusIndex, year: int, scope: Scope, conditional: bool = True
) -> float:
    """Mean unique-sentence count per filing.

    conditional=True averages over filings with at least one sentence in
    scope; conditional=False divides by every filing of the year.
    """
    refs = index._year_filings_or_raise(year)
    counts = [index.sentence_count(ref, scope) for ref in refs]
    if conditional:
        nonzero = [c for c in counts if c > 0]
        if not nonzero:
            raise AnalyticsError(
                f"no filing mentions anything in scope {scope.value} in {year}"
            )
        return sum(nonzero) / len(nonzero)
    return sum(counts) / len(counts)


def section_share(index: CorpusIndex) -> dict[str, float]:
    """Share of all keyword matches falling in each item."""
    counts: dict[str, int] = {}
    total = 0
    for rec in index.all_matches():
        counts[rec.item_id] = counts.get(rec.item_id, 0) + 1
        total += 1
    if total == 0:
        raise AnalyticsError("no matches in corpus")
    return {item: n / total for item, n in sorted(counts.items())}


def cross_section_overlap(index: CorpusIndex, year: int) -> dict[str, float]:
    """Partition of the year's filings by Business/Risk mention presence."""
    refs = index._year_filings_or_raise(year)
    buckets = {"both": 0, "risk_only": 0, "business_only": 0, "neither": 0}
    for ref in refs:
        in_biz = index.mentions(ref, Scope.BUSINESS)
        in_risk = index.mentions(ref, Scope.RISK)
        if in_biz and in_risk:
            buckets["both"] += 1
        elif in_risk:
            buckets["risk_only"] += 1
        elif in_biz:
            buckets["business_only"] += 1
        else:
            buckets["neither"] += 1
    return {k: v / len(refs) for k, v in buckets.items()}


def industry_breakdown(
    index: CorpusIndex, year: int, top_n: int = 15
) -> list[StatRow]:
    """Per-scope mention percentages for the top-N SIC groups by filing count.

    Groups are ranked by descending filing count with ties broken by
    ascending SIC code. Filings without a SIC code form an UNKNOWN group
    that never enters the ranking.
    """
    refs = index._year_filings_or_raise(year)
    groups: dict[str, list[FilingRef]] = {}
    for ref in refs:
        groups.setdefault(ref.sic or UNKNOWN_SIC, []).append(ref)

    ranked = sorted(
        (sic for sic in groups if sic != UNKNOWN_SIC),
        key=lambda sic: (-len(groups[sic]), sic),
    )[:top_n]

    rows = []
    for sic in ranked:
        members = groups[sic]
        for scope in (Scope.ALL, Scope.BUSINESS, Scope.RISK):
            hits = sum(1 for ref in members if index.mentions(ref, scope))
            rows.append(
                StatRow(
                    year=year,
                    scope=scope,
                    sic_group=sic,
                    metric="pct_companies",
                    value=hits / len(members),
                )
            )
    return rows


def _metric_value(index: CorpusIndex, metric: str, scope: Scope, year: int) -> float:
    if metric == "pct_companies":
        return pct_companies_mentioning(index, year, scope)
    if metric == "avg_unique_sentences":
        return avg_unique_sentences(index, year, scope)
    if metric == "total_matches":
        index._year_filings_or_raise(year)
        return float(
            sum(
                1
                for ref in index.filings_for_year(year)
                for rec in index.matches_for(ref)
                if scope.contains(rec.item_id)
            )
        )
    if metric == "total_sentences":
        index._year_filings_or_raise(year)
        return float(
            sum(
                index.sentence_count(ref, scope)
                for ref in index.filings_for_year(year)
            )
        )
    raise AnalyticsError(f"unknown metric {metric!r}")


def growth_multiplier(
    index: CorpusIndex, metric: str, scope: Scope, y1: int, y2: int
) -> float:
    """value(y2) / value(y1) for one metric and scope."""
    base = _metric_value(index, metric, scope, y1)
    if base == 0:
        raise AnalyticsError(f"{metric} is zero in baseline year {y1}")
    return _metric_value(index, metric, scope, y2) / base


# --- precision review --------------------------------------------------------

WALD = "wald"
WILSON = "wilson"


@dataclass(frozen=True)
class PrecisionBound:
    """Lower confidence bound on keyword-match precision."""

    value: float
    method: str
    n: int
    errors: int
    confidence: float
    degenerate: bool = False
    note: str = ""


def precision_lower_bound(
    n: int, errors: int, confidence: float = 0.95, method: str = WALD
) -> PrecisionBound:
    """Lower confidence bound on true precision from a reviewed sample.

    wald uses the normal approximation p - z*sqrt(p(1-p)/n) with the
    two-sided z for the stated confidence. wilson returns the score
    interval's lower endpoint with one-sided coverage, i.e. the z of the
    two-sided interval at 2*confidence - 1; prefer it near p = 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= errors <= n:
        raise ValueError("errors must be between 0 and n")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")

    p_hat = (n - errors) / n
    if method == WALD:
        if p_hat in (0.0, 1.0):
            return PrecisionBound(
                value=p_hat, method=WALD, n=n, errors=errors,
                confidence=confidence, degenerate=True,
                note="sample variance is zero; use the wilson method",
            )
        z = NormalDist().inv_cdf((1 + confidence) / 2)
        value = p_hat - z * math.sqrt(p_hat * (1 - p_hat) / n)
        return PrecisionBound(
            value=max(0.0, value), method=WALD, n=n, errors=errors,
            confidence=confidence,
        )
    if method == WILSON:
        z = NormalDist().inv_cdf(confidence)
        z2 = z * z
        center = p_hat + z2 / (2 * n)
        margin = z * math.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n))
        value = (center - margin) / (1 + z2 / n)
        return PrecisionBound(
            value=max(0.0, value), method=WILSON, n=n, errors=errors,
            confidence=confidence,
        )
    raise ValueError(f"unknown method {method!r}")


# --- report tables ------------------------------------------------------------

def mention_trend_rows(index: CorpusIndex) -> list[StatRow]:
    """Per-year share of companies mentioning AI plus the conditional mean."""
    rows = []
    for year in index.years:
        rows.append(
            StatRow(
                year=year, scope=Scope.ALL, metric="pct_companies",
                value=pct_companies_mentioning(index, year, Scope.ALL),
            )
        )
        try:
            avg = avg_unique_sentences(index, year, Scope.ALL)
        except AnalyticsError:
            continue
        rows.append(
            StatRow(
                year=year, scope=Scope.ALL, metric="avg_unique_sentences", value=avg
            )
        )
    return rows


def section_trend_rows(index: CorpusIndex) -> list[StatRow]:
    """Per-year mention percentages for the Business and Risk sections."""
    rows = []
    for year in index.years:
        for scope in (Scope.BUSINESS, Scope.RISK):
            rows.append(
                StatRow(
                    year=year, scope=scope, metric="pct_companies",
                    value=pct_companies_mentioning(index, year, scope),
                )
            )
    return rows


def all_stat_rows(index: CorpusIndex, top_n: int = 15) -> list[StatRow]:
    """Every StatRow the stats stage emits, in deterministic order."""
    rows = mention_trend_rows(index) + section_trend_rows(index)
    for year in index.years:
        for scope in (Scope.ALL, Scope.BUSINESS, Scope.RISK):
            for metric in ("total_matches", "total_sentences"):
                rows.append(
                    StatRow(
                        year=year, scope=scope, metric=metric,
                        value=_metric_value(index, metric, scope, year),
                    )
                )
        rows.extend(industry_breakdown(index, year, top_n=top_n))
    return rows
