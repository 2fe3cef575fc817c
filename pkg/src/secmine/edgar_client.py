"""EDGAR archive access: polite rate limiting, retries, and a local cache.

The SEC's fair-access policy caps request rates and requires an
identifying contact in the User-Agent header, so the client refuses to
start without one. Filing discovery combines per-company submission
listings (which carry SIC and period-of-report) with quarterly form
indices for universe enumeration.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import httpx

from .analytics import assign_reporting_year
from .models import FilingRef, RawFiling, ValidationError, sorted_refs

log = logging.getLogger(__name__)

DATA_BASE_URL = "https://data.sec.gov"
ARCHIVES_BASE_URL = "https://www.sec.gov"
DEFAULT_RATE_LIMIT = 8.0
DEFAULT_TIMEOUT = 30.0


class ConfigError(RuntimeError):
    """The client is not configured for polite crawling."""


class FetchError(RuntimeError):
    def __init__(self, message: str, url: str):
        super().__init__(message)
        self.url = url


class RetriableFetchError(FetchError):
    """Transient failure (5xx, timeout, connection trouble)."""


class PermanentFetchError(FetchError):
    """The resource is gone or the request is invalid (4xx)."""

    def __init__(self, message: str, url: str, status: int):
        super().__init__(message, url)
        self.status = status


class RateLimiter:
    """Sliding-window limiter: at most max_per_second permits in any 1 s."""

    def __init__(self, max_per_second: float, clock=time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if max_per_second <= 0:
            raise ValueError("rate limit must be positive")
        self.max_per_second = max_per_second
        self._clock = clock
        self._sleep = sleep
        self._issued: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        """Block until a permit is available, then take it."""
        while True:
            with self._lock:
                now = self._clock()
                while self._issued and now - self._issued[0] >= 1.0:
                    self._issued.popleft()
                if len(self._issued) < self.max_per_second:
                    self._issued.append(now)
                    return
                wait = 1.0 - (now - self._issued[0])
            self._sleep(max(wait, 0.001))


class FilingCache:
    """Content cache keyed by accession number, with checksum sidecars."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def _dir(self, accession_number: str) -> Path:
        return self.root / "raw" / accession_number

    def get(self, ref: FilingRef) -> Optional[RawFiling]:
        meta_path = self._dir(ref.accession_number) / "meta.json"
        if not meta_path.exists():
            return None
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            content = (self._dir(ref.accession_number) / meta["document"]).read_bytes()
        except (OSError, json.JSONDecodeError, KeyError) as err:
            log.warning("cache entry for %s unreadable (%s); evicting",
                        ref.accession_number, err)
            self.evict(ref.accession_number)
            return None
        if hashlib.sha256(content).hexdigest() != meta.get("sha256"):
            log.warning("cache checksum mismatch for %s; evicting",
                        ref.accession_number)
            self.evict(ref.accession_number)
            return None
        return RawFiling(
            ref=ref,
            content=content,
            content_kind=meta["content_kind"],
            retrieved_at=datetime.fromisoformat(meta["retrieved_at"]),
            source_url=meta["source_url"],
        )

    def put(self, raw: RawFiling, document: str) -> str:
        """Store content atomically; returns the content checksum."""
        directory = self._dir(raw.ref.accession_number)
        directory.mkdir(parents=True, exist_ok=True)
        checksum = hashlib.sha256(raw.content).hexdigest()
        doc_tmp = directory / (document + ".tmp")
        doc_tmp.write_bytes(raw.content)
        os.replace(doc_tmp, directory / document)
        meta = {
            "document": document,
            "sha256": checksum,
            "content_kind": raw.content_kind,
            "retrieved_at": raw.retrieved_at.isoformat(),
            "source_url": raw.source_url,
            "ref": raw.ref.to_dict(),
        }
        meta_tmp = directory / "meta.json.tmp"
        meta_tmp.write_text(json.dumps(meta, sort_keys=True), encoding="utf-8")
        os.replace(meta_tmp, directory / "meta.json")
        return checksum

    def checksum(self, accession_number: str) -> Optional[str]:
        meta_path = self._dir(accession_number) / "meta.json"
        if not meta_path.exists():
            return None
        return json.loads(meta_path.read_text(encoding="utf-8")).get("sha256")

    def evict(self, accession_number: str) -> None:
        directory = self._dir(accession_number)
        if directory.exists():
            for child in directory.iterdir():
                child.unlink()
            directory.rmdir()


def _quarters(years: Sequence[int]) -> list[tuple[int, int]]:
    # A reporting year's filings arrive during it and the following year.
    calendar_years = range(min(years), max(years) + 2)
    return [(y, q) for y in calendar_years for q in (1, 2, 3, 4)]


class EdgarClient:
    """HTTP client for the EDGAR archive with caching and retry."""

    def __init__(
        self,
        contact: Optional[str] = None,
        cache_dir: Path | str = "cache",
        rate_limit: float = DEFAULT_RATE_LIMIT,
        data_base_url: str = DATA_BASE_URL,
        archives_base_url: str = ARCHIVES_BASE_URL,
        transport: Optional[httpx.BaseTransport] = None,
        max_retries: int = 4,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        contact = contact or os.environ.get("SEC_CONTACT", "")
        if not contact.strip():
            raise ConfigError(
                "a contact string is required to crawl EDGAR; set SEC_CONTACT "
                "or pass contact="
            )
        self.contact = contact.strip()
        self.cache = FilingCache(cache_dir)
        self.rate_limiter = RateLimiter(rate_limit, sleep=sleep)
        self.data_base_url = data_base_url.rstrip("/")
        self.archives_base_url = archives_base_url.rstrip("/")
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._client = httpx.Client(
            transport=transport,
            timeout=DEFAULT_TIMEOUT,
            follow_redirects=True,
            headers={"User-Agent": self.contact},
        )
        # primary document names learned from submission listings
        self._documents: dict[str, str] = {}

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "EdgarClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- transport ------------------------------------------------------------

    def _get(self, url: str) -> httpx.Response:
        last_error = ""
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = min(self.backoff_base * (2 ** (attempt - 1)), 8.0)
                self._sleep(delay)
            self.rate_limiter.acquire()
            try:
                response = self._client.get(url)
            except httpx.HTTPError as err:
                last_error = str(err)
                log.warning("request error for %s (attempt %d): %s",
                            url, attempt + 1, err)
                continue
            if response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                log.warning("server error for %s (attempt %d): %s",
                            url, attempt + 1, last_error)
                continue
            if response.status_code >= 400:
                raise PermanentFetchError(
                    f"HTTP {response.status_code} for {url}", url,
                    response.status_code,
                )
            return response
        raise RetriableFetchError(
            f"giving up on {url} after {self.max_retries + 1} attempts "
            f"({last_error})", url,
        )

    # -- discovery ------------------------------------------------------------

    def _submissions(self, cik: int) -> dict:
        url = f"{self.data_base_url}/submissions/CIK{cik:010d}.json"
        return self._get(url).json()

    def _refs_from_submissions(
        self,
        data: dict,
        years: Sequence[int],
        form_type: str,
        widen_forms: bool,
    ) -> list[FilingRef]:
        try:
            cik = int(data["cik"])
            company = data.get("name", "")
            sic = str(data.get("sic") or "")
            recent = data["filings"]["recent"]
            accessions = recent["accessionNumber"]
            forms = recent["form"]
            filing_dates = recent["filingDate"]
            report_dates = recent["reportDate"]
            documents = recent.get("primaryDocument", [""] * len(accessions))
        except (KeyError, TypeError, ValueError) as err:
            log.warning("malformed submissions payload: %s", err)
            return []
        refs = []
        for i, accession in enumerate(accessions):
            form = forms[i]
            if widen_forms:
                if not form.startswith(form_type):
                    continue
            elif form != form_type:
                continue
            try:
                ref = FilingRef(
                    cik=cik,
                    accession_number=accession,
                    form_type=form,
                    filing_date=date.fromisoformat(filing_dates[i]),
                    period_end=(
                        date.fromisoformat(report_dates[i])
                        if report_dates[i] else None
                    ),
                    company_name=company,
                    sic=sic,
                )
            except (ValidationError, ValueError) as err:
                log.warning(
                    "skipping malformed index row %s for cik %s: %s",
                    accession, cik, err,
                )
                continue
            if assign_reporting_year(ref) not in years:
                continue
            if documents[i]:
                self._documents[ref.accession_number] = documents[i]
            refs.append(ref)
        return refs

    def _ciks_from_form_index(
        self, years: Sequence[int], form_type: str, widen_forms: bool
    ) -> set[int]:
        ciks: set[int] = set()
        for year, quarter in _quarters(years):
            url = (
                f"{self.archives_base_url}/Archives/edgar/full-index/"
                f"{year}/QTR{quarter}/form.idx"
            )
            try:
                body = self._get(url).text
            except PermanentFetchError:
                continue  # quarter not published yet
            for line in body.splitlines():
                parts = [p for p in line.split("  ") if p.strip()]
                if len(parts) < 5:
                    continue
                form = parts[0].strip()
                if widen_forms:
                    if not form.startswith(form_type):
                        continue
                elif form != form_type:
                    continue
                try:
                    ciks.add(int(parts[2].strip()))
                except ValueError:
                    log.warning("skipping malformed index row: %r", line.strip())
        return ciks

    def list_filings(
        self,
        years: Sequence[int],
        form_type: str = "10-K",
        cik_filter: Optional[Iterable[int]] = None,
        widen_forms: bool = False,
    ) -> list[FilingRef]:
        """Every filing of the given form attributed to the reporting years.

        With cik_filter the per-company submission listings are consulted
        directly; otherwise candidate companies are first enumerated from
        the quarterly form indices. Results are unique by accession number
        and ordered by (cik, accession_number).
        """
        years = sorted(set(years))
        if not years:
            raise ValueError("years must be non-empty")
        if not form_type:
            raise ValueError("form_type must be non-empty")
        if cik_filter is not None:
            ciks = sorted(set(cik_filter))
        else:
            ciks = sorted(self._ciks_from_form_index(years, form_type, widen_forms))
        refs: dict[str, FilingRef] = {}
        for cik in ciks:
            data = self._submissions(cik)
            for ref in self._refs_from_submissions(
                data, years, form_type, widen_forms
            ):
                refs.setdefault(ref.accession_number, ref)
        return sorted_refs(refs.values())

    # -- content ------------------------------------------------------------

    def primary_document(self, ref: FilingRef) -> str:
        """Primary document filename; falls back to the full-submission file."""
        return self._documents.get(
            ref.accession_number, f"{ref.accession_nodash}.txt"
        )

    def fetch_filing(self, ref: FilingRef) -> RawFiling:
        """Cached copy if present, else download, cache, and return."""
        cached = self.cache.get(ref)
        if cached is not None:
            return cached
        document = self.primary_document(ref)
        url = (
            f"{self.archives_base_url}/Archives/edgar/data/{ref.cik}/"
            f"{ref.accession_nodash}/{document}"
        )
        response = self._get(url)
        kind = "html" if document.lower().endswith((".htm", ".html")) else "plain_text"
        raw = RawFiling(
            ref=ref,
            content=response.content,
            content_kind=kind,
            retrieved_at=datetime.now(timezone.utc),
            source_url=url,
        )
        self.cache.put(raw, document)
        return raw

    def manifest_entry(self, ref: FilingRef) -> dict:
        """Manifest record for a fetched filing (ref fields + checksum)."""
        entry = ref.to_dict()
        entry["sha256"] = self.cache.checksum(ref.accession_number)
        entry["document"] = self.primary_document(ref)
        return entry
