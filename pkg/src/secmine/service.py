"""Read-only HTTP API over a frozen corpus snapshot.

The snapshot (manifest, parsed filings, record store) is loaded once at
startup; every endpoint answers from that immutable state, so identical
requests always return identical payloads. Search uses the same compiled
keyword machinery as extraction, and exports reuse the CLI's writer, so
the three surfaces can never disagree.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query as QueryParam, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import analytics, extraction, storage
from .models import (
    MatchRecord,
    Scope,
    SentenceRecord,
    item_rank,
)

log = logging.getLogger(__name__)

MAX_PAGE_SIZE = 500
DEFAULT_PATTERN_BUDGET = 500_000


@dataclass
class Snapshot:
    """Immutable service state loaded at startup."""

    index: analytics.CorpusIndex
    sentences: list[tuple[SentenceRecord, int]]
    matches: list[tuple[MatchRecord, int]]
    keywords: extraction.KeywordSet
    store: storage.RecordStore
    parsed_dir: Path
    etag_seed: str


def _load_snapshot(
    manifest_path: Path, parsed_dir: Path, store_path: Path,
    keywords_file: Optional[Path],
) -> Optional[Snapshot]:
    if not Path(store_path).exists() or not Path(manifest_path).exists():
        return None
    store = storage.RecordStore(store_path)
    records = store.load_records()
    _, entries = storage.read_manifest(manifest_path)
    refs = storage.manifest_refs(entries)
    sections_present = {}
    for accession in storage.list_parsed(parsed_dir):
        parsed = storage.load_parsed(parsed_dir, accession)
        sections_present[accession] = frozenset(
            sec.item_id for sec in parsed.sections
        )
    sentences = [(r, y) for r, y in records if isinstance(r, SentenceRecord)]
    matches = [(r, y) for r, y in records if isinstance(r, MatchRecord)]
    index = analytics.CorpusIndex(
        refs,
        sentence_records=[r for r, _ in sentences],
        match_records=[r for r, _ in matches],
        sections_present=sections_present,
    )
    patterns = (
        extraction.load_keywords(keywords_file)
        if keywords_file else extraction.default_keywords()
    )
    etag_seed = hashlib.sha256(Path(store_path).read_bytes()).hexdigest()
    return Snapshot(
        index=index,
        sentences=sentences,
        matches=matches,
        keywords=extraction.compile_keywords(patterns),
        store=store,
        parsed_dir=Path(parsed_dir),
        etag_seed=etag_seed,
    )


def _parse_years_param(years: str) -> Optional[frozenset[int]]:
    if not years.strip():
        return None
    out: set[int] = set()
    for chunk in years.replace("-", "..").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            if ".." in chunk:
                lo, hi = chunk.split("..", 1)
                out.update(range(int(lo), int(hi) + 1))
            else:
                out.add(int(chunk))
        except ValueError:
            raise HTTPException(400, detail=f"bad years value {years!r}")
    return frozenset(out) or None


def _sentence_sort_key(pair: tuple[SentenceRecord, int]):
    rec, _ = pair
    return (
        rec.filing.cik, rec.filing.accession_number, item_rank(rec.item_id),
        rec.sentence_index,
    )


def create_app(
    manifest_path: Path | str,
    parsed_dir: Path | str,
    store_path: Path | str,
    keywords_file: Optional[Path | str] = None,
    ui_dir: Optional[Path | str] = None,
    pattern_budget: int = DEFAULT_PATTERN_BUDGET,
    cors_origins: tuple[str, ...] = ("*",),
) -> FastAPI:
    """Build the API app over one corpus snapshot."""
    app = FastAPI(title="secmine corpus API")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    snapshot = _load_snapshot(
        Path(manifest_path), Path(parsed_dir), Path(store_path),
        Path(keywords_file) if keywords_file else None,
    )

    def _snapshot() -> Snapshot:
        if snapshot is None or not snapshot.sentences:
            raise HTTPException(503, detail="no corpus store loaded")
        return snapshot

    @app.middleware("http")
    async def etag_middleware(request: Request, call_next):
        response = await call_next(request)
        if request.method == "GET" and response.status_code == 200 and snapshot:
            tag = hashlib.sha256(
                (snapshot.etag_seed + str(request.url)).encode()
            ).hexdigest()[:32]
            etag = f'"{tag}"'
            if request.headers.get("if-none-match") == etag:
                return Response(status_code=304, headers={"ETag": etag})
            response.headers["ETag"] = etag
        return response

    def _compile_adhoc(patterns: list[str]) -> list[extraction.CompiledKeyword]:
        compiled = []
        for i, raw in enumerate(patterns):
            try:
                kw = extraction.compile_keywords(
                    [extraction.KeywordPattern(id=f"pattern{i}", raw=raw)]
                )
            except extraction.KeywordCompileError as err:
                raise HTTPException(
                    400, detail={"pattern": raw, "error": str(err)}
                )
            compiled.extend(kw)
        return compiled

    @app.get("/api/search")
    def search(
        keyword: list[str] = QueryParam(default=[]),
        pattern: list[str] = QueryParam(default=[]),
        years: str = "",
        section: list[str] = QueryParam(default=[]),
        company: list[str] = QueryParam(default=[]),
        sic: list[str] = QueryParam(default=[]),
        page: int = 1,
        page_size: int = 50,
    ):
        snap = _snapshot()
        if not 1 <= page_size <= MAX_PAGE_SIZE:
            raise HTTPException(
                400, detail=f"page_size must be in [1, {MAX_PAGE_SIZE}]"
            )
        if page < 1:
            raise HTTPException(400, detail="page must be >= 1")

        adhoc = _compile_adhoc(pattern)
        base_query = storage.Query(
            years=_parse_years_param(years),
            sections=frozenset(s.upper() for s in section) or None,
            companies=tuple(company) or None,
            sic=frozenset(sic) or None,
        )
        keyword_ids = frozenset(keyword)
        candidates = [
            (rec, year)
            for rec, year in snap.sentences
            if base_query.accepts(rec, year)
        ]
        if adhoc and len(candidates) * len(adhoc) > pattern_budget:
            raise HTTPException(503, detail="pattern budget exceeded")

        results = []
        for rec, year in candidates:
            by_id = bool(keyword_ids & rec.keyword_ids)
            by_pattern = any(
                ck.regex.search(rec.sentence_text) for ck in adhoc
            )
            if (keyword_ids or adhoc) and not (by_id or by_pattern):
                continue
            results.append((rec, year))
        results.sort(key=_sentence_sort_key)

        total = len(results)
        start = (page - 1) * page_size
        page_items = results[start:start + page_size]

        payload = []
        for rec, year in page_items:
            highlight_from = [
                snap.keywords.get(kid)
                for kid in sorted(keyword_ids & rec.keyword_ids)
            ] if keyword_ids else [
                snap.keywords.get(kid) for kid in sorted(rec.keyword_ids)
            ]
            spans = set()
            for ck in [c for c in highlight_from if c] + adhoc:
                for m in ck.regex.finditer(rec.sentence_text):
                    spans.add((m.start(), m.end()))
            payload.append({
                "accession_number": rec.filing.accession_number,
                "cik": rec.filing.cik,
                "company_name": rec.filing.company_name,
                "sic": rec.filing.sic,
                "reporting_year": year,
                "item_id": rec.item_id,
                "sentence_index": rec.sentence_index,
                "sentence_text": rec.sentence_text,
                "keyword_ids": sorted(rec.keyword_ids),
                "highlights": sorted(spans),
            })
        return {
            "total": total, "page": page, "page_size": page_size,
            "results": payload,
        }

    @app.get("/api/stats")
    def stats(
        metric: str = "pct_companies",
        scope: str = Scope.ALL.value,
        year: Optional[int] = None,
        top_n: int = 15,
        conditional: bool = True,
    ):
        snap = _snapshot()
        try:
            scope_enum = Scope(scope)
        except ValueError:
            raise HTTPException(400, detail=f"unknown scope {scope!r}")
        index = snap.index
        years = [year] if year is not None else index.years
        try:
            if metric in ("pct_companies", "total_matches", "total_sentences"):
                rows = [
                    analytics.StatRow(
                        year=y, scope=scope_enum, metric=metric,
                        value=analytics._metric_value(index, metric,
                                                      scope_enum, y),
                    ).to_dict()
                    for y in years
                ]
                return {"rows": rows}
            if metric == "avg_unique_sentences":
                rows = [
                    analytics.StatRow(
                        year=y, scope=scope_enum, metric=metric,
                        value=analytics.avg_unique_sentences(
                            index, y, scope_enum, conditional=conditional
                        ),
                    ).to_dict()
                    for y in years
                ]
                return {"rows": rows}
            if metric == "industry":
                rows = []
                for y in years:
                    rows.extend(
                        row.to_dict()
                        for row in analytics.industry_breakdown(index, y,
                                                                top_n=top_n)
                    )
                return {"rows": rows}
            if metric == "overlap":
                return {
                    "partitions": {
                        str(y): analytics.cross_section_overlap(index, y)
                        for y in years
                    }
                }
            if metric == "section_share":
                return {"shares": analytics.section_share(index)}
        except analytics.AnalyticsError as err:
            raise HTTPException(400, detail=str(err))
        raise HTTPException(400, detail=f"unknown metric {metric!r}")

    @app.post("/api/export")
    def export(body: dict):
        snap = _snapshot()
        query_body = body.get("query", {})
        export_format = body.get("format", storage.CSV_FORMAT)
        if export_format not in (storage.CSV_FORMAT, storage.XLSX_FORMAT):
            raise HTTPException(
                400, detail=f"unsupported format {export_format!r}"
            )
        years_value = query_body.get("years") or ""
        query = storage.Query(
            keywords=frozenset(query_body.get("keywords") or []) or None,
            years=_parse_years_param(
                years_value if isinstance(years_value, str)
                else ",".join(str(y) for y in years_value)
            ),
            sections=frozenset(
                s.upper() for s in query_body.get("sections") or []
            ) or None,
            companies=tuple(query_body.get("companies") or []) or None,
            sic=frozenset(query_body.get("sic") or []) or None,
        )
        matches = [
            (rec, year) for rec, year in snap.matches
            if query.accepts(rec, year)
        ]
        payload = storage.export_matches_bytes(matches, export_format)
        media = (
            "text/csv; charset=utf-8"
            if export_format == storage.CSV_FORMAT
            else "application/vnd.openxmlformats-officedocument."
                 "spreadsheetml.sheet"
        )
        return Response(
            content=payload,
            media_type=media,
            headers={
                "Content-Disposition":
                    f'attachment; filename="matches.{export_format}"'
            },
        )

    @app.get("/api/context")
    def context(accession: str, item: str, index: int, window: int = 2):
        snap = _snapshot()
        try:
            parsed = storage.load_parsed(snap.parsed_dir, accession)
        except FileNotFoundError:
            raise HTTPException(404, detail=f"no parsed filing {accession}")
        text = parsed.section_text(item.upper())
        if text is None:
            raise HTTPException(404, detail=f"filing has no item {item}")
        spans = extraction.split_sentences(text)
        if not 0 <= index < len(spans):
            raise HTTPException(400, detail="sentence index out of range")
        lo = max(0, index - window)
        hi = min(len(spans), index + window + 1)
        return {
            "sentences": [
                {
                    "index": i,
                    "text": text[spans[i][0]:spans[i][1]],
                    "current": i == index,
                }
                for i in range(lo, hi)
            ]
        }

    @app.get("/api/meta")
    def meta():
        snap = _snapshot()
        companies = sorted(
            {
                (rec.filing.cik, rec.filing.company_name)
                for rec, _ in snap.sentences
            }
        )
        return {
            "years": snap.index.years,
            "sections": sorted(
                {rec.item_id for rec, _ in snap.sentences}, key=item_rank
            ),
            "keywords": snap.keywords.ids,
            "companies": [
                {"cik": cik, "name": name} for cik, name in companies
            ],
            "sic": sorted({rec.filing.sic for rec, _ in snap.sentences if
                           rec.filing.sic}),
            "total_sentences": len(snap.sentences),
            "total_matches": len(snap.matches),
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
