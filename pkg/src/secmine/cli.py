"""Operator command line: crawl -> parse -> extract -> stats -> sample -> export -> serve.

Every stage reads and writes plain files inside a workspace directory, so
any stage can be re-run or inspected on its own. Given identical inputs
and seed, each stage is idempotent and its outputs are byte-reproducible
regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Optional

import click

from . import analytics, extraction, parser, storage
from .edgar_client import (
    ARCHIVES_BASE_URL,
    DATA_BASE_URL,
    ConfigError,
    EdgarClient,
    FilingCache,
)
from .models import Scope, sorted_refs

DEFAULT_SECTIONS = "all"


def _fail(message: str, hint: str = "", code: int = 2) -> None:
    payload = {"error": message}
    if hint:
        payload["hint"] = hint
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def _parse_years(spec: str) -> list[int]:
    years: set[int] = set()
    for chunk in spec.replace("-", "..").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ".." in chunk:
            lo, hi = chunk.split("..", 1)
            years.update(range(int(lo), int(hi) + 1))
        else:
            years.add(int(chunk))
    if not years:
        raise click.BadParameter(f"no years in {spec!r}")
    return sorted(years)


def _parse_sections(spec: str) -> Optional[list[str]]:
    if spec.strip().lower() == DEFAULT_SECTIONS:
        return None
    return [s.strip().upper() for s in spec.split(",") if s.strip()]


def _require(path: Path, what: str, produced_by: str) -> None:
    if not path.exists():
        _fail(
            f"missing input: {what} not found at {path}",
            hint=f"run {produced_by} first",
        )


class Workspace:
    def __init__(self, root: Path):
        self.root = root
        self.manifest = root / "manifest.jsonl"
        self.cache_dir = root / "cache"
        self.parsed_dir = root / "parsed"
        self.store_path = root / "records.store"
        self.stats_dir = root / "stats"
        self.exports_dir = root / "exports"


pass_workspace = click.make_pass_decorator(Workspace)


@click.group()
@click.option(
    "--workdir", type=click.Path(path_type=Path), default=Path("."),
    show_default=True, help="Workspace directory holding all stage outputs.",
)
@click.pass_context
def main(ctx: click.Context, workdir: Path) -> None:
    """Mine SEC 10-K filings for keyword-based disclosures."""
    ctx.obj = Workspace(workdir)


@main.command()
@click.option("--years", required=True, help="Reporting years, e.g. 2020..2024.")
@click.option("--form", "form_type", default="10-K", show_default=True)
@click.option("--cik", "ciks", multiple=True, type=int,
              help="Restrict the crawl to these CIKs.")
@click.option("--contact", envvar="SEC_CONTACT", default="",
              help="Identifying contact for the SEC fair-access policy.")
@click.option("--cache-dir", type=click.Path(path_type=Path), default=None)
@click.option("--base-url", default="",
              help="Override both EDGAR base URLs (useful for mirrors).")
@click.option("--rate-limit", default=8.0, show_default=True)
@click.option("--widen-forms", is_flag=True,
              help="Also accept 10-K variants such as 10-K/A and 10-KT.")
@click.option("--out", "manifest_out", type=click.Path(path_type=Path), default=None)
@pass_workspace
def crawl(ws: Workspace, years: str, form_type: str, ciks, contact: str,
          cache_dir, base_url: str, rate_limit: float, widen_forms: bool,
          manifest_out) -> None:
    """Discover and download filings; write the corpus manifest."""
    year_list = _parse_years(years)
    cache_dir = cache_dir or ws.cache_dir
    manifest_out = manifest_out or ws.manifest
    try:
        client = EdgarClient(
            contact=contact,
            cache_dir=cache_dir,
            rate_limit=rate_limit,
            data_base_url=base_url or DATA_BASE_URL,
            archives_base_url=base_url or ARCHIVES_BASE_URL,
        )
    except ConfigError as err:
        _fail(str(err), hint="set SEC_CONTACT or pass --contact")
        return
    with client:
        refs = client.list_filings(
            year_list, form_type=form_type,
            cik_filter=ciks or None, widen_forms=widen_forms,
        )
        entries = []
        for ref in refs:
            client.fetch_filing(ref)
            entries.append(client.manifest_entry(ref))
    storage.write_manifest(
        manifest_out, entries,
        extracted_on=date.today().isoformat(),
        meta={"form_type": form_type, "years": year_list},
    )
    click.echo(f"crawled {len(refs)} filing(s); manifest at {manifest_out}")


@main.command()
@click.option("--manifest", type=click.Path(path_type=Path), default=None)
@click.option("--cache-dir", type=click.Path(path_type=Path), default=None)
@click.option("--out", "parsed_out", type=click.Path(path_type=Path), default=None)
@click.option("--workers", default=1, show_default=True)
@click.option("--min-body", default=parser.DEFAULT_MIN_BODY_CHARS,
              show_default=True, help="Min chars for a heading's body.")
@pass_workspace
def parse(ws: Workspace, manifest, cache_dir, parsed_out, workers: int,
          min_body: int) -> None:
    """Normalize and segment every cached filing in the manifest."""
    manifest = manifest or ws.manifest
    cache_dir = cache_dir or ws.cache_dir
    parsed_out = parsed_out or ws.parsed_dir
    _require(manifest, "corpus manifest", "crawl")
    _, entries = storage.read_manifest(manifest)
    refs = sorted_refs(storage.manifest_refs(entries))
    cache = FilingCache(cache_dir)

    def _one(ref):
        raw = cache.get(ref)
        if raw is None:
            raise FileNotFoundError(
                f"filing {ref.accession_number} is not in the cache"
            )
        parsed = parser.parse_filing(raw, min_body_chars=min_body)
        storage.save_parsed(parsed, parsed_out)
        return ref.accession_number

    try:
        with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
            done = list(pool.map(_one, refs))
    except FileNotFoundError as err:
        _fail(str(err), hint="run crawl first")
        return
    click.echo(f"parsed {len(done)} filing(s) into {parsed_out}")


@main.command()
@click.option("--parsed", "parsed_dir", type=click.Path(path_type=Path), default=None)
@click.option("--keywords", "keywords_file", type=click.Path(path_type=Path),
              default=None, help="Keyword CSV (defaults to the shipped AI set).")
@click.option("--sections", default=DEFAULT_SECTIONS, show_default=True,
              help="Comma-separated item ids, or 'all'.")
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.option("--workers", default=1, show_default=True)
@pass_workspace
def extract(ws: Workspace, parsed_dir, keywords_file, sections: str,
            store_path, workers: int) -> None:
    """Scan parsed filings for keyword matches; write the record store."""
    parsed_dir = parsed_dir or ws.parsed_dir
    store_path = store_path or ws.store_path
    if not storage.list_parsed(parsed_dir):
        _fail(
            f"missing input: no parsed filings in {parsed_dir}",
            hint="run parse first",
        )
    patterns = (
        extraction.load_keywords(keywords_file)
        if keywords_file else extraction.default_keywords()
    )
    try:
        keyword_set = extraction.compile_keywords(patterns)
    except extraction.KeywordCompileError as err:
        _fail(str(err))
        return
    section_filter = _parse_sections(sections)

    def _one(accession: str):
        parsed = storage.load_parsed(parsed_dir, accession)
        matches, sentences = extraction.scan(parsed, keyword_set, section_filter)
        year = analytics.assign_reporting_year(parsed.ref)
        return [(rec, year) for rec in matches + sentences]

    accessions = storage.list_parsed(parsed_dir)
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        batches = list(pool.map(_one, accessions))
    batch = [pair for chunk in batches for pair in chunk]
    receipt = storage.RecordStore(store_path).replace_records(batch)
    if not receipt.ok:
        _fail(f"store commit failed: {receipt.error}")
    n_matches = sum(
        1 for rec, _ in batch if isinstance(rec, storage.MatchRecord)
    )
    click.echo(
        f"extracted {n_matches} match(es), {len(batch) - n_matches} "
        f"sentence record(s) into {store_path}"
    )


def _build_index(ws: Workspace, manifest, parsed_dir, store_path):
    manifest = manifest or ws.manifest
    parsed_dir = parsed_dir or ws.parsed_dir
    store_path = store_path or ws.store_path
    _require(manifest, "corpus manifest", "crawl")
    _require(store_path, "record store", "extract")
    _, entries = storage.read_manifest(manifest)
    refs = storage.manifest_refs(entries)
    sections_present = {}
    for accession in storage.list_parsed(parsed_dir):
        parsed = storage.load_parsed(parsed_dir, accession)
        sections_present[accession] = frozenset(
            sec.item_id for sec in parsed.sections
        )
    store = storage.RecordStore(store_path)
    records = store.load_records()
    return analytics.CorpusIndex(
        refs,
        sentence_records=[r for r, _ in records
                          if isinstance(r, storage.SentenceRecord)],
        match_records=[r for r, _ in records
                       if isinstance(r, storage.MatchRecord)],
        sections_present=sections_present,
    )


@main.command()
@click.option("--manifest", type=click.Path(path_type=Path), default=None)
@click.option("--parsed", "parsed_dir", type=click.Path(path_type=Path), default=None)
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.option("--out-dir", type=click.Path(path_type=Path), default=None)
@click.option("--top-n", default=15, show_default=True)
@click.option("--seed", default=0, show_default=True,
              help="Recorded in output provenance headers.")
@click.option("--metric", type=click.Choice(["pct", "avg", "matches", "sentences"]),
              default=None, help="Print one metric to stdout instead of files.")
@click.option("--scope", type=click.Choice([s.value for s in Scope]),
              default=Scope.ALL.value, show_default=True)
@pass_workspace
def stats(ws: Workspace, manifest, parsed_dir, store_path, out_dir,
          top_n: int, seed: int, metric, scope: str) -> None:
    """Compute corpus statistics; write the stats tables."""
    index = _build_index(ws, manifest, parsed_dir, store_path)
    scope_enum = Scope(scope)
    if metric:
        metric_name = {
            "pct": "pct_companies", "avg": "avg_unique_sentences",
            "matches": "total_matches", "sentences": "total_sentences",
        }[metric]
        for year in index.years:
            value = analytics._metric_value(index, metric_name, scope_enum, year)
            click.echo(f"{year},{scope_enum.value},{metric_name},{value!r}")
        return
    out_dir = out_dir or ws.stats_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = {"seed": seed, "top_n": top_n}
    storage.write_stats_csv(
        analytics.all_stat_rows(index, top_n=top_n),
        out_dir / "stats.csv", provenance,
    )
    _write_trend_tables(index, out_dir, provenance)
    click.echo(f"stats written to {out_dir}")


def _write_trend_tables(index, out_dir: Path, provenance: dict) -> None:
    with open(out_dir / "mention_trend.csv", "w", newline="",
              encoding="utf-8") as fh:
        for key in sorted(provenance):
            fh.write(f"# {key}={provenance[key]}\r\n")
        writer = csv.writer(fh)
        writer.writerow(["year", "pct_companies", "avg_unique_sentences"])
        for year in index.years:
            pct = analytics.pct_companies_mentioning(index, year, Scope.ALL)
            try:
                avg = analytics.avg_unique_sentences(index, year, Scope.ALL)
                avg_repr = repr(avg)
            except analytics.AnalyticsError:
                avg_repr = ""
            writer.writerow([year, repr(pct), avg_repr])
    with open(out_dir / "section_trend.csv", "w", newline="",
              encoding="utf-8") as fh:
        for key in sorted(provenance):
            fh.write(f"# {key}={provenance[key]}\r\n")
        writer = csv.writer(fh)
        writer.writerow(["year", "business_pct", "risk_pct"])
        for year in index.years:
            writer.writerow([
                year,
                repr(analytics.pct_companies_mentioning(index, year,
                                                        Scope.BUSINESS)),
                repr(analytics.pct_companies_mentioning(index, year, Scope.RISK)),
            ])


@main.command()
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.option("-n", "sample_size", default=385, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@pass_workspace
def sample(ws: Workspace, store_path, sample_size: int, seed: int,
           out_path) -> None:
    """Draw a reproducible random sample of matches for manual review."""
    store_path = store_path or ws.store_path
    _require(store_path, "record store", "extract")
    matches = storage.RecordStore(store_path).load_matches()
    matches.sort(key=storage.export_sort_key)
    try:
        sampled = extraction.sample_matches(
            [rec for rec, _ in matches], sample_size, seed
        )
    except ValueError as err:
        _fail(str(err))
        return
    years = {rec.filing.accession_number: year for rec, year in matches}
    out_path = out_path or (ws.exports_dir / "sample.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# n={sample_size}\r\n# population={len(matches)}\r\n"
                 f"# seed={seed}\r\n")
        writer = csv.writer(fh)
        writer.writerow(storage.EXPORT_COLUMNS)
        for rec in sampled:
            writer.writerow([
                rec.filing.accession_number, rec.filing.cik,
                rec.filing.company_name, rec.filing.sic,
                years[rec.filing.accession_number], rec.item_id,
                rec.sentence_index, rec.keyword_id, rec.char_start,
                rec.char_end, rec.sentence_text,
            ])
    click.echo(f"sampled {sample_size} of {len(matches)} matches "
               f"into {out_path}")


@main.command()
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.option("--keywords", "keyword_ids", default="",
              help="Comma-separated keyword ids to include.")
@click.option("--years", default="", help="Reporting years, e.g. 2023..2024.")
@click.option("--sections", default="", help="Comma-separated item ids.")
@click.option("--company", "companies", multiple=True,
              help="CIK or company-name substring.")
@click.option("--sic", "sics", multiple=True)
@click.option("--format", "export_format", default=storage.CSV_FORMAT,
              type=click.Choice([storage.CSV_FORMAT, storage.XLSX_FORMAT]),
              show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@pass_workspace
def export(ws: Workspace, store_path, keyword_ids: str, years: str,
           sections: str, companies, sics, export_format: str, out_path) -> None:
    """Export matched sentences as a spreadsheet-compatible file."""
    store_path = store_path or ws.store_path
    _require(store_path, "record store", "extract")
    query = storage.Query(
        keywords=frozenset(
            k.strip() for k in keyword_ids.split(",") if k.strip()
        ) or None,
        years=frozenset(_parse_years(years)) if years.strip() else None,
        sections=(
            frozenset(s.strip().upper() for s in sections.split(",") if s.strip())
            or None
        ),
        companies=tuple(companies) or None,
        sic=frozenset(sics) or None,
    )
    out_path = out_path or (ws.exports_dir / f"matches.{export_format}")
    spec = storage.ExportSpec(
        query=query, format=export_format, destination=out_path
    )
    dest = storage.export_matches(storage.RecordStore(store_path), spec)
    click.echo(f"export written to {dest}")


@main.command()
@click.option("--manifest", type=click.Path(path_type=Path), default=None)
@click.option("--parsed", "parsed_dir", type=click.Path(path_type=Path), default=None)
@click.option("--store", "store_path", type=click.Path(path_type=Path), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--ui-dir", type=click.Path(path_type=Path), default=None,
              help="Directory of built web-UI assets to serve at /.")
@pass_workspace
def serve(ws: Workspace, manifest, parsed_dir, store_path, host: str,
          port: int, ui_dir) -> None:
    """Serve the search/stats/export API over the frozen corpus."""
    import uvicorn

    from .service import create_app

    manifest = manifest or ws.manifest
    parsed_dir = parsed_dir or ws.parsed_dir
    store_path = store_path or ws.store_path
    _require(manifest, "corpus manifest", "crawl")
    _require(store_path, "record store", "extract")
    app = create_app(
        manifest_path=manifest, parsed_dir=parsed_dir, store_path=store_path,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
