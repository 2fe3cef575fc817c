"""Persistence and analyst-facing exports.

The match/sentence store is a single file: a JSON header line carrying the
schema version followed by one JSON record per line. Commits rewrite the
whole file to a temp path and rename it into place, so readers only ever
see a fully committed snapshot.

CSV is the normative export format (RFC 4180, byte-reproducible); xlsx is
a convenience mirror of the same grid.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .analytics import assign_reporting_year
from .models import (
    FilingRef,
    MatchRecord,
    ParsedFiling,
    SentenceRecord,
    StatRow,
    item_rank,
)

log = logging.getLogger(__name__)

STORE_FORMAT = "secmine-records"
STORE_VERSION = 1

Record = Union[MatchRecord, SentenceRecord]


class StoreError(RuntimeError):
    """The store file is missing, corrupt, or from an unknown version."""


class CommitFault(RuntimeError):
    """Raised by the fault-injection hook to abort a commit."""


@dataclass(frozen=True)
class Receipt:
    ok: bool
    written: int = 0
    total: int = 0
    error: str = ""


@dataclass(frozen=True)
class Query:
    """Record filter shared by loads, exports, and the search API."""

    keywords: Optional[frozenset[str]] = None
    years: Optional[frozenset[int]] = None
    sections: Optional[frozenset[str]] = None
    companies: Optional[tuple[str, ...]] = None  # cik digits or name substring
    sic: Optional[frozenset[str]] = None

    def _company_ok(self, ref: FilingRef) -> bool:
        if not self.companies:
            return True
        for needle in self.companies:
            if needle.isdigit() and int(needle) == ref.cik:
                return True
            if needle.lower() in ref.company_name.lower():
                return True
        return False

    def accepts(self, record: Record, reporting_year: int) -> bool:
        if self.years is not None and reporting_year not in self.years:
            return False
        if self.sections is not None and record.item_id not in self.sections:
            return False
        if not self._company_ok(record.filing):
            return False
        if self.sic is not None and (record.filing.sic or "") not in self.sic:
            return False
        if self.keywords is not None:
            if isinstance(record, MatchRecord):
                return record.keyword_id in self.keywords
            return bool(record.keyword_ids & self.keywords)
        return True


def _encode(record: Record, reporting_year: int) -> dict:
    kind = "match" if isinstance(record, MatchRecord) else "sentence"
    return {"kind": kind, "reporting_year": reporting_year, **record.to_dict()}


def _decode(data: dict) -> tuple[Record, int]:
    kind = data.get("kind")
    year = int(data["reporting_year"])
    if kind == "match":
        return MatchRecord.from_dict(data), year
    if kind == "sentence":
        return SentenceRecord.from_dict(data), year
    raise StoreError(f"unknown record kind {kind!r}")


class RecordStore:
    """Single-file tabular store for match and sentence records."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self.fail_before_commit = None  # test hook

    def exists(self) -> bool:
        return self.path.exists()

    def _read_lines(self) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            header_line = fh.readline()
            if not header_line.strip():
                raise StoreError(f"{self.path}: missing header")
            header = json.loads(header_line)
            if header.get("format") != STORE_FORMAT:
                raise StoreError(f"{self.path}: not a record store")
            if header.get("version") != STORE_VERSION:
                raise StoreError(
                    f"{self.path}: unsupported version {header.get('version')}"
                )
            return [json.loads(line) for line in fh if line.strip()]

    def persist_records(
        self, batch: Sequence[tuple[Record, int]] | Sequence[Record]
    ) -> Receipt:
        """Append a batch atomically. Items are records or (record, year)."""
        normalized: list[tuple[Record, int]] = []
        for item in batch:
            if isinstance(item, tuple):
                normalized.append(item)
            else:
                normalized.append((item, assign_reporting_year(item.filing)))
        try:
            existing = self._read_lines()
            lines = [json.dumps({"format": STORE_FORMAT, "version": STORE_VERSION})]
            lines.extend(json.dumps(d, sort_keys=True) for d in existing)
            lines.extend(
                json.dumps(_encode(rec, year), sort_keys=True)
                for rec, year in normalized
            )
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            if self.fail_before_commit is not None:
                self.fail_before_commit()
            os.replace(tmp, self.path)
        except (OSError, CommitFault, StoreError) as err:
            try:
                tmp.unlink(missing_ok=True)  # type: ignore[possibly-undefined]
            except (OSError, UnboundLocalError):
                pass
            return Receipt(ok=False, error=str(err))
        return Receipt(
            ok=True, written=len(normalized),
            total=len(existing) + len(normalized),
        )

    def replace_records(
        self, batch: Sequence[tuple[Record, int]] | Sequence[Record]
    ) -> Receipt:
        """Atomically replace the whole store with this batch."""
        try:
            self.path.unlink(missing_ok=True)
        except OSError as err:
            return Receipt(ok=False, error=str(err))
        return self.persist_records(batch)

    def load_records(
        self, query: Optional[Query] = None
    ) -> list[tuple[Record, int]]:
        """All records passing the filter, in commit order, re-validated."""
        query = query or Query()
        out = []
        for data in self._read_lines():
            record, year = _decode(data)
            if query.accepts(record, year):
                out.append((record, year))
        return out

    def load_matches(self, query: Optional[Query] = None) -> list[tuple[MatchRecord, int]]:
        return [
            (rec, year)
            for rec, year in self.load_records(query)
            if isinstance(rec, MatchRecord)
        ]

    def load_sentences(
        self, query: Optional[Query] = None
    ) -> list[tuple[SentenceRecord, int]]:
        return [
            (rec, year)
            for rec, year in self.load_records(query)
            if isinstance(rec, SentenceRecord)
        ]


# --- match export ---------------------------------------------------------------

EXPORT_COLUMNS = (
    "accession_number", "cik", "company_name", "sic", "reporting_year",
    "section_item", "sentence_index", "keyword_id", "char_start", "char_end",
    "sentence_text",
)

CSV_FORMAT = "csv"
XLSX_FORMAT = "xlsx"


@dataclass(frozen=True)
class ExportSpec:
    query: Query = field(default_factory=Query)
    format: str = CSV_FORMAT
    destination: Path = Path("matches.csv")

    def __post_init__(self) -> None:
        if self.format not in (CSV_FORMAT, XLSX_FORMAT):
            raise ValueError(f"unsupported export format {self.format!r}")


def export_sort_key(pair: tuple[MatchRecord, int]):
    rec, _ = pair
    return (
        rec.filing.cik, rec.filing.accession_number, item_rank(rec.item_id),
        rec.sentence_index, rec.char_start, rec.char_end, rec.keyword_id,
    )


def _export_rows(matches: Iterable[tuple[MatchRecord, int]]) -> list[list]:
    rows = []
    for rec, year in sorted(matches, key=export_sort_key):
        rows.append([
            rec.filing.accession_number, rec.filing.cik, rec.filing.company_name,
            rec.filing.sic, year, rec.item_id, rec.sentence_index,
            rec.keyword_id, rec.char_start, rec.char_end, rec.sentence_text,
        ])
    return rows


def export_matches_bytes(
    matches: Iterable[tuple[MatchRecord, int]], format: str = CSV_FORMAT
) -> bytes:
    """Render the export grid to bytes (deterministic for a given input)."""
    rows = _export_rows(matches)
    if format == CSV_FORMAT:
        import io

        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(EXPORT_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue().encode("utf-8")
    if format == XLSX_FORMAT:
        return _xlsx_bytes([list(EXPORT_COLUMNS)] + rows)
    raise ValueError(f"unsupported export format {format!r}")


def export_matches(store: RecordStore, spec: ExportSpec) -> Path:
    """Export matching records to the ExportSpec destination file."""
    matches = store.load_matches(spec.query)
    payload = export_matches_bytes(matches, spec.format)
    dest = Path(spec.destination)
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(payload)
    log.info("exported %d match row(s) to %s", len(matches), dest)
    return dest


# --- minimal xlsx writer ----------------------------------------------------------
# openpyxl is deliberately not required: the mirror grid only needs inline
# strings and numbers, and a fixed zip layout keeps the output reproducible.

_XLSX_CONTENT_TYPES = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
    '<Default Extension="rels" '
    'ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
    '<Default Extension="xml" ContentType="application/xml"/>'
    '<Override PartName="/xl/workbook.xml" ContentType="application/vnd.'
    'openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/>'
    '<Override PartName="/xl/worksheets/sheet1.xml" ContentType="application/'
    'vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/>'
    "</Types>"
)

_XLSX_RELS = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/'
    'relationships"><Relationship Id="rId1" Type="http://schemas.'
    'openxmlformats.org/officeDocument/2006/relationships/officeDocument" '
    'Target="xl/workbook.xml"/></Relationships>'
)

_XLSX_WORKBOOK = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/'
    'main" xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/'
    'relationships"><sheets><sheet name="matches" sheetId="1" r:id="rId1"/>'
    "</sheets></workbook>"
)

_XLSX_WORKBOOK_RELS = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/'
    'relationships"><Relationship Id="rId1" Type="http://schemas.'
    'openxmlformats.org/officeDocument/2006/relationships/worksheet" '
    'Target="worksheets/sheet1.xml"/></Relationships>'
)


def _xml_escape(value: str) -> str:
    return (
        value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def _column_letter(index: int) -> str:
    letters = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        letters = chr(ord("A") + rem) + letters
    return letters


def _sheet_xml(rows: Sequence[Sequence]) -> str:
    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/'
        '2006/main"><sheetData>'
    ]
    for r, row in enumerate(rows, start=1):
        parts.append(f'<row r="{r}">')
        for c, value in enumerate(row):
            ref = f"{_column_letter(c)}{r}"
            if isinstance(value, bool):
                parts.append(f'<c r="{ref}" t="b"><v>{int(value)}</v></c>')
            elif isinstance(value, (int, float)):
                parts.append(f'<c r="{ref}"><v>{value}</v></c>')
            else:
                text = _xml_escape(str(value))
                parts.append(
                    f'<c r="{ref}" t="inlineStr"><is>'
                    f'<t xml:space="preserve">{text}</t></is></c>'
                )
        parts.append("</row>")
    parts.append("</sheetData></worksheet>")
    return "".join(parts)


def _xlsx_bytes(rows: Sequence[Sequence]) -> bytes:
    import io

    buf = io.BytesIO()
    entries = (
        ("[Content_Types].xml", _XLSX_CONTENT_TYPES),
        ("_rels/.rels", _XLSX_RELS),
        ("xl/workbook.xml", _XLSX_WORKBOOK),
        ("xl/_rels/workbook.xml.rels", _XLSX_WORKBOOK_RELS),
        ("xl/worksheets/sheet1.xml", _sheet_xml(rows)),
    )
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, content in entries:
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, content)
    return buf.getvalue()


def read_xlsx_grid(path_or_bytes) -> list[list[str]]:
    """Read back the grid of a mirror xlsx (testing/inspection helper)."""
    import io
    import re as _re

    if isinstance(path_or_bytes, (bytes, bytearray)):
        fh = io.BytesIO(path_or_bytes)
    else:
        fh = open(path_or_bytes, "rb")
    with fh, zipfile.ZipFile(fh) as zf:
        xml = zf.read("xl/worksheets/sheet1.xml").decode("utf-8")
    rows = []
    for row_xml in _re.findall(r"<row [^>]*>(.*?)</row>", xml, _re.S):
        cells = []
        for cell in _re.findall(r"<c [^>]*?(?:/>|>.*?</c>)", row_xml, _re.S):
            m = _re.search(r"<t[^>]*>(.*?)</t>", cell, _re.S)
            if m is None:
                m = _re.search(r"<v>(.*?)</v>", cell, _re.S)
            text = m.group(1) if m else ""
            cells.append(
                text.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
            )
        rows.append(cells)
    return rows


# --- corpus manifest ---------------------------------------------------------------

MANIFEST_FORMAT = "secmine-manifest"


def write_manifest(
    path: Path | str,
    entries: Sequence[dict],
    extracted_on: str,
    meta: Optional[dict] = None,
) -> None:
    """Write the corpus manifest: a header line then one filing per line."""
    header = {
        "format": MANIFEST_FORMAT, "version": 1, "extracted_on": extracted_on,
    }
    header.update(meta or {})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_manifest(path: Path | str) -> tuple[dict, list[dict]]:
    """Read the manifest header and entries; validates every FilingRef."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != MANIFEST_FORMAT:
            raise StoreError(f"{path}: not a corpus manifest")
        entries = [json.loads(line) for line in fh if line.strip()]
    for entry in entries:
        FilingRef.from_dict(entry)
    return header, entries


def manifest_refs(entries: Iterable[dict]) -> list[FilingRef]:
    return [FilingRef.from_dict(entry) for entry in entries]


# --- parsed filings ---------------------------------------------------------------

def save_parsed(parsed: ParsedFiling, parsed_dir: Path | str) -> Path:
    parsed_dir = Path(parsed_dir)
    parsed_dir.mkdir(parents=True, exist_ok=True)
    path = parsed_dir / f"{parsed.ref.accession_number}.json"
    tmp = path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(parsed.to_dict(), fh, sort_keys=True)
    os.replace(tmp, path)
    return path


def load_parsed(parsed_dir: Path | str, accession_number: str) -> ParsedFiling:
    path = Path(parsed_dir) / f"{accession_number}.json"
    with open(path, encoding="utf-8") as fh:
        return ParsedFiling.from_dict(json.load(fh))


def list_parsed(parsed_dir: Path | str) -> list[str]:
    directory = Path(parsed_dir)
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.glob("*.json"))


# --- stats files ---------------------------------------------------------------

def write_stats_csv(
    rows: Sequence[StatRow], path: Path | str, provenance: Optional[dict] = None
) -> None:
    """Write StatRows as CSV with '#' provenance comment lines up front."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key in sorted(provenance or {}):
            fh.write(f"# {key}={provenance[key]}\r\n")
        writer = csv.writer(fh)
        writer.writerow(["year", "scope", "sic_group", "metric", "value"])
        for row in rows:
            writer.writerow([
                row.year, row.scope.value, row.sic_group or "",
                row.metric, repr(row.value),
            ])
