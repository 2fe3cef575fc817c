from __future__ import annotations

import sys
from datetime import date, datetime, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus_fixtures import COMPANIES, build_edgar_tree, make_10k_html  # noqa: E402

from secmine.models import FilingRef, RawFiling  # noqa: E402
from secmine import parser  # noqa: E402


@pytest.fixture(scope="session")
def edgar_tree(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("edgar")
    build_edgar_tree(root)
    return root


def raw_filing_for(cik: int, accession: str) -> RawFiling:
    """Build the fixture RawFiling directly, without HTTP."""
    for company in COMPANIES:
        if company["cik"] != cik:
            continue
        for filing in company["filings"]:
            if filing["accession"] != accession:
                continue
            ref = FilingRef(
                cik=cik,
                accession_number=accession,
                form_type=filing["form"],
                filing_date=date.fromisoformat(filing["filed"]),
                period_end=date.fromisoformat(filing["period"]),
                company_name=company["name"],
                sic=company["sic"],
            )
            html = make_10k_html(
                company["name"], int(filing["period"][:4]), filing["items"]
            )
            return RawFiling(
                ref=ref,
                content=html.encode("utf-8"),
                content_kind="html",
                retrieved_at=datetime(2025, 4, 1, tzinfo=timezone.utc),
                source_url=f"fixture://{accession}",
            )
    raise KeyError((cik, accession))


def all_fixture_raw_filings(include_amendments: bool = False) -> list[RawFiling]:
    out = []
    for company in COMPANIES:
        for filing in company["filings"]:
            if not include_amendments and filing["form"] != "10-K":
                continue
            out.append(raw_filing_for(company["cik"], filing["accession"]))
    return out


@pytest.fixture(scope="session")
def parsed_fixture_corpus():
    """Every fixture 10-K parsed once, keyed by accession number."""
    return {
        raw.ref.accession_number: parser.parse_filing(raw)
        for raw in all_fixture_raw_filings()
    }


from workspace_builder import build_workspace  # noqa: E402


@pytest.fixture(scope="session")
def pipeline_workspace(tmp_path_factory, edgar_tree) -> Path:
    """A fully populated workspace: manifest, cache, parsed, record store."""
    return build_workspace(tmp_path_factory.mktemp("workspace"), edgar_tree)


@pytest.fixture(scope="session")
def edgar_http_server(edgar_tree):
    """A real HTTP server over the fixture tree, for CLI end-to-end runs."""
    import functools
    import threading
    from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer

    class QuietHandler(SimpleHTTPRequestHandler):
        def log_message(self, *args):
            pass

    handler = functools.partial(QuietHandler, directory=str(edgar_tree))
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
