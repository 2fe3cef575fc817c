from __future__ import annotations

import json
import random

import httpx
import pytest

from corpus_fixtures import fixture_transport

from secmine.edgar_client import (
    ConfigError,
    EdgarClient,
    PermanentFetchError,
    RateLimiter,
    RetriableFetchError,
)

FAST = 10_000  # effectively unlimited rate for unit tests


def make_client(tree, counter=None, **kwargs):
    kwargs.setdefault("contact", "Test Suite test@example.com")
    kwargs.setdefault("rate_limit", FAST)
    kwargs.setdefault("sleep", lambda s: None)
    return EdgarClient(
        transport=fixture_transport(tree, counter),
        data_base_url="https://data.sec.gov",
        archives_base_url="https://www.sec.gov",
        **kwargs,
    )


class FakeTime:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def clock(self):
        return self.now

    def sleep(self, seconds):
        self.sleeps.append(seconds)
        self.now += seconds


class TestRateLimiter:
    def test_hundred_acquisitions_at_eight_per_second(self):
        fake = FakeTime()
        limiter = RateLimiter(8, clock=fake.clock, sleep=fake.sleep)
        for _ in range(100):
            limiter.acquire()
        assert fake.now >= 12.0

    def test_single_acquisition_immediate(self):
        fake = FakeTime()
        limiter = RateLimiter(8, clock=fake.clock, sleep=fake.sleep)
        limiter.acquire()
        assert fake.sleeps == []

    def test_sliding_window_property(self):
        rng = random.Random(5)
        fake = FakeTime()
        limiter = RateLimiter(5, clock=fake.clock, sleep=fake.sleep)
        times = []
        for _ in range(200):
            if rng.random() < 0.4:
                fake.now += rng.random() * 0.3
            limiter.acquire()
            times.append(fake.now)
        for i, t in enumerate(times):
            in_window = sum(1 for u in times if t <= u < t + 1.0)
            assert in_window <= 5, (i, t)

    def test_invalid_rate_rejected(self):
        with pytest.raises(ValueError):
            RateLimiter(0)


class TestConfig:
    def test_missing_contact_is_startup_error(self, tmp_path, monkeypatch):
        monkeypatch.delenv("SEC_CONTACT", raising=False)
        with pytest.raises(ConfigError, match="contact"):
            EdgarClient(cache_dir=tmp_path)

    def test_contact_from_environment(self, tmp_path, monkeypatch, edgar_tree):
        monkeypatch.setenv("SEC_CONTACT", "Env Contact env@example.com")
        client = EdgarClient(
            cache_dir=tmp_path, transport=fixture_transport(edgar_tree),
            rate_limit=FAST,
        )
        assert client.contact == "Env Contact env@example.com"


class TestListFilings:
    def test_two_ciks_one_year(self, edgar_tree, tmp_path):
        client = make_client(edgar_tree, cache_dir=tmp_path)
        refs = client.list_filings([2024], "10-K",
                                   cik_filter=[1111111, 2222222])
        assert [r.accession_number for r in refs] == [
            "0001111111-25-000001", "0002222222-25-000003",
        ]
        assert refs[0].sic == "7372"
        assert refs[0].company_name == "Fixture Software Inc"

    def test_empty_cik_filter_empty_result(self, edgar_tree, tmp_path):
        client = make_client(edgar_tree, cache_dir=tmp_path)
        assert client.list_filings([2024], "10-K", cik_filter=[]) == []

    def test_amendments_excluded_by_default(self, edgar_tree, tmp_path):
        client = make_client(edgar_tree, cache_dir=tmp_path)
        refs = client.list_filings([2024], "10-K", cik_filter=[1111111])
        assert [r.form_type for r in refs] == ["10-K"]
        widened = client.list_filings([2024], "10-K", cik_filter=[1111111],
                                      widen_forms=True)
        assert sorted(r.form_type for r in widened) == ["10-K", "10-K/A"]

    def test_universe_discovery_via_form_index(self, edgar_tree, tmp_path,
                                               caplog):
        client = make_client(edgar_tree, cache_dir=tmp_path)
        with caplog.at_level("WARNING"):
            refs = client.list_filings([2023, 2024], "10-K")
        assert len(refs) == 7
        assert len({r.accession_number for r in refs}) == 7
        ciks = sorted({r.cik for r in refs})
        assert ciks == [1111111, 2222222, 3333333, 4444444, 5555555]
        # the malformed index row was skipped with a warning, not silently
        assert any("malformed index row" in r.message for r in caplog.records)

    def test_reporting_year_attribution(self, edgar_tree, tmp_path):
        client = make_client(edgar_tree, cache_dir=tmp_path)
        refs = client.list_filings([2023], "10-K", cik_filter=[1111111])
        assert [r.accession_number for r in refs] == ["0001111111-24-000001"]

    def test_malformed_submission_rows_skipped(self, tmp_path, caplog):
        tree = tmp_path / "tree"
        sub_dir = tree / "submissions"
        sub_dir.mkdir(parents=True)
        payload = {
            "cik": "777", "name": "Broken Co", "sic": "1000",
            "filings": {"recent": {
                "accessionNumber": ["not-an-accession",
                                    "0000000777-25-000001"],
                "form": ["10-K", "10-K"],
                "filingDate": ["2025-01-15", "2025-02-15"],
                "reportDate": ["2024-12-31", "2024-12-31"],
                "primaryDocument": ["a.htm", "b.htm"],
            }},
        }
        (sub_dir / "CIK0000000777.json").write_text(json.dumps(payload))
        client = make_client(tree, cache_dir=tmp_path / "cache")
        with caplog.at_level("WARNING"):
            refs = client.list_filings([2024], "10-K", cik_filter=[777])
        assert [r.accession_number for r in refs] == ["0000000777-25-000001"]
        assert any("malformed" in r.message for r in caplog.records)

    def test_fuzzed_rows_valid_kept_invalid_rejected(self, tmp_path):
        rng = random.Random(99)
        accessions, forms, fdates, rdates, docs = [], [], [], [], []
        expected = []
        for i in range(40):
            valid = rng.random() < 0.6
            acc = f"0000000888-25-{i:06d}"
            if not valid and rng.random() < 0.5:
                acc = f"888-25-{i}"
            accessions.append(acc)
            forms.append("10-K")
            if valid:
                fdates.append("2025-02-01")
                rdates.append("2024-12-31")
            elif rng.random() < 0.5:
                fdates.append("2025-02-01")
                rdates.append("2025-06-30")  # period after filing date
            else:
                fdates.append("bad-date")
                rdates.append("2024-12-31")
            docs.append(f"doc{i}.htm")
            if valid:
                expected.append(acc)
        tree = tmp_path / "tree"
        (tree / "submissions").mkdir(parents=True)
        (tree / "submissions" / "CIK0000000888.json").write_text(json.dumps({
            "cik": "888", "name": "Fuzz Co", "sic": "7372",
            "filings": {"recent": {
                "accessionNumber": accessions, "form": forms,
                "filingDate": fdates, "reportDate": rdates,
                "primaryDocument": docs,
            }},
        }))
        client = make_client(tree, cache_dir=tmp_path / "cache")
        refs = client.list_filings([2024], "10-K", cik_filter=[888])
        assert sorted(r.accession_number for r in refs) == sorted(expected)


class TestFetchFiling:
    def _ref(self, client):
        (ref,) = client.list_filings([2024], "10-K", cik_filter=[4444444])
        return ref

    def test_fetch_twice_one_request(self, edgar_tree, tmp_path):
        counter = []
        client = make_client(edgar_tree, counter=counter, cache_dir=tmp_path)
        ref = self._ref(client)
        before = len(counter)
        first = client.fetch_filing(ref)
        assert len(counter) == before + 1
        second = client.fetch_filing(ref)
        assert len(counter) == before + 1  # served from cache
        assert first.content == second.content
        assert first.content_kind == "html"

    def test_retry_on_503_then_success(self, tmp_path):
        calls = []

        def handler(request):
            calls.append(str(request.url))
            if len(calls) == 1:
                return httpx.Response(503, text="busy")
            return httpx.Response(200, content=b"<p>Item 1. Business</p>")

        client = EdgarClient(
            contact="t t@example.com", cache_dir=tmp_path,
            transport=httpx.MockTransport(handler), rate_limit=FAST,
            sleep=lambda s: None,
        )
        response = client._get("https://www.sec.gov/some/doc.htm")
        assert response.status_code == 200
        assert len(calls) == 2

    def test_404_is_permanent_no_cache_entry(self, edgar_tree, tmp_path):
        client = make_client(edgar_tree, cache_dir=tmp_path)
        ref = self._ref(client)
        client._documents[ref.accession_number] = "missing.htm"
        with pytest.raises(PermanentFetchError) as err:
            client.fetch_filing(ref)
        assert err.value.status == 404
        assert client.cache.get(ref) is None

    def test_connection_failure_is_retriable_with_url(self, tmp_path):
        def handler(request):
            raise httpx.ConnectError("refused")

        client = EdgarClient(
            contact="t t@example.com", cache_dir=tmp_path,
            transport=httpx.MockTransport(handler), rate_limit=FAST,
            max_retries=1, sleep=lambda s: None,
        )
        url = "https://www.sec.gov/down.htm"
        with pytest.raises(RetriableFetchError) as err:
            client._get(url)
        assert err.value.url == url

    def test_corrupt_cache_evicted_and_refetched(self, edgar_tree, tmp_path):
        counter = []
        client = make_client(edgar_tree, counter=counter, cache_dir=tmp_path)
        ref = self._ref(client)
        raw = client.fetch_filing(ref)
        doc = client.primary_document(ref)
        doc_path = tmp_path / "raw" / ref.accession_number / doc
        doc_path.write_bytes(b"corrupted bytes")
        fetched = len([u for u in counter if doc in u])
        again = client.fetch_filing(ref)
        assert again.content == raw.content
        assert len([u for u in counter if doc in u]) == fetched + 1

    def test_idempotent_crawl(self, edgar_tree, tmp_path):
        counter = []
        client = make_client(edgar_tree, counter=counter, cache_dir=tmp_path)
        refs = client.list_filings([2024], "10-K", cik_filter=[1111111,
                                                               2222222])
        for ref in refs:
            client.fetch_filing(ref)
        checksums = {
            ref.accession_number: client.cache.checksum(ref.accession_number)
            for ref in refs
        }
        downloads = len(counter)
        for ref in client.list_filings([2024], "10-K",
                                       cik_filter=[1111111, 2222222]):
            client.fetch_filing(ref)
        new_downloads = [u for u in counter[downloads:] if "Archives" in u]
        assert new_downloads == []
        for ref in refs:
            assert client.cache.checksum(ref.accession_number) == \
                checksums[ref.accession_number]
