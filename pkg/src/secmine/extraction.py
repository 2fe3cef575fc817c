"""Keyword compilation, sentence splitting, and corpus scanning.

Keywords are authored as regular-expression fragments. Compilation wraps
them with word boundaries and applies the case policy: multiword phrases
and ordinary words match case-insensitively, short all-caps acronyms (AI,
AGI, NLP) match exact-uppercase so they cannot hit ordinary words, and the
authored pattern ``A.*I`` is read as the dotted acronym "A.I." with an
optional trailing period.
"""

from __future__ import annotations

import bisect
import csv
import logging
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .models import (
    MatchRecord,
    ParsedFiling,
    SentenceRecord,
    item_rank,
    sentence_key,
)

log = logging.getLogger(__name__)

CASE_INSENSITIVE = "insensitive"
CASE_EXACT = "exact"

# Authored form from the default keyword list that means the dotted acronym.
DOTTED_AI_RAW = "A.*I"
_DOTTED_AI_REGEX = r"A\.I\.?"

# An acronym keyword is short and all uppercase; it gets exact-case matching
# by default so "AI" never hits "said" or "air".
_ACRONYM_RE = re.compile(r"^[A-Z]{2,5}$")


class KeywordCompileError(ValueError):
    """A keyword pattern failed to compile."""


def default_case_mode(raw: str) -> str:
    if raw == DOTTED_AI_RAW or _ACRONYM_RE.match(raw):
        return CASE_EXACT
    return CASE_INSENSITIVE


@dataclass(frozen=True)
class KeywordPattern:
    """One keyword as authored in a keyword file."""

    id: str
    raw: str
    case_mode: Optional[str] = None  # None = resolve via default_case_mode
    boundary: bool = True

    def resolved_case_mode(self) -> str:
        if self.case_mode in (CASE_INSENSITIVE, CASE_EXACT):
            return self.case_mode
        if self.case_mode not in (None, ""):
            raise KeywordCompileError(
                f"keyword '{self.id}': unknown case_mode {self.case_mode!r}"
            )
        return default_case_mode(self.raw)


@dataclass(frozen=True)
class CompiledKeyword:
    pattern: KeywordPattern
    regex: re.Pattern


class KeywordSet:
    """An ordered set of compiled keywords, unique by id."""

    def __init__(self, compiled: Sequence[CompiledKeyword]):
        self._compiled = tuple(compiled)
        self._by_id = {c.pattern.id: c for c in compiled}

    def __iter__(self):
        return iter(self._compiled)

    def __len__(self) -> int:
        return len(self._compiled)

    def __contains__(self, keyword_id: str) -> bool:
        return keyword_id in self._by_id

    def get(self, keyword_id: str) -> Optional[CompiledKeyword]:
        return self._by_id.get(keyword_id)

    @property
    def ids(self) -> list[str]:
        return [c.pattern.id for c in self._compiled]


def _compile_one(pat: KeywordPattern) -> CompiledKeyword:
    raw = _DOTTED_AI_REGEX if pat.raw == DOTTED_AI_RAW else pat.raw
    if pat.boundary:
        # \b misbehaves next to a trailing literal "."; explicit guards work
        # for every pattern we accept, including the dotted acronym.
        raw = rf"(?<![A-Za-z0-9_])(?:{raw})(?![A-Za-z0-9_])"
    flags = re.IGNORECASE if pat.resolved_case_mode() == CASE_INSENSITIVE else 0
    try:
        regex = re.compile(raw, flags)
    except re.error as err:
        raise KeywordCompileError(f"keyword '{pat.id}': {err}") from err
    return CompiledKeyword(pattern=pat, regex=regex)


def compile_keywords(patterns: Sequence[KeywordPattern]) -> KeywordSet:
    """Compile keyword patterns, rejecting duplicates and bad regexes."""
    if not patterns:
        raise KeywordCompileError("at least one keyword pattern is required")
    seen: set[str] = set()
    compiled = []
    for pat in patterns:
        if pat.id in seen:
            raise KeywordCompileError(f"duplicate keyword id '{pat.id}'")
        seen.add(pat.id)
        compiled.append(_compile_one(pat))
    return KeywordSet(compiled)


def load_keywords(path: Path | str) -> list[KeywordPattern]:
    """Read a keyword file: CSV with columns id, raw, case_mode, boundary."""
    patterns = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            patterns.append(
                KeywordPattern(
                    id=row["id"].strip(),
                    raw=row["raw"],
                    case_mode=(row.get("case_mode") or "").strip() or None,
                    boundary=(row.get("boundary") or "true").strip().lower()
                    not in ("false", "0", "no"),
                )
            )
    return patterns


def default_keywords() -> list[KeywordPattern]:
    """The AI keyword list the toolkit ships with."""
    ref = resources.files("secmine.data").joinpath("keywords_default.csv")
    with resources.as_file(ref) as path:
        return load_keywords(path)


# --- sentence splitting -----------------------------------------------------

# Tokens whose trailing period does not end a sentence.
ABBREVIATIONS = ("Inc.", "Corp.", "U.S.", "No.", "e.g.", "i.e.", "et al.")

_TERMINATOR_RE = re.compile(r"[.!?]+")
_MAX_PROTECTED_PAREN = 60


def _short_paren_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    stack: list[int] = []
    for i, ch in enumerate(text):
        if ch == "(":
            stack.append(i)
        elif ch == ")" and stack:
            start = stack.pop()
            if i - start + 1 < _MAX_PROTECTED_PAREN:
                spans.append((start, i))
    return spans


def _in_spans(pos: int, spans: list[tuple[int, int]]) -> bool:
    return any(start < pos < end for start, end in spans)


def _ends_with_abbreviation(text: str, end: int) -> bool:
    for abbr in ABBREVIATIONS:
        if text.endswith(abbr, 0, end):
            before = end - len(abbr) - 1
            if before < 0 or not text[before].isalpha():
                return True
    return False


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Sentence spans over normalized text.

    A run of ".", "!" or "?" ends a sentence when followed by whitespace and
    an uppercase letter or digit, unless it closes a known abbreviation or
    sits inside a short parenthetical. Spans exclude inter-sentence
    whitespace and include the terminator.
    """
    if not text or not text.strip():
        return []

    protected = _short_paren_spans(text)
    n = len(text)
    breaks: list[int] = []
    for m in _TERMINATOR_RE.finditer(text):
        end = m.end()
        if end >= n:
            continue
        # require whitespace then an uppercase letter or digit
        j = end
        while j < n and text[j].isspace():
            j += 1
        if j == end or j >= n:
            continue
        if not (text[j].isupper() or text[j].isdigit()):
            continue
        if _in_spans(m.start(), protected):
            continue
        if m.group() == "." and _ends_with_abbreviation(text, end):
            continue
        breaks.append(end)

    spans: list[tuple[int, int]] = []
    start = 0
    for brk in breaks + [n]:
        segment = text[start:brk]
        lead = len(segment) - len(segment.lstrip())
        trail = len(segment) - len(segment.rstrip())
        if segment.strip():
            spans.append((start + lead, brk - trail))
        start = brk
    return spans


# --- scanning ---------------------------------------------------------------

def scan(
    parsed: ParsedFiling,
    keywords: KeywordSet,
    sections: Optional[Iterable[str]] = None,
) -> tuple[list[MatchRecord], list[SentenceRecord]]:
    """Scan selected sections of a parsed filing.

    Returns every keyword occurrence as a MatchRecord plus the filing's
    deduplicated sentences (unique by normalized key, keyword ids unioned,
    first occurrence in document order wins).
    """
    if sections is None:
        targets = list(parsed.sections)
    else:
        wanted = list(sections)
        present = {sec.item_id: sec for sec in parsed.sections}
        targets = []
        for item_id in wanted:
            sec = present.get(item_id)
            if sec is None:
                log.info(
                    "filing %s has no item %s; skipping",
                    parsed.ref.accession_number, item_id,
                )
                continue
            targets.append(sec)
        targets.sort(key=lambda s: s.start)

    matches: list[MatchRecord] = []
    by_key: dict[str, SentenceRecord] = {}
    order: list[str] = []

    for sec in targets:
        sec_text = parsed.text[sec.start:sec.end]
        spans = split_sentences(sec_text)
        if not spans:
            continue
        starts = [s for s, _ in spans]
        sec_matches: list[tuple[int, int, str, int]] = []
        for ck in keywords:
            for m in ck.regex.finditer(sec_text):
                idx = bisect.bisect_right(starts, m.start()) - 1
                if idx < 0 or m.start() >= spans[idx][1]:
                    continue  # match begins in inter-sentence whitespace
                if m.end() > spans[idx][1]:
                    log.debug(
                        "match %r crosses a sentence boundary; skipped", m.group()
                    )
                    continue
                sec_matches.append((m.start(), m.end(), ck.pattern.id, idx))
        sec_matches.sort(key=lambda t: (t[0], t[1], t[2]))

        for mstart, mend, keyword_id, idx in sec_matches:
            s_start, s_end = spans[idx]
            sentence_text = sec_text[s_start:s_end]
            matches.append(
                MatchRecord(
                    filing=parsed.ref,
                    item_id=sec.item_id,
                    sentence_index=idx,
                    keyword_id=keyword_id,
                    char_start=sec.start + mstart,
                    char_end=sec.start + mend,
                    sentence_text=sentence_text,
                )
            )
            key = sentence_key(sentence_text)
            existing = by_key.get(key)
            if existing is None:
                by_key[key] = SentenceRecord(
                    filing=parsed.ref,
                    item_id=sec.item_id,
                    sentence_index=idx,
                    sentence_text=sentence_text,
                    normalized_key=key,
                    keyword_ids=frozenset([keyword_id]),
                )
                order.append(key)
            elif keyword_id not in existing.keyword_ids:
                by_key[key] = SentenceRecord(
                    filing=existing.filing,
                    item_id=existing.item_id,
                    sentence_index=existing.sentence_index,
                    sentence_text=existing.sentence_text,
                    normalized_key=existing.normalized_key,
                    keyword_ids=existing.keyword_ids | {keyword_id},
                )

    matches.sort(
        key=lambda r: (item_rank(r.item_id), r.char_start, r.char_end, r.keyword_id)
    )
    return matches, [by_key[k] for k in order]


def sample_matches(
    matches: Sequence[MatchRecord], n: int, seed: int
) -> list[MatchRecord]:
    """Uniform sample without replacement, reproducible for a given seed."""
    if n > len(matches):
        raise ValueError(f"sample size {n} exceeds population {len(matches)}")
    return random.Random(seed).sample(list(matches), n)
