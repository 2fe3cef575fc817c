"""Manual risk-labelling workflow: schema, store, sample groups, agreement.

Sentences are annotated independently by two annotators with one or more
(category, subcategory) labels, or flagged as non-risk content (headers,
vague mentions). Conflicts are resolved by a recorded adjudication; all
downstream statistics use the final labels.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .analytics import CorpusIndex
from .models import FilingRef, Scope, SentenceRecord

log = logging.getLogger(__name__)

SOCIETAL = "societal"

# Annotator-column prefix marking an adjudicated final decision on export.
_FINAL_PREFIX = "final:"


class SchemaError(ValueError):
    """The label schema or a label is invalid."""


class AnnotationError(ValueError):
    """An annotation operation violates the workflow rules."""


Label = tuple[str, Optional[str]]  # (category, subcategory)


@dataclass(frozen=True)
class TaxonomyNode:
    name: str
    children: tuple["TaxonomyNode", ...] = ()


@dataclass(frozen=True)
class LabelSchema:
    """The four risk categories, their subcategories, and the societal tree."""

    categories: tuple[str, ...]
    subcategories: dict[str, tuple[str, ...]]
    societal_domains: tuple[TaxonomyNode, ...]

    def __post_init__(self) -> None:
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError("category names must be unique")
        # Generic names like "other/general" may recur across categories;
        # labels are (category, subcategory) pairs, so lookup stays unambiguous.
        for cat, subs in self.subcategories.items():
            if cat not in self.categories:
                raise SchemaError(f"subcategories listed for unknown category {cat!r}")
            if len(set(subs)) != len(subs):
                raise SchemaError(f"duplicate subcategory under {cat!r}")

    def taxonomy_nodes(self) -> list[str]:
        """All societal taxonomy node names, preorder, domains first."""
        names: list[str] = []

        def walk(node: TaxonomyNode) -> None:
            names.append(node.name)
            for child in node.children:
                walk(child)

        for domain in self.societal_domains:
            walk(domain)
        return names

    def validate_label(self, category: str, subcategory: Optional[str]) -> None:
        if category not in self.categories:
            raise SchemaError(f"unknown category {category!r}")
        if subcategory is None:
            return
        if category == SOCIETAL:
            if subcategory not in self.taxonomy_nodes():
                raise SchemaError(
                    f"societal tag {subcategory!r} is not in the loaded taxonomy"
                )
            return
        if subcategory not in self.subcategories.get(category, ()):
            raise SchemaError(
                f"subcategory {subcategory!r} does not belong to {category!r}"
            )


def _node_from_dict(data: dict) -> TaxonomyNode:
    return TaxonomyNode(
        name=data["name"],
        children=tuple(_node_from_dict(c) for c in data.get("subdomains", [])),
    )


def load_taxonomy(path: Path | str) -> tuple[TaxonomyNode, ...]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return tuple(_node_from_dict(d) for d in data["domains"])


def load_schema(
    schema_path: Optional[Path | str] = None,
    taxonomy_path: Optional[Path | str] = None,
) -> LabelSchema:
    """Load the label schema, defaulting to the packaged files."""
    if schema_path is None:
        ref = resources.files("secmine.data").joinpath("label_schema.json")
        with resources.as_file(ref) as p:
            return load_schema(p, taxonomy_path)
    with open(schema_path, encoding="utf-8") as fh:
        data = json.load(fh)
    if taxonomy_path is None:
        taxonomy_path = Path(schema_path).parent / data.get(
            "taxonomy_file", "risk_taxonomy.json"
        )
    domains = load_taxonomy(taxonomy_path)
    subcats = {cat: tuple(subs) for cat, subs in data["subcategories"].items()}
    # societal subcategories are the taxonomy's top-level domains
    subcats[SOCIETAL] = tuple(d.name for d in domains)
    return LabelSchema(
        categories=tuple(data["categories"]),
        subcategories=subcats,
        societal_domains=domains,
    )


@dataclass(frozen=True)
class Annotation:
    """One annotator's decision on one sentence."""

    sentence_key: str
    annotator: str
    labels: frozenset[Label]
    non_risk: bool = False
    timestamp: Optional[datetime] = None

    def __post_init__(self) -> None:
        if self.non_risk and self.labels:
            raise AnnotationError("a non-risk sentence cannot carry labels")


@dataclass(frozen=True)
class Adjudication:
    """A recorded final decision on a conflicted sentence."""

    sentence_key: str
    labels: frozenset[Label]
    non_risk: bool
    adjudicator: str
    timestamp: datetime


@dataclass(frozen=True)
class FinalDecision:
    labels: frozenset[Label]
    non_risk: bool


@dataclass
class FilterResult:
    kept: list[str]
    excluded: list[str]
    pending: list[str]


@dataclass(frozen=True)
class AgreementResult:
    value: float
    n_used: int
    n_skipped: int


@dataclass(frozen=True)
class KappaResult:
    value: Optional[float]
    p_observed: float
    p_expected: float
    n_used: int
    degenerate: bool = False


class AnnotationStore:
    """Single-writer store of annotations and adjudications."""

    def __init__(self, schema: LabelSchema):
        self.schema = schema
        self._annotations: dict[tuple[str, str], Annotation] = {}
        self._adjudications: dict[str, Adjudication] = {}
        self._order: list[str] = []

    # -- writes ----------------------------------------------------------------

    def add(self, annotation: Annotation) -> None:
        for category, subcategory in annotation.labels:
            self.schema.validate_label(category, subcategory)
        key = (annotation.sentence_key, annotation.annotator)
        if annotation.sentence_key not in set(self._order):
            self._order.append(annotation.sentence_key)
        self._annotations[key] = annotation

    def adjudicate(
        self,
        sentence_key: str,
        labels: Iterable[Label],
        non_risk: bool,
        adjudicator: str,
        timestamp: Optional[datetime] = None,
    ) -> Adjudication:
        """Record the final decision for a genuinely conflicted sentence."""
        anns = self.annotations_for(sentence_key)
        if len(anns) < 2:
            raise AnnotationError(
                f"sentence {sentence_key!r} is not fully double-annotated"
            )
        if not self._conflicted(anns):
            raise AnnotationError(
                f"annotations for {sentence_key!r} agree; nothing to adjudicate"
            )
        labels = frozenset(labels)
        if non_risk and labels:
            raise AnnotationError("a non-risk decision cannot carry labels")
        for category, subcategory in labels:
            self.schema.validate_label(category, subcategory)
        adj = Adjudication(
            sentence_key=sentence_key,
            labels=labels,
            non_risk=non_risk,
            adjudicator=adjudicator,
            timestamp=timestamp or datetime.now(timezone.utc),
        )
        self._adjudications[sentence_key] = adj
        return adj

    # -- reads -----------------------------------------------------------------

    def sentence_keys(self) -> list[str]:
        return list(self._order)

    def annotators(self) -> list[str]:
        return sorted({ann for (_, ann) in self._annotations})

    def annotations_for(self, sentence_key: str) -> list[Annotation]:
        return [
            a for (skey, _), a in sorted(self._annotations.items())
            if skey == sentence_key
        ]

    def adjudication_for(self, sentence_key: str) -> Optional[Adjudication]:
        return self._adjudications.get(sentence_key)

    @staticmethod
    def _conflicted(anns: Sequence[Annotation]) -> bool:
        first = anns[0]
        return any(
            a.labels != first.labels or a.non_risk != first.non_risk
            for a in anns[1:]
        )

    def final_decision(self, sentence_key: str) -> Optional[FinalDecision]:
        """Final labels for a sentence, or None while review is pending."""
        adj = self._adjudications.get(sentence_key)
        if adj is not None:
            return FinalDecision(labels=adj.labels, non_risk=adj.non_risk)
        anns = self.annotations_for(sentence_key)
        if len(anns) < 2 or self._conflicted(anns):
            return None
        return FinalDecision(labels=anns[0].labels, non_risk=anns[0].non_risk)

    def filter_non_risk(self, sentence_keys: Iterable[str]) -> FilterResult:
        """Partition sentences into kept / excluded-as-non-risk / pending."""
        result = FilterResult(kept=[], excluded=[], pending=[])
        for skey in sentence_keys:
            decision = self.final_decision(skey)
            if decision is None:
                result.pending.append(skey)
            elif decision.non_risk:
                result.excluded.append(skey)
            else:
                result.kept.append(skey)
        if result.pending:
            log.warning("%d sentence(s) await review or adjudication",
                        len(result.pending))
        return result

    # -- agreement ---------------------------------------------------------------

    def _presence_pairs(self, category: str) -> tuple[list[tuple[bool, bool]], int]:
        """Per-sentence (annotator1, annotator2) category presence."""
        annotators = self.annotators()
        if len(annotators) != 2:
            raise AnnotationError(
                f"agreement needs exactly two annotators, found {len(annotators)}"
            )
        a1, a2 = annotators
        pairs = []
        skipped = 0
        for skey in self._order:
            first = self._annotations.get((skey, a1))
            second = self._annotations.get((skey, a2))
            if first is None or second is None:
                skipped += 1
                continue
            pairs.append((
                any(cat == category for cat, _ in first.labels),
                any(cat == category for cat, _ in second.labels),
            ))
        if skipped:
            log.warning(
                "%d sentence(s) lack a second annotation and were excluded",
                skipped,
            )
        return pairs, skipped

    def percent_agreement(self, category: str) -> AgreementResult:
        """Share of double-annotated sentences where both agree on presence."""
        pairs, skipped = self._presence_pairs(category)
        if not pairs:
            raise AnnotationError("no fully double-annotated sentences")
        agree = sum(1 for p1, p2 in pairs if p1 == p2)
        return AgreementResult(
            value=float(Fraction(agree, len(pairs))),
            n_used=len(pairs),
            n_skipped=skipped,
        )

    def cohens_kappa(self, category: str) -> KappaResult:
        """Chance-corrected agreement on category presence (binary)."""
        pairs, _ = self._presence_pairs(category)
        if not pairs:
            raise AnnotationError("no fully double-annotated sentences")
        n = len(pairs)
        both = sum(1 for p1, p2 in pairs if p1 and p2)
        only1 = sum(1 for p1, p2 in pairs if p1 and not p2)
        only2 = sum(1 for p1, p2 in pairs if p2 and not p1)
        neither = n - both - only1 - only2

        p_o = Fraction(both + neither, n)
        p1_yes = Fraction(both + only1, n)
        p2_yes = Fraction(both + only2, n)
        p_e = p1_yes * p2_yes + (1 - p1_yes) * (1 - p2_yes)
        if p_e == 1:
            return KappaResult(
                value=None, p_observed=float(p_o), p_expected=1.0,
                n_used=n, degenerate=True,
            )
        kappa = (p_o - p_e) / (1 - p_e)
        return KappaResult(
            value=float(kappa), p_observed=float(p_o), p_expected=float(p_e),
            n_used=n,
        )

    # -- group statistics ---------------------------------------------------------

    def group_category_stats(
        self,
        groups: Iterable["SampleGroup"],
        sentences: Iterable[SentenceRecord],
    ) -> dict[str, dict[str, "CategoryStat"]]:
        """Per group and category: company mention share and mean sentences."""
        by_key: dict[str, list[SentenceRecord]] = {}
        for rec in sentences:
            by_key.setdefault(rec.normalized_key, []).append(rec)

        out: dict[str, dict[str, CategoryStat]] = {}
        for group in groups:
            if not group.members:
                raise AnnotationError(f"sample group {group.name!r} is empty")
            member_ciks = {ref.cik for ref in group.members}
            # labelled sentence counts per company and category
            per_company: dict[str, dict[int, int]] = {
                cat: {cik: 0 for cik in member_ciks}
                for cat in self.schema.categories
            }
            for skey in self._order:
                decision = self.final_decision(skey)
                if decision is None or decision.non_risk:
                    continue
                categories = {cat for cat, _ in decision.labels}
                for rec in by_key.get(skey, []):
                    if rec.filing.cik not in member_ciks:
                        continue
                    for cat in categories:
                        per_company[cat][rec.filing.cik] += 1
            stats = {}
            n_members = len(group.members)
            for cat in self.schema.categories:
                counts = per_company[cat]
                mentioning = sum(1 for c in counts.values() if c > 0)
                stats[cat] = CategoryStat(
                    pct_companies=float(Fraction(mentioning, n_members)),
                    avg_sentences=sum(counts.values()) / n_members,
                )
            out[group.name] = stats
        return out

    def subdomain_distribution(self) -> dict[str, int]:
        """Final societal label counts per taxonomy node, zero nodes included."""
        counts = {name: 0 for name in self.schema.taxonomy_nodes()}
        for skey in self._order:
            decision = self.final_decision(skey)
            if decision is None or decision.non_risk:
                continue
            for category, subcategory in decision.labels:
                if category == SOCIETAL and subcategory in counts:
                    counts[subcategory] += 1
        return counts

    # -- persistence ----------------------------------------------------------------

    EXPORT_COLUMNS = (
        "sentence_key", "annotator", "category", "subcategory",
        "non_risk", "timestamp",
    )

    def export_csv(self, path: Path | str) -> None:
        """Write all annotations and adjudications as tabular rows.

        Adjudications use the annotator column with a "final:" prefix on the
        adjudicator's id, so the one schema round-trips the whole store.
        """
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.EXPORT_COLUMNS)
            for (skey, annotator), ann in sorted(self._annotations.items()):
                writer.writerows(
                    _annotation_rows(skey, annotator, ann.labels, ann.non_risk,
                                     ann.timestamp)
                )
            for skey in sorted(self._adjudications):
                adj = self._adjudications[skey]
                writer.writerows(
                    _annotation_rows(skey, _FINAL_PREFIX + adj.adjudicator,
                                     adj.labels, adj.non_risk, adj.timestamp)
                )

    @classmethod
    def import_csv(cls, path: Path | str, schema: LabelSchema) -> "AnnotationStore":
        store = cls(schema)
        grouped: dict[tuple[str, str], list[dict]] = {}
        order: list[tuple[str, str]] = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                key = (row["sentence_key"], row["annotator"])
                if key not in grouped:
                    grouped[key] = []
                    order.append(key)
                grouped[key].append(row)
        finals = []
        for skey, annotator in order:
            rows = grouped[(skey, annotator)]
            labels = frozenset(
                (r["category"], r["subcategory"] or None)
                for r in rows
                if r["category"]
            )
            non_risk = rows[0]["non_risk"].lower() == "true"
            ts = (
                datetime.fromisoformat(rows[0]["timestamp"])
                if rows[0]["timestamp"] else None
            )
            if annotator.startswith(_FINAL_PREFIX):
                finals.append((skey, labels, non_risk,
                               annotator[len(_FINAL_PREFIX):], ts))
            else:
                store.add(Annotation(
                    sentence_key=skey, annotator=annotator, labels=labels,
                    non_risk=non_risk, timestamp=ts,
                ))
        for skey, labels, non_risk, who, ts in finals:
            store.adjudicate(skey, labels, non_risk, who, ts)
        return store


def _annotation_rows(skey, annotator, labels, non_risk, timestamp):
    ts = timestamp.isoformat() if timestamp else ""
    if not labels:
        return [[skey, annotator, "", "", str(non_risk).lower(), ts]]
    return [
        [skey, annotator, category, subcategory or "",
         str(non_risk).lower(), ts]
        for category, subcategory in sorted(labels, key=lambda l: (l[0], l[1] or ""))
    ]


@dataclass(frozen=True)
class CategoryStat:
    pct_companies: float
    avg_sentences: float


# --- sample groups --------------------------------------------------------------

RANDOM_GROUP = "random20"
TOP_TECH_GROUP = "top_tech10"
RISK_ONLY_GROUP = "risk_only20"


@dataclass(frozen=True)
class SampleGroup:
    name: str
    members: tuple[FilingRef, ...]
    selection_rule: str


class SampleGroupError(ValueError):
    """A sample group cannot be built from the available pool."""


def load_top_tech_names(path: Optional[Path | str] = None) -> list[str]:
    if path is None:
        ref = resources.files("secmine.data").joinpath("top_tech_companies.json")
        with resources.as_file(ref) as p:
            return load_top_tech_names(p)
    with open(path, encoding="utf-8") as fh:
        return list(json.load(fh)["companies"])


def build_sample_groups(
    index: CorpusIndex,
    year: int,
    seed: int,
    top_tech_names: Optional[Sequence[str]] = None,
    random_size: int = 20,
    top_tech_size: int = 10,
    risk_only_size: int = 20,
) -> dict[str, SampleGroup]:
    """Construct the three annotation sample groups for one reporting year."""
    if top_tech_names is None:
        top_tech_names = load_top_tech_names()
    filings = index.filings_for_year(year)
    if not filings:
        raise SampleGroupError(f"no filings for reporting year {year}")

    rng = random.Random(seed)

    mentioning = [ref for ref in filings if index.mentions(ref, Scope.ALL)]
    if len(mentioning) < random_size:
        raise SampleGroupError(
            f"random group needs {random_size} AI-mentioning filers, "
            f"pool={len(mentioning)}"
        )
    random_members = tuple(rng.sample(mentioning, random_size))

    by_name = {ref.company_name.lower(): ref for ref in filings}
    tech_members = []
    missing = []
    for name in top_tech_names[:top_tech_size]:
        ref = by_name.get(name.lower())
        if ref is None:
            missing.append(name)
        else:
            tech_members.append(ref)
    if missing:
        raise SampleGroupError(
            f"top-tech companies not found in {year} corpus: {', '.join(missing)}"
        )
    if len(tech_members) < top_tech_size:
        raise SampleGroupError(
            f"top-tech group needs {top_tech_size} companies, "
            f"pool={len(tech_members)}"
        )

    prior_risk_ciks = {
        ref.cik
        for prior_year in index.years
        if prior_year < year
        for ref in index.filings_for_year(prior_year)
        if index.mentions(ref, Scope.RISK)
    }
    risk_only_pool = [
        ref
        for ref in filings
        if index.mentions(ref, Scope.RISK)
        and not index.mentions(ref, Scope.BUSINESS)
        and ref.cik not in prior_risk_ciks
    ]
    if len(risk_only_pool) < risk_only_size:
        raise SampleGroupError(
            f"risk-only group needs {risk_only_size} first-time filers, "
            f"pool={len(risk_only_pool)}"
        )
    risk_only_members = tuple(rng.sample(risk_only_pool, risk_only_size))

    return {
        RANDOM_GROUP: SampleGroup(
            name=RANDOM_GROUP,
            members=random_members,
            selection_rule=(
                f"uniform sample of {random_size} AI-mentioning filers "
                f"in {year} (seed={seed})"
            ),
        ),
        TOP_TECH_GROUP: SampleGroup(
            name=TOP_TECH_GROUP,
            members=tuple(tech_members),
            selection_rule=f"configured top-tech list, {year} filings",
        ),
        RISK_ONLY_GROUP: SampleGroup(
            name=RISK_ONLY_GROUP,
            members=risk_only_members,
            selection_rule=(
                f"uniform sample of {risk_only_size} filers first mentioning "
                f"AI risk in {year} with no business mentions (seed={seed})"
            ),
        ),
    }
