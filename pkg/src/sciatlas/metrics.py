"""Collaboration analytics: production rankings, bilateral pair counts, the
five-party interregional matrix, and the Jaccard-style collaboration distance
matrix that feeds clustering.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Corpus, Institution, Period, ProductionCount, Work
from .errors import UndefinedDistanceError
from .taxonomy import DisciplineSpec

log = logging.getLogger(__name__)

#: Fixed party order of the interregional matrix.
PARTIES = ("US", "CN", "EU27", "GB", "JP")

#: Current 27-member EU roster (the UK is its own party, never EU27).
EU27_DEFAULT = frozenset({
    "AT", "BE", "BG", "HR", "CY", "CZ", "DK", "EE", "FI", "FR",
    "DE", "GR", "HU", "IE", "IT", "LV", "LT", "LU", "MT", "NL",
    "PL", "PT", "RO", "SK", "SI", "ES", "SE",
})


@dataclass(frozen=True)
class RankedEntry:
    rank: int
    ror: str
    country: str
    name: str
    works: int


@dataclass
class RankedInstitutions:
    discipline: str
    period: str
    entries: list[RankedEntry] = field(default_factory=list)

    def rors(self) -> list[str]:
        return [e.ror for e in self.entries]

    def top(self, k: int) -> "RankedInstitutions":
        return RankedInstitutions(self.discipline, self.period, self.entries[:k])


def top_k(
    counts: Sequence[ProductionCount],
    k: int,
    institutions: dict[str, Institution],
) -> RankedInstitutions:
    """Rank by works descending; ties ordered alphabetically by country code
    then organisation name. Tied counts share a rank (competition ranking) --
    distinct positions among ties carry no significance."""
    discipline = counts[0].discipline if counts else ""
    period = counts[0].period if counts else ""

    def sort_key(c: ProductionCount):
        inst = institutions.get(c.institution)
        country = inst.country if inst else "ZZ"
        name = inst.name if inst else c.institution
        return (-c.works, country, name, c.institution)

    ordered = sorted(counts, key=sort_key)[:k]
    entries: list[RankedEntry] = []
    rank = 0
    prev_works: Optional[int] = None
    for pos, c in enumerate(ordered, start=1):
        if c.works != prev_works:
            rank = pos
            prev_works = c.works
        inst = institutions.get(c.institution)
        entries.append(RankedEntry(
            rank=rank,
            ror=c.institution,
            country=inst.country if inst else "",
            name=inst.name if inst else c.institution,
            works=c.works,
        ))
    return RankedInstitutions(discipline=discipline, period=period, entries=entries)


@dataclass(frozen=True)
class PairCount:
    a: str  # ROR, a < b lexicographically
    b: str
    works: int
    discipline: str = ""
    period: str = ""

    def __post_init__(self):
        if self.a >= self.b:
            raise ValueError(f"pair not in canonical order: {self.a!r} >= {self.b!r}")


def count_pairs(
    corpus: Corpus,
    spec: DisciplineSpec,
    period: Period,
    scope: set[str] | frozenset[str],
) -> list[PairCount]:
    """Each work contributes one unit to every unordered pair of distinct
    scope institutions in its (deduplicated) institution set. Zero-count pairs
    are omitted."""
    tally: dict[tuple[str, str], int] = {}
    for work in corpus.slice_works(spec, period):
        members = sorted(work.institutions & scope)
        for a, b in itertools.combinations(members, 2):
            tally[(a, b)] = tally.get((a, b), 0) + 1
    return [
        PairCount(a=a, b=b, works=n, discipline=spec.name, period=period.label)
        for (a, b), n in sorted(tally.items())
    ]


def filter_display_pairs(pairs: Iterable[PairCount], min_works: int = 5) -> list[PairCount]:
    """Keep only pairs with at least ``min_works`` coauthored works (the map
    display threshold)."""
    if min_works < 0:
        raise ValueError("min_works must be >= 0")
    return [p for p in pairs if p.works >= min_works]


def map_party(institution: Institution, eu27: frozenset[str] = EU27_DEFAULT) -> Optional[str]:
    """Map an institution's country to one of the five parties, or None."""
    cc = institution.country
    if cc in ("US", "CN", "GB", "JP"):
        return cc
    if cc in eu27:
        return "EU27"
    return None


@dataclass
class PartyMatrix:
    """Half matrix (diagonal included) over the five fixed parties: 15 cells
    of non-negative counts, keyed by unordered party pair."""

    discipline: str = ""
    period: str = ""
    cells: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for p, q in itertools.combinations_with_replacement(PARTIES, 2):
            self.cells.setdefault((p, q), 0)

    def get(self, p: str, q: str) -> int:
        i, j = PARTIES.index(p), PARTIES.index(q)
        if i > j:
            p, q = q, p
        return self.cells[(p, q)]

    def add(self, p: str, q: str, n: int = 1) -> None:
        i, j = PARTIES.index(p), PARTIES.index(q)
        if i > j:
            p, q = q, p
        self.cells[(p, q)] += n

    def total(self) -> int:
        return sum(self.cells.values())


def build_party_matrix(
    display_pairs: Iterable[PairCount],
    institutions: dict[str, Institution],
    eu27: frozenset[str] = EU27_DEFAULT,
    weight: str = "pairs",
    discipline: str = "",
    period: str = "",
) -> PartyMatrix:
    """Aggregate display pairs into the five-party half matrix.

    ``weight="pairs"`` counts bilateral relationships (one per display pair);
    ``weight="works"`` sums the pairs' coauthored-work counts instead. Pairs
    with any endpoint outside the five parties are dropped.
    """
    if weight not in ("pairs", "works"):
        raise ValueError(f"unknown party-matrix weight: {weight}")
    matrix = PartyMatrix(discipline=discipline, period=period)
    for pair in display_pairs:
        inst_a = institutions.get(pair.a)
        inst_b = institutions.get(pair.b)
        if inst_a is None or inst_b is None:
            continue
        pa = map_party(inst_a, eu27)
        pb = map_party(inst_b, eu27)
        if pa is None or pb is None:
            continue
        matrix.add(pa, pb, pair.works if weight == "works" else 1)
    return matrix


def distance(works_x: set[str] | frozenset[str], works_y: set[str] | frozenset[str]) -> float:
    """Collaboration distance between two institutions: 1 minus the ratio of
    works involving both to works involving at least one."""
    union = len(works_x | works_y)
    if union == 0:
        raise UndefinedDistanceError("both work sets are empty")
    inter = len(works_x & works_y)
    return 1.0 - inter / union


@dataclass
class DistanceMatrix:
    labels: list[str]  # ROR ids, fixed order
    d: np.ndarray  # symmetric, zero diagonal, values in [0, 1]

    def validate(self) -> None:
        n = len(self.labels)
        assert self.d.shape == (n, n)
        assert np.allclose(np.diag(self.d), 0.0)
        assert np.allclose(self.d, self.d.T)
        assert np.all((self.d >= 0.0) & (self.d <= 1.0))


def institution_work_sets(works: Iterable[Work], scope: Iterable[str]) -> dict[str, set[str]]:
    """Work-id set per scoped institution within one (discipline, period)
    slice of the corpus."""
    sets: dict[str, set[str]] = {ror: set() for ror in scope}
    for work in works:
        for inst in work.institutions:
            if inst in sets:
                sets[inst].add(work.id)
    return sets


def build_distance_matrix(
    corpus: Corpus,
    spec: DisciplineSpec,
    period: Period,
    top: RankedInstitutions,
) -> DistanceMatrix:
    """Pairwise collaboration distances over the ranked institutions, using
    each institution's work set within the (discipline, period) slice.
    Institutions with zero works in the slice cannot form a distance and are
    excluded with a warning."""
    if not top.entries:
        raise ValueError("ranking is empty")
    works = corpus.slice_works(spec, period)
    sets = institution_work_sets(works, top.rors())
    labels = []
    for ror in top.rors():
        if sets[ror]:
            labels.append(ror)
        else:
            log.warning("excluding %s from distance matrix: no works in %s/%s",
                        ror, spec.name, period.label)
    n = len(labels)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = distance(sets[labels[i]], sets[labels[j]])
    return DistanceMatrix(labels=labels, d=d)


# ---------------------------------------------------------------------------
# Export helpers (CSV / JSON with documented column schemas)

def ranking_to_json(ranked: RankedInstitutions, institutions: dict[str, Institution]) -> dict:
    return {
        "discipline": ranked.discipline,
        "period": ranked.period,
        "columns": ["rank", "ror", "country", "name", "works", "lat", "lon"],
        "entries": [
            {
                "rank": e.rank, "ror": e.ror, "country": e.country, "name": e.name,
                "works": e.works,
                "lat": institutions[e.ror].lat if e.ror in institutions else None,
                "lon": institutions[e.ror].lon if e.ror in institutions else None,
            }
            for e in ranked.entries
        ],
    }


def ranking_to_csv(ranked: RankedInstitutions, provenance: str = "") -> str:
    buf = io.StringIO()
    if provenance:
        buf.write(f"# {provenance}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "ror", "country", "name", "works"])
    for e in ranked.entries:
        writer.writerow([e.rank, e.ror, e.country, e.name, e.works])
    return buf.getvalue()


def pairs_to_json(pairs: list[PairCount], discipline: str, period: str) -> dict:
    return {
        "discipline": discipline,
        "period": period,
        "columns": ["a", "b", "works"],
        "pairs": [{"a": p.a, "b": p.b, "works": p.works} for p in pairs],
    }


def pairs_from_json(doc: dict) -> list[PairCount]:
    return [
        PairCount(a=p["a"], b=p["b"], works=p["works"],
                  discipline=doc.get("discipline", ""), period=doc.get("period", ""))
        for p in doc["pairs"]
    ]


def party_matrix_to_json(matrix: PartyMatrix) -> dict:
    return {
        "discipline": matrix.discipline,
        "period": matrix.period,
        "parties": list(PARTIES),
        "cells": {f"{p}|{q}": n for (p, q), n in sorted(matrix.cells.items())},
    }


def party_matrix_from_json(doc: dict) -> PartyMatrix:
    matrix = PartyMatrix(discipline=doc.get("discipline", ""), period=doc.get("period", ""))
    for key, n in doc["cells"].items():
        p, q = key.split("|")
        matrix.cells[(p, q)] = n
    return matrix


def distance_matrix_to_json(matrix: DistanceMatrix) -> dict:
    return {
        "labels": matrix.labels,
        "matrix": [[float(v) for v in row] for row in matrix.d],
    }


def distance_matrix_from_json(doc: dict) -> DistanceMatrix:
    return DistanceMatrix(labels=list(doc["labels"]), d=np.array(doc["matrix"], dtype=float))
