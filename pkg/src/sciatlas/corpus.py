"""Normalized corpus of works and institutions, period bucketing, production
counting, and a versioned on-disk format.

The corpus file is newline-delimited JSON: a header record carrying the format
version, one record per institution and work, and a trailer with record counts
so truncation is detected on load.
"""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Optional

from .errors import CorpusFormatError
from .taxonomy import DisciplineSpec

CORPUS_FORMAT = "sciatlas-corpus"
CORPUS_VERSION = 1


@dataclass(frozen=True)
class Period:
    label: str
    start_year: int
    end_year: int

    def contains(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year


#: The four canonical analysis periods, in chronological order.
PERIODS: tuple[Period, ...] = (
    Period("1971-1990", 1971, 1990),
    Period("1991-2000", 1991, 2000),
    Period("2001-2010", 2001, 2010),
    Period("2011-2020", 2011, 2020),
)


def assign_period(year: int, periods: Iterable[Period] = PERIODS) -> Optional[Period]:
    """Map a publication year to its period, or None if outside all periods."""
    for period in periods:
        if period.contains(year):
            return period
    return None


@dataclass(frozen=True)
class Work:
    id: str
    year: int
    concepts: frozenset[str]
    institutions: frozenset[str]  # ROR ids, deduplicated


@dataclass(frozen=True)
class Institution:
    ror: str
    openalex_id: str
    name: str
    country: str  # ISO 3166-1 alpha-2
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 < self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")
        if len(self.country) != 2 or not self.country.isalpha() or not self.country.isupper():
            raise ValueError(f"not an ISO 3166-1 alpha-2 code: {self.country!r}")


@dataclass(frozen=True)
class ProductionCount:
    institution: str  # ROR id
    discipline: str
    period: str
    works: int


@dataclass
class Corpus:
    """All works of one discipline plus the institution metadata they touch."""

    discipline: str
    works: list[Work] = field(default_factory=list)
    institutions: dict[str, Institution] = field(default_factory=dict)  # keyed by ROR

    def slice_works(self, spec: DisciplineSpec, period: Period) -> list[Work]:
        """Works tagged with at least one expanded concept and published in
        the period."""
        return [
            w for w in self.works
            if period.contains(w.year) and (w.concepts & spec.expanded_ids)
        ]


def count_production(corpus: Corpus, spec: DisciplineSpec, period: Period) -> list[ProductionCount]:
    """Whole counting: each work credits every distinct affiliated institution
    with one full unit. Institutions with zero works are omitted."""
    tally: dict[str, int] = {}
    for work in corpus.slice_works(spec, period):
        for inst in work.institutions:
            tally[inst] = tally.get(inst, 0) + 1
    return [
        ProductionCount(institution=ror, discipline=spec.name, period=period.label, works=n)
        for ror, n in sorted(tally.items())
    ]


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": CORPUS_FORMAT, "version": CORPUS_VERSION, "discipline": corpus.discipline}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ror in sorted(corpus.institutions):
            rec = {"kind": "institution", **asdict(corpus.institutions[ror])}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for work in sorted(corpus.works, key=lambda w: w.id):
            rec = {
                "kind": "work",
                "id": work.id,
                "year": work.year,
                "concepts": sorted(work.concepts),
                "institutions": sorted(work.institutions),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        trailer = {"kind": "end", "institutions": len(corpus.institutions), "works": len(corpus.works)}
        fh.write(json.dumps(trailer, sort_keys=True) + "\n")


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusFormatError(f"cannot read corpus file {path}: {exc}") from exc
    if not lines:
        raise CorpusFormatError(f"empty corpus file: {path}")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"bad corpus header in {path}: {exc}") from exc
    if header.get("format") != CORPUS_FORMAT:
        raise CorpusFormatError(f"not a corpus file: {path}")
    if header.get("version") != CORPUS_VERSION:
        raise CorpusFormatError(
            f"incompatible corpus version {header.get('version')} (expected {CORPUS_VERSION})"
        )
    corpus = Corpus(discipline=header.get("discipline", ""))
    trailer = None
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"corrupt record at {path}:{lineno}: {exc}") from exc
        kind = rec.get("kind")
        if kind == "institution":
            inst = Institution(
                ror=rec["ror"], openalex_id=rec["openalex_id"], name=rec["name"],
                country=rec["country"], lat=rec["lat"], lon=rec["lon"],
            )
            corpus.institutions[inst.ror] = inst
        elif kind == "work":
            corpus.works.append(Work(
                id=rec["id"], year=rec["year"],
                concepts=frozenset(rec["concepts"]),
                institutions=frozenset(rec["institutions"]),
            ))
        elif kind == "end":
            trailer = rec
        else:
            raise CorpusFormatError(f"unknown record kind {kind!r} at {path}:{lineno}")
    if trailer is None:
        raise CorpusFormatError(f"truncated corpus file (no trailer): {path}")
    if trailer["works"] != len(corpus.works) or trailer["institutions"] != len(corpus.institutions):
        raise CorpusFormatError(f"corpus record counts do not match trailer: {path}")
    return corpus


# ---------------------------------------------------------------------------
# Synthetic desk-scale fixtures

_FIXTURE_COUNTRIES = [
    "US", "CN", "GB", "JP", "DE", "FR", "IT", "ES", "NL", "SE",
    "CH", "KR", "CA", "AU", "BR", "IN",
]

_NAME_HEADS = [
    "University of", "Institute for", "National Laboratory of", "Academy of",
    "Technical University of", "Center for",
]
_NAME_TAILS = [
    "Science", "Technology", "Advanced Studies", "Natural Philosophy",
    "Applied Research", "Quantitative Methods", "Systems Research",
]
_PLACE_NAMES = [
    "Northfield", "Eastport", "Westbrook", "Southgate", "Riverton", "Lakewood",
    "Hillcrest", "Stonebridge", "Clearwater", "Fairview", "Oakdale", "Maplewood",
]


def _fixture_ror(rng: random.Random) -> str:
    # ROR-shaped: 9 chars, leading zero, crockford-ish base32 alphabet.
    alphabet = string.digits + "abcdefghjkmnpqrstvwxyz"
    return "0" + "".join(rng.choice(alphabet) for _ in range(8))


def generate_fixture(
    seed: int,
    n_institutions: int,
    n_works: int,
    discipline: str = "Fixture Discipline",
    concept_ids: Iterable[str] = ("C000000001",),
    year_range: tuple[int, int] = (1971, 2020),
) -> Corpus:
    """Deterministic synthetic corpus for desk-scale testing."""
    if n_institutions < 1 or n_works < 1:
        raise ValueError("fixture sizes must be >= 1")
    rng = random.Random(seed)
    concept_ids = list(concept_ids)

    institutions: dict[str, Institution] = {}
    while len(institutions) < n_institutions:
        ror = _fixture_ror(rng)
        if ror in institutions:
            continue
        place = rng.choice(_PLACE_NAMES)
        name = f"{rng.choice(_NAME_HEADS)} {place} {rng.choice(_NAME_TAILS)}"
        institutions[ror] = Institution(
            ror=ror,
            openalex_id=f"I{rng.randrange(10**7, 10**8)}",
            name=name,
            country=rng.choice(_FIXTURE_COUNTRIES),
            lat=round(rng.uniform(-60.0, 70.0), 4),
            lon=round(rng.uniform(-179.0, 180.0), 4),
        )

    rors = sorted(institutions)
    works: list[Work] = []
    for i in range(n_works):
        n_aff = min(len(rors), 1 + min(rng.randrange(5), rng.randrange(5)))
        affiliated = frozenset(rng.sample(rors, n_aff))
        works.append(Work(
            id=f"W{seed}{i:06d}",
            year=rng.randint(year_range[0], year_range[1]),
            concepts=frozenset(rng.sample(concept_ids, 1 + rng.randrange(len(concept_ids)))),
            institutions=affiliated,
        ))
    return Corpus(discipline=discipline, works=works, institutions=institutions)
