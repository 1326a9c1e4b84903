"""Synthetic snapshot generator: writes an OpenAlex-shaped response cache so
the whole pipeline can run offline, deterministically, with no network.

The generated pages mimic the wire format (cursor pagination, meta.count,
authorships with institution stubs) and include the awkward cases the real
corpus has: works without a publication year, works with no resolvable
institution, and years outside the analysis window.
"""

from __future__ import annotations

import hashlib
import json
import random
from pathlib import Path

from .corpus import Work, generate_fixture
from .openalex import ApiEndpoint, SnapshotCache, build_concepts_filter, build_works_filter
from .corpus import PERIODS

FIXTURE_FETCHED_AT = "2023-08-12T00:00:00Z"

# Two real Table-1 roots give the demo snapshot authentic discipline labels.
DEFAULT_DISCIPLINES = (
    ("Artificial Intelligence", "C154945302"),
    ("Quantum Science", "C62520636"),
)


def _stable_digits(*parts, n: int = 7) -> int:
    # process-independent (unlike hash(), which is salted per run)
    digest = hashlib.sha1("|".join(str(p) for p in parts).encode("utf-8")).hexdigest()
    return int(digest, 16) % 10**n


def _descendants_for(root_id: str, rng: random.Random) -> list[dict]:
    """Three synthetic level>=2 descendants per root, ancestor-linked."""
    records = []
    for i in range(3):
        cid = f"C9{_stable_digits(root_id, i):07d}"
        level = 2 + (i % 2)
        ancestors = [{"id": f"https://openalex.org/{root_id}", "level": 1},
                     {"id": "https://openalex.org/C41008148", "level": 0}]
        records.append({
            "id": f"https://openalex.org/{cid}",
            "display_name": f"Subfield {root_id}-{i}",
            "level": level,
            "ancestors": ancestors,
        })
    return records


def _paginate(results: list[dict], per_page: int) -> list[dict]:
    """Split results into OpenAlex-style page documents with a cursor chain."""
    pages = []
    total = len(results)
    chunks = [results[i:i + per_page] for i in range(0, total, per_page)] or [[]]
    for idx, chunk in enumerate(chunks):
        next_cursor = f"cur-{idx + 1}" if idx + 1 < len(chunks) else None
        pages.append({
            "meta": {"count": total, "next_cursor": next_cursor, "per_page": per_page},
            "results": chunk,
        })
    return pages


def _store_pages(cache: SnapshotCache, endpoint: ApiEndpoint, pages: list[dict]) -> list[str]:
    keys = []
    current = endpoint
    for page in pages:
        key = current.request_key()
        body = json.dumps(page, sort_keys=True).encode("utf-8")
        cache.put(key, body, FIXTURE_FETCHED_AT)
        keys.append(key)
        if page["meta"]["next_cursor"]:
            current = current.with_cursor(page["meta"]["next_cursor"])
    return keys


def write_fixture_snapshot(
    snapshot_dir: str | Path,
    seed: int = 1,
    n_institutions: int = 40,
    n_works: int = 600,
    disciplines=DEFAULT_DISCIPLINES,
    per_page: int = 200,
) -> SnapshotCache:
    rng = random.Random(seed)
    cache = SnapshotCache(snapshot_dir)
    cache.manifest["contact_email"] = "fixtures@example.org"
    cache.manifest["fetch_window"] = {"started": FIXTURE_FETCHED_AT,
                                      "finished": "2023-08-15T00:00:00Z"}

    for name, root_id in disciplines:
        concept_records = _descendants_for(root_id, rng)
        concept_ids = [root_id] + [r["id"].rsplit("/", 1)[1] for r in concept_records]

        concepts_filter = build_concepts_filter(root_id)
        keys = _store_pages(cache, ApiEndpoint("concepts", concepts_filter),
                            _paginate(concept_records, per_page))
        cache.record_query("concepts", concepts_filter, keys, discipline=name)

        corpus = generate_fixture(
            seed=seed + sum(ord(c) for c in root_id),
            n_institutions=n_institutions,
            n_works=n_works,
            discipline=name,
            concept_ids=concept_ids,
            year_range=(1965, 2022),  # includes out-of-window years on purpose
        )

        inst_records = []
        for ror in sorted(corpus.institutions):
            inst = corpus.institutions[ror]
            inst_records.append({
                "id": f"https://openalex.org/{inst.openalex_id}",
                "ror": f"https://ror.org/{inst.ror}",
                "display_name": inst.name,
                "country_code": inst.country,
                "geo": {"latitude": inst.lat, "longitude": inst.lon},
            })
        expanded = sorted(set(concept_ids))
        for period in PERIODS:
            in_period = [w for w in corpus.works if period.contains(w.year)]
            raw_works = [_work_record(w, corpus, rng) for w in in_period]
            # a few year-unknown and affiliation-free records exercise the
            # exclusion bookkeeping downstream
            if in_period:
                for j in range(2):
                    broken = dict(_work_record(in_period[0], corpus, rng))
                    broken["id"] = f"https://openalex.org/W{seed}x{period.start_year}{j}"
                    broken["publication_year"] = None
                    raw_works.append(broken)
                orphan = dict(_work_record(in_period[0], corpus, rng))
                orphan["id"] = f"https://openalex.org/W{seed}o{period.start_year}"
                orphan["authorships"] = []
                raw_works.append(orphan)
            works_filter = build_works_filter(set(expanded),
                                              (period.start_year, period.end_year))
            keys = _store_pages(cache, ApiEndpoint("works", works_filter),
                                _paginate(raw_works, per_page))
            cache.record_query("works", works_filter, keys,
                               discipline=name, period=period.label, chunk=0)

        inst_filter = "ids.openalex:" + "|".join(
            sorted(r["id"].rsplit("/", 1)[1] for r in inst_records))
        keys = _store_pages(cache, ApiEndpoint("institutions", inst_filter),
                            _paginate(inst_records, per_page))
        cache.record_query("institutions", inst_filter, keys, discipline=name)

    cache.save()
    return cache


def _work_record(work: Work, corpus, rng: random.Random) -> dict:
    authorships = []
    for ror in sorted(work.institutions):
        inst = corpus.institutions[ror]
        authorships.append({
            "author": {"id": f"https://openalex.org/A{_stable_digits(work.id, ror, n=8)}"},
            "institutions": [{
                "id": f"https://openalex.org/{inst.openalex_id}",
                "ror": f"https://ror.org/{inst.ror}",
                "display_name": inst.name,
                "country_code": inst.country,
            }],
        })
    return {
        "id": f"https://openalex.org/{work.id}",
        "publication_year": work.year,
        "concepts": [{"id": f"https://openalex.org/{c}", "score": 0.5}
                     for c in sorted(work.concepts)],
        "authorships": authorships,
    }
