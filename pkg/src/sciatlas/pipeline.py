"""Pipeline stages: fetch -> build -> analyze -> render.

Stages communicate only through files (snapshot, corpus, analytics, out),
so each stage can be re-run in isolation and the whole offline pipeline is
byte-reproducible. The run manifest lives next to the output directories,
not inside ``out/``, so timing noise never touches the rendered artifacts.
"""

from __future__ import annotations

import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import clustering, figures, metrics, openalex
from .config import AtlasConfig
from .corpus import Corpus, Period, count_production, load_corpus, save_corpus
from .errors import ConfigError, DataError
from .metrics import RankedInstitutions
from .openalex import ApiEndpoint, RateLimiter, SnapshotCache, fetch_pages
from .taxonomy import Concept, DisciplineSpec, expand_discipline

log = logging.getLogger("sciatlas")

INSTITUTION_ID_CHUNK = 50
CONCEPT_FILTER_CHUNK = 40


class WarningCounter(logging.Handler):
    """Collects pipeline warnings so the run manifest can report them."""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


def _family_periods(kind: str, periods: list[Period]) -> list[Period]:
    # world map and dendrogram span all four periods; the top-30 map, the
    # party matrix and the top-100 tables start at 1991
    if kind in ("world_map", "dendrogram"):
        return periods
    return [p for p in periods if p.start_year >= 1991]


# ---------------------------------------------------------------------------
# fetch

def cmd_fetch(config: AtlasConfig, http_get=None) -> SnapshotCache:
    """Populate the snapshot for every configured (discipline, period):
    concept descendants, works, and institution metadata. Already-cached
    pages are never re-requested, so interrupted runs resume cheaply."""
    if config.mode != "online":
        raise ConfigError("fetch requires online mode")
    if not config.contact_email:
        raise ConfigError("contact_email (or OPENALEX_MAILTO) must be set before fetching")
    cache = SnapshotCache(config.snapshot_dir)
    limiter = RateLimiter(config.requests_per_second)
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    cache.manifest["contact_email"] = config.contact_email
    cache.manifest["fetch_window"].setdefault("started", started)

    def run_query(endpoint: ApiEndpoint) -> list[str]:
        keys = []
        cursor_endpoint = endpoint
        for page in fetch_pages(cursor_endpoint, cache, "online", http_get=http_get,
                                limiter=limiter, mailto=config.contact_email):
            keys.append(cursor_endpoint.request_key())
            if page.next_cursor:
                cursor_endpoint = cursor_endpoint.with_cursor(page.next_cursor)
        return keys

    for name, root_id in config.selected_disciplines():
        concept_filter = openalex.build_concepts_filter(root_id)
        endpoint = ApiEndpoint("concepts", concept_filter)
        keys = run_query(endpoint)
        cache.record_query("concepts", concept_filter, keys, discipline=name)
        cache.save()

        taxonomy = _read_concepts(cache, name)
        spec = expand_discipline(Concept(id=root_id, level=1, display_name=name), taxonomy, name)

        inst_openalex_ids: set[str] = set()
        for period in config.selected_periods():
            ids = sorted(spec.expanded_ids)
            for start in range(0, len(ids), CONCEPT_FILTER_CHUNK):
                chunk = ids[start:start + CONCEPT_FILTER_CHUNK]
                works_filter = openalex.build_works_filter(
                    set(chunk), (period.start_year, period.end_year))
                endpoint = ApiEndpoint("works", works_filter)
                keys = run_query(endpoint)
                cache.record_query("works", works_filter, keys,
                                   discipline=name, period=period.label,
                                   chunk=start // CONCEPT_FILTER_CHUNK)
                cache.save()
                for key in keys:
                    page = openalex.RawPage.from_bytes(cache.get(key))
                    for raw in page.results:
                        for authorship in raw.get("authorships", []):
                            for inst in authorship.get("institutions", []):
                                if inst.get("id"):
                                    inst_openalex_ids.add(
                                        openalex.normalize_openalex_id(inst["id"]))

        ids = sorted(inst_openalex_ids)
        inst_keys: list[str] = []
        inst_filters: list[str] = []
        for start in range(0, len(ids), INSTITUTION_ID_CHUNK):
            chunk = ids[start:start + INSTITUTION_ID_CHUNK]
            inst_filter = "ids.openalex:" + "|".join(chunk)
            endpoint = ApiEndpoint("institutions", inst_filter)
            inst_keys.extend(run_query(endpoint))
            inst_filters.append(inst_filter)
        cache.record_query("institutions", ";".join(inst_filters), inst_keys, discipline=name)
        cache.save()

    cache.manifest["fetch_window"]["finished"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    cache.save()
    return cache


def _read_concepts(cache: SnapshotCache, discipline: str) -> list[Concept]:
    query = cache.find_query("concepts", discipline=discipline)
    if query is None:
        raise DataError(f"snapshot has no concepts query for discipline {discipline!r}")
    concepts: list[Concept] = []
    for key in query["request_keys"]:
        page = openalex.RawPage.from_bytes(cache.get(key))
        concepts.extend(openalex.parse_concept(raw) for raw in page.results)
    return concepts


def _read_institutions(cache: SnapshotCache, discipline: str):
    query = cache.find_query("institutions", discipline=discipline)
    institutions = {}
    openalex_to_ror = {}
    if query is None:
        return institutions, openalex_to_ror
    for key in query["request_keys"]:
        page = openalex.RawPage.from_bytes(cache.get(key))
        for raw in page.results:
            inst = openalex.parse_institution(raw)
            if inst is None:
                log.warning("institution record skipped (missing ror/geo/country): %s",
                            raw.get("id"))
                continue
            institutions[inst.ror] = inst
            if inst.openalex_id:
                openalex_to_ror[inst.openalex_id] = inst.ror
    return institutions, openalex_to_ror


# ---------------------------------------------------------------------------
# build

@dataclass
class BuildStats:
    discipline: str
    works: int = 0
    duplicates: int = 0
    year_unknown: int = 0
    out_of_range: int = 0
    institutions: int = 0
    unresolved_institution_ids: int = 0


def cmd_build(config: AtlasConfig) -> list[BuildStats]:
    """Parse the snapshot into one analysis-ready corpus per discipline."""
    cache = SnapshotCache(config.snapshot_dir)
    if not (Path(config.snapshot_dir) / SnapshotCache.MANIFEST).exists():
        raise DataError(f"no snapshot manifest under {config.snapshot_dir}")
    corpus_dir = Path(config.corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    all_stats = []

    for name, root_id in config.selected_disciplines():
        taxonomy = _read_concepts(cache, name)
        spec = expand_discipline(Concept(id=root_id, level=1, display_name=name), taxonomy, name)
        institutions, openalex_to_ror = _read_institutions(cache, name)

        stats = BuildStats(discipline=name)
        corpus = Corpus(discipline=name)
        seen_ids: set[str] = set()
        unresolved: set[str] = set()
        used_rors: set[str] = set()
        for period in config.selected_periods():
            for query in cache.manifest["queries"]:
                if not (query["kind"] == "works" and query.get("discipline") == name
                        and query.get("period") == period.label):
                    continue
                for key in query["request_keys"]:
                    page = openalex.RawPage.from_bytes(cache.get(key))
                    for raw in page.results:
                        parsed = openalex.parse_work(raw, config.concept_score_min)
                        if parsed.id in seen_ids:
                            stats.duplicates += 1
                            continue
                        seen_ids.add(parsed.id)
                        if parsed.year is None:
                            stats.year_unknown += 1
                            continue
                        if parsed.year < 1971 or parsed.year > 2020:
                            stats.out_of_range += 1
                            continue
                        rors = set()
                        for inst_id in parsed.institutions:
                            ror = openalex_to_ror.get(inst_id, inst_id)
                            if ror in institutions:
                                rors.add(ror)
                            else:
                                unresolved.add(inst_id)
                        used_rors.update(rors)
                        corpus.works.append(openalex_work_to_corpus(parsed, rors))
                        stats.works += 1
        corpus.institutions = {r: institutions[r] for r in sorted(used_rors)}
        stats.institutions = len(corpus.institutions)
        stats.unresolved_institution_ids = len(unresolved)
        if unresolved:
            log.warning("%s: %d institution ids had no usable metadata and were dropped",
                        name, len(unresolved))
        if stats.works == 0:
            log.warning("%s: empty corpus built from snapshot", name)

        slug = slugify(name)
        save_corpus(corpus, corpus_dir / f"{slug}.jsonl")
        spec_doc = {"name": spec.name, "root_id": spec.root_id,
                    "expanded_ids": sorted(spec.expanded_ids)}
        (corpus_dir / f"{slug}.spec.json").write_text(
            json.dumps(spec_doc, indent=2, sort_keys=True) + "\n", "utf-8")
        all_stats.append(stats)
    return all_stats


def openalex_work_to_corpus(parsed: openalex.ParsedWork, rors: set[str]):
    from .corpus import Work

    return Work(id=parsed.id, year=parsed.year, concepts=parsed.concepts,
                institutions=frozenset(rors))


# ---------------------------------------------------------------------------
# analyze

def _load_spec(corpus_dir: Path, slug: str) -> DisciplineSpec:
    path = corpus_dir / f"{slug}.spec.json"
    if not path.exists():
        raise DataError(f"missing discipline spec file: {path}")
    doc = json.loads(path.read_text("utf-8"))
    return DisciplineSpec(name=doc["name"], root_id=doc["root_id"],
                          expanded_ids=frozenset(doc["expanded_ids"]))


def _snapshot_provenance(config: AtlasConfig, discipline: str, period: str) -> str:
    manifest_path = Path(config.snapshot_dir) / SnapshotCache.MANIFEST
    if not manifest_path.exists():
        return ""
    manifest = json.loads(manifest_path.read_text("utf-8"))
    window = manifest.get("fetch_window", {})
    filters = [q["filter"] for q in manifest.get("queries", [])
               if q["kind"] == "works" and q.get("discipline") == discipline
               and q.get("period") == period]
    head = filters[0] if filters else ""
    more = f" (+{len(filters) - 1} more)" if len(filters) > 1 else ""
    return (f"snapshot {window.get('started', '?')}..{window.get('finished', '?')}; "
            f"filter {head}{more}")


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")


def _analyze_cell(config: AtlasConfig, corpus: Corpus, spec: DisciplineSpec,
                  period: Period, cell_dir: Path) -> None:
    th = config.thresholds
    counts = count_production(corpus, spec, period)
    ranked_full = metrics.top_k(counts, max(th.map_bubbles, th.table), corpus.institutions)
    rankings = {
        th.map_bubbles: ranked_full.top(th.map_bubbles),
        th.link_institutions: ranked_full.top(th.link_institutions),
        th.top30: ranked_full.top(th.top30),
        th.table: ranked_full.top(th.table),
    }
    for k, ranked in sorted(rankings.items()):
        _write_json(cell_dir / f"ranking_top{k}.json",
                    metrics.ranking_to_json(ranked, corpus.institutions))
        (cell_dir / f"ranking_top{k}.csv").write_text(
            metrics.ranking_to_csv(ranked), "utf-8")

    top_link = rankings[th.link_institutions]
    scope = frozenset(top_link.rors())
    pairs = metrics.count_pairs(corpus, spec, period, scope)
    display = metrics.filter_display_pairs(pairs, th.min_pair_works)
    _write_json(cell_dir / "pairs.json", metrics.pairs_to_json(pairs, spec.name, period.label))
    _write_json(cell_dir / "display_pairs.json",
                metrics.pairs_to_json(display, spec.name, period.label))

    party = metrics.build_party_matrix(
        display, corpus.institutions, eu27=frozenset(config.eu27),
        weight=config.party_matrix_weight, discipline=spec.name, period=period.label)
    _write_json(cell_dir / "party_matrix.json", metrics.party_matrix_to_json(party))

    if len(top_link.entries) >= 2:
        dm = metrics.build_distance_matrix(corpus, spec, period, top_link)
        _write_json(cell_dir / "distance_matrix.json", metrics.distance_matrix_to_json(dm))
        if len(dm.labels) >= 2:
            dend = clustering.ward_cluster(dm)
            _write_json(cell_dir / "dendrogram.json", dend.to_json())
            (cell_dir / "dendrogram.nwk").write_text(dend.to_newick() + "\n", "utf-8")
        else:
            log.warning("%s/%s: fewer than 2 rankable institutions, dendrogram skipped",
                        spec.name, period.label)
    else:
        log.warning("%s/%s: fewer than 2 rankable institutions, dendrogram skipped",
                    spec.name, period.label)


def cmd_analyze(config: AtlasConfig) -> None:
    """Produce rankings, pair counts, party matrices, distance matrices and
    dendrograms for every configured (discipline, period) cell."""
    corpus_dir = Path(config.corpus_dir)
    analytics_dir = Path(config.analytics_dir)
    jobs = []
    for name, _root in config.selected_disciplines():
        slug = slugify(name)
        corpus_path = corpus_dir / f"{slug}.jsonl"
        if not corpus_path.exists():
            raise DataError(f"missing corpus file: {corpus_path} (run build first)")
        corpus = load_corpus(corpus_path)
        spec = _load_spec(corpus_dir, slug)
        for period in config.selected_periods():
            cell_dir = analytics_dir / slug / period.label
            jobs.append((corpus, spec, period, cell_dir))
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(_analyze_cell, config, *job) for job in jobs]
        for future in futures:
            future.result()


# ---------------------------------------------------------------------------
# render

def _load_ranking(cell_dir: Path, k: int) -> tuple[RankedInstitutions, dict]:
    path = cell_dir / f"ranking_top{k}.json"
    if not path.exists():
        raise DataError(f"missing analytics file: {path} (run analyze first)")
    doc = json.loads(path.read_text("utf-8"))
    ranked = RankedInstitutions(
        discipline=doc["discipline"], period=doc["period"],
        entries=[metrics.RankedEntry(rank=e["rank"], ror=e["ror"], country=e["country"],
                                     name=e["name"], works=e["works"])
                 for e in doc["entries"]],
    )
    coords = {e["ror"]: (e["lat"], e["lon"]) for e in doc["entries"]
              if e["lat"] is not None and e["lon"] is not None}
    return ranked, coords


def _render_cell(config: AtlasConfig, slug: str, period: Period, kinds: list[str]) -> None:
    th = config.thresholds
    fig = config.figures
    cell_dir = Path(config.analytics_dir) / slug / period.label
    out_root = Path(config.out_dir) / slug
    basemap = figures.load_basemap()
    discipline = ""

    def fail(kind: str, exc: Exception):
        raise DataError(f"cannot render {slug}/{period.label}/{kind}: {exc}") from exc

    for kind in kinds:
        out_dir = out_root / kind
        out_dir.mkdir(parents=True, exist_ok=True)
        if kind == "world_map":
            ranked, coords = _load_ranking(cell_dir, th.map_bubbles)
            discipline = ranked.discipline
            pairs_path = cell_dir / "display_pairs.json"
            if not pairs_path.exists():
                fail(kind, FileNotFoundError(pairs_path))
            display = metrics.pairs_from_json(json.loads(pairs_path.read_text("utf-8")))
            provenance = _snapshot_provenance(config, discipline, period.label)
            doc = figures.render_world_map(
                ranked, coords, display,
                figures.BubbleScale("global", area_per_work=fig.area_per_work),
                basemap, provenance=provenance, gc_samples=fig.gc_samples)
            doc.write(out_dir / f"{period.label}.svg")
        elif kind == "top30_map":
            ranked, coords = _load_ranking(cell_dir, th.top30)
            discipline = ranked.discipline
            if not ranked.entries:
                log.warning("%s/%s: no institutions, top-30 map skipped", slug, period.label)
                continue
            provenance = _snapshot_provenance(config, discipline, period.label)
            doc = figures.render_top30_map(
                ranked, coords,
                figures.BubbleScale("per_panel", reference_area=fig.reference_area),
                basemap, provenance=provenance)
            doc.write(out_dir / f"{period.label}.svg")
        elif kind == "party_matrix":
            path = cell_dir / "party_matrix.json"
            if not path.exists():
                fail(kind, FileNotFoundError(path))
            matrix = metrics.party_matrix_from_json(json.loads(path.read_text("utf-8")))
            provenance = _snapshot_provenance(config, matrix.discipline, period.label)
            doc = figures.render_party_matrix(
                matrix, area_per_unit=fig.matrix_area_per_unit, provenance=provenance)
            doc.write(out_dir / f"{period.label}.svg")
        elif kind == "dendrogram":
            path = cell_dir / "dendrogram.json"
            if not path.exists():
                log.warning("%s/%s: no dendrogram analytics, figure skipped",
                            slug, period.label)
                continue
            dend = clustering.Dendrogram.from_json(json.loads(path.read_text("utf-8")))
            ranked, _coords = _load_ranking(cell_dir, th.link_institutions)
            works = {e.ror: e.works for e in ranked.entries}
            labels = {e.ror: (e.country, e.name) for e in ranked.entries}
            provenance = _snapshot_provenance(config, ranked.discipline, period.label)
            doc = figures.render_dendrogram(dend, works, labels, provenance=provenance)
            doc.write(out_dir / f"{period.label}.svg")
        elif kind == "top100_table":
            ranked, _coords = _load_ranking(cell_dir, th.table)
            provenance = _snapshot_provenance(config, ranked.discipline, period.label)
            table = figures.emit_top100_table(ranked, provenance=provenance)
            table.write(out_dir / f"{period.label}.csv", out_dir / f"{period.label}.md")
        else:
            raise ConfigError(f"unknown figure kind: {kind}")


FIGURE_KINDS = ("world_map", "top30_map", "party_matrix", "dendrogram", "top100_table")


def cmd_render(config: AtlasConfig) -> None:
    """Emit the full out/ tree: four figure families plus tables, one file
    per (discipline, figure kind, period)."""
    jobs = []
    periods = config.selected_periods()
    for name, _root in config.selected_disciplines():
        slug = slugify(name)
        for period in periods:
            kinds = [k for k in FIGURE_KINDS if period in _family_periods(k, periods)]
            if kinds:
                jobs.append((slug, period, kinds))
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(_render_cell, config, *job) for job in jobs]
        for future in futures:
            future.result()


# ---------------------------------------------------------------------------
# run manifest

def write_run_manifest(config: AtlasConfig, timings: dict[str, float],
                       warnings: list[str], path: str | Path | None = None) -> Path:
    manifest_path = Path(path) if path else Path(config.out_dir).parent / "run_manifest.json"
    snapshot_manifest = Path(config.snapshot_dir) / SnapshotCache.MANIFEST
    provenance = {}
    if snapshot_manifest.exists():
        doc = json.loads(snapshot_manifest.read_text("utf-8"))
        provenance = {"fetch_window": doc.get("fetch_window", {}),
                      "queries": len(doc.get("queries", []))}
    doc = {
        "config_hash": config.config_hash(),
        "snapshot": provenance,
        "timings_seconds": {k: round(v, 3) for k, v in timings.items()},
        "warnings": {"count": len(warnings), "messages": warnings},
    }
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = manifest_path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
    tmp.replace(manifest_path)
    return manifest_path


def run_all(config: AtlasConfig, http_get=None) -> Path:
    """fetch (online mode only) -> build -> analyze -> render, plus the run
    manifest. Returns the manifest path."""
    counter = WarningCounter()
    log.addHandler(counter)
    timings: dict[str, float] = {}
    try:
        if config.mode == "online":
            t0 = time.perf_counter()
            cmd_fetch(config, http_get=http_get)
            timings["fetch"] = time.perf_counter() - t0
        for stage_name, stage in (("build", cmd_build), ("analyze", cmd_analyze),
                                  ("render", cmd_render)):
            t0 = time.perf_counter()
            stage(config)
            timings[stage_name] = time.perf_counter() - t0
    finally:
        log.removeHandler(counter)
    return write_run_manifest(config, timings, counter.messages)
