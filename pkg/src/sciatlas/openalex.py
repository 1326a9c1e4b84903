"""OpenAlex API client: filter construction, cursor pagination, polite rate
limiting, and a verbatim on-disk response cache (snapshot).

Every response body is stored byte-for-byte under a canonical request key, so
an offline replay of a snapshot is deterministic down to the bytes.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional

from .corpus import Institution
from .errors import CacheMissError, ConfigError, DataError, TransportError, WorkParseError
from .taxonomy import Concept

API_BASE = "https://api.openalex.org"
MAX_PER_PAGE = 200

HttpGet = Callable[[str], tuple[int, bytes]]


def _strip_prefix(value: str, *prefixes: str) -> str:
    for prefix in prefixes:
        if value.startswith(prefix):
            return value[len(prefix):]
    return value


def normalize_openalex_id(value: str) -> str:
    return _strip_prefix(value, "https://openalex.org/", "http://openalex.org/")


def normalize_ror(value: str) -> str:
    return _strip_prefix(value, "https://ror.org/", "http://ror.org/")


def build_works_filter(concept_ids: set[str] | frozenset[str], year_range: tuple[int, int]) -> str:
    """Deterministic works filter: any of the given concepts, publication year
    within the inclusive range. Concept ids are sorted so identical inputs
    always produce identical strings."""
    if not concept_ids:
        raise ConfigError("works filter needs at least one concept id")
    start, end = year_range
    if start > end:
        raise ConfigError(f"bad year range: {start} > {end}")
    ids = "|".join(sorted(concept_ids))
    return f"concepts.id:{ids},publication_year:{start}-{end}"


def build_concepts_filter(root_id: str) -> str:
    """Filter selecting all descendants of a root concept."""
    return f"ancestors.id:{root_id}"


@dataclass(frozen=True)
class ApiEndpoint:
    entity_kind: str  # works | concepts | institutions
    filter_expr: str = ""
    cursor: str = "*"
    per_page: int = MAX_PER_PAGE

    def __post_init__(self):
        if self.entity_kind not in ("works", "concepts", "institutions"):
            raise ConfigError(f"unknown entity kind: {self.entity_kind}")
        if not (0 < self.per_page <= MAX_PER_PAGE):
            raise ConfigError(f"per_page must be in 1..{MAX_PER_PAGE}")
        if self.entity_kind == "works" and not self.filter_expr:
            raise ConfigError("works queries require a filter expression")

    def request_key(self) -> str:
        """Canonical cache key: endpoint + sorted filter params + cursor."""
        parts = [self.entity_kind]
        if self.filter_expr:
            parts.append("filter=" + ",".join(sorted(self.filter_expr.split(","))))
        parts.append(f"per-page={self.per_page}")
        parts.append(f"cursor={self.cursor}")
        return "?".join([parts[0], "&".join(parts[1:])])

    def url(self, mailto: str = "") -> str:
        query = []
        if self.filter_expr:
            query.append("filter=" + self.filter_expr)
        query.append(f"per-page={self.per_page}")
        query.append(f"cursor={self.cursor}")
        if mailto:
            query.append(f"mailto={mailto}")
        return f"{API_BASE}/{self.entity_kind}?" + "&".join(query)

    def with_cursor(self, cursor: str) -> "ApiEndpoint":
        return ApiEndpoint(self.entity_kind, self.filter_expr, cursor, self.per_page)


@dataclass
class RawPage:
    results: list[dict]
    next_cursor: Optional[str]
    meta_count: int
    body: bytes = b""

    @classmethod
    def from_bytes(cls, body: bytes) -> "RawPage":
        try:
            doc = json.loads(body)
        except json.JSONDecodeError as exc:
            raise DataError(f"unparseable API response: {exc}") from exc
        meta = doc.get("meta", {})
        return cls(
            results=doc.get("results", []),
            next_cursor=meta.get("next_cursor"),
            meta_count=int(meta.get("count", 0)),
            body=body,
        )


class RateLimiter:
    """Spaces permits so no more than ``rps`` requests start in any 1-second
    window. Clock and sleep are injectable for virtual-clock tests."""

    def __init__(self, rps: float = 10.0, clock=time.monotonic, sleep=time.sleep):
        if rps <= 0:
            raise ConfigError("requests-per-second must be positive")
        self.interval = 1.0 / rps
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            wait = self._next_allowed - now
            if wait > 0:
                self._sleep(wait)
                now = self._next_allowed
            self._next_allowed = max(now, self._next_allowed) + self.interval


class SnapshotCache:
    """Append-only response cache: one file per page under ``pages/`` plus a
    manifest recording fetch dates, query groupings, and the key -> file map.

    Safe for concurrent writers of distinct keys (manifest updates are
    serialized; page files are written before the manifest references them).
    """

    MANIFEST = "manifest.json"
    FORMAT = "sciatlas-snapshot"
    VERSION = 1

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        manifest_path = self.root / self.MANIFEST
        if manifest_path.exists():
            self.manifest = json.loads(manifest_path.read_text("utf-8"))
            if self.manifest.get("format") != self.FORMAT:
                raise DataError(f"not a snapshot directory: {self.root}")
        else:
            self.manifest = {
                "format": self.FORMAT,
                "version": self.VERSION,
                "contact_email": "",
                "fetch_window": {},
                "queries": [],
                "entries": {},
            }

    def has(self, key: str) -> bool:
        return key in self.manifest["entries"]

    def get(self, key: str) -> bytes:
        entry = self.manifest["entries"].get(key)
        if entry is None:
            raise CacheMissError(key)
        return (self.root / entry["file"]).read_bytes()

    def put(self, key: str, body: bytes, fetched_at: str) -> None:
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        rel = f"pages/{digest}.json"
        page_path = self.root / rel
        page_path.parent.mkdir(parents=True, exist_ok=True)
        page_path.write_bytes(body)
        with self._lock:
            self.manifest["entries"][key] = {"file": rel, "fetched_at": fetched_at}

    def record_query(self, kind: str, filter_expr: str, request_keys: list[str], **labels) -> None:
        query = {"kind": kind, "filter": filter_expr, "request_keys": request_keys, **labels}
        with self._lock:
            for existing in self.manifest["queries"]:
                if existing["kind"] == kind and existing["filter"] == filter_expr:
                    existing.update(query)
                    break
            else:
                self.manifest["queries"].append(query)

    def find_query(self, kind: str, **labels) -> Optional[dict]:
        for query in self.manifest["queries"]:
            if query["kind"] == kind and all(query.get(k) == v for k, v in labels.items()):
                return query
        return None

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / (self.MANIFEST + ".tmp")
        tmp.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n", "utf-8")
        tmp.replace(self.root / self.MANIFEST)


def _requests_get(url: str) -> tuple[int, bytes]:
    import requests

    resp = requests.get(url, timeout=60)
    return resp.status_code, resp.content


def _fetch_with_retries(url: str, http_get: HttpGet, sleep, max_attempts: int = 3) -> bytes:
    backoff = 1.0
    last_status = None
    for attempt in range(max_attempts):
        try:
            status, body = http_get(url)
        except Exception as exc:  # connection-level failure, retryable
            last_status = f"connection error: {exc}"
            status = None
        else:
            if status == 200:
                return body
            last_status = f"HTTP {status}"
            if status is not None and 400 <= status < 500 and status != 429:
                raise TransportError(f"{last_status} for {url}")
        if attempt + 1 < max_attempts:
            sleep(backoff)
            backoff *= 2
    raise TransportError(f"{last_status} for {url} after {max_attempts} attempts")


def fetch_pages(
    endpoint: ApiEndpoint,
    cache: SnapshotCache,
    mode: str = "offline",
    http_get: HttpGet | None = None,
    limiter: RateLimiter | None = None,
    mailto: str = "",
    sleep=time.sleep,
    now=None,
) -> Iterator[RawPage]:
    """Yield all pages of a cursor-paginated query, in cursor order.

    Online mode writes every response to the cache before yielding it;
    already-cached pages are served from the cache without a request.
    Offline mode requires every page to be cached already.
    """
    if mode not in ("online", "offline"):
        raise ConfigError(f"unknown fetch mode: {mode}")
    current = endpoint
    while True:
        key = current.request_key()
        if cache.has(key):
            body = cache.get(key)
        elif mode == "offline":
            raise CacheMissError(key)
        else:
            if limiter is not None:
                limiter.acquire()
            body = _fetch_with_retries(current.url(mailto), http_get or _requests_get, sleep)
            fetched_at = (now() if now else time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
            cache.put(key, body, fetched_at)
        page = RawPage.from_bytes(body)
        yield page
        if not page.next_cursor:
            return
        current = current.with_cursor(page.next_cursor)


# ---------------------------------------------------------------------------
# Record parsing

@dataclass(frozen=True)
class ParsedWork:
    """A work as extracted from a raw API record; ``year`` may be unknown."""

    id: str
    year: Optional[int]
    concepts: frozenset[str]
    institutions: frozenset[str]  # ROR ids where known, else OpenAlex ids


def parse_work(raw: dict, concept_score_min: float = 0.0) -> ParsedWork:
    """Extract id, year, concept ids, and the deduplicated institution set
    across all authorships. Authors without institution data contribute
    nothing. A missing year flags the work as year-unknown; downstream
    analytics drop it.

    Concept presence counts regardless of score by default; a positive
    ``concept_score_min`` drops concept tags scored below it (tags without a
    score are kept)."""
    work_id = raw.get("id")
    if not work_id or not isinstance(work_id, str):
        raise WorkParseError(f"work record has no usable id: {raw.get('id')!r}")
    year = raw.get("publication_year")
    if not isinstance(year, int):
        year = None
    concepts = frozenset(
        normalize_openalex_id(c["id"])
        for c in raw.get("concepts", [])
        if c.get("id") and (c.get("score") is None or c["score"] >= concept_score_min)
    )
    institutions: set[str] = set()
    for authorship in raw.get("authorships", []):
        for inst in authorship.get("institutions", []):
            if inst.get("ror"):
                institutions.add(normalize_ror(inst["ror"]))
            elif inst.get("id"):
                institutions.add(normalize_openalex_id(inst["id"]))
    return ParsedWork(
        id=normalize_openalex_id(work_id),
        year=year,
        concepts=concepts,
        institutions=frozenset(institutions),
    )


def parse_institution(raw: dict) -> Optional[Institution]:
    """Build an Institution from a raw API record; returns None when the
    record lacks a ROR, coordinates, or a country code."""
    ror = raw.get("ror")
    geo = raw.get("geo") or {}
    country = raw.get("country_code")
    if not ror or not country or geo.get("latitude") is None or geo.get("longitude") is None:
        return None
    return Institution(
        ror=normalize_ror(ror),
        openalex_id=normalize_openalex_id(raw.get("id", "")),
        name=raw.get("display_name", ""),
        country=country.upper(),
        lat=float(geo["latitude"]),
        lon=float(geo["longitude"]),
    )


def parse_concept(raw: dict) -> Concept:
    return Concept(
        id=normalize_openalex_id(raw["id"]),
        level=int(raw.get("level", 0)),
        ancestor_ids=frozenset(
            normalize_openalex_id(a["id"]) for a in raw.get("ancestors", []) if a.get("id")
        ),
        display_name=raw.get("display_name", ""),
    )
