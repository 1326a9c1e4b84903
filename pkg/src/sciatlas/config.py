"""Run configuration: one declarative TOML document per atlas run, with CLI
flags layered on top. Paths in the file resolve relative to its location."""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import PERIODS, Period
from .errors import ConfigError
from .metrics import EU27_DEFAULT
from .taxonomy import load_table1_roots


@dataclass
class Thresholds:
    map_bubbles: int = 199
    link_institutions: int = 50
    top30: int = 30
    table: int = 100
    min_pair_works: int = 5

    def validate(self) -> None:
        for name, value in asdict(self).items():
            if name == "min_pair_works":
                if value < 0:
                    raise ConfigError("min_pair_works must be >= 0")
            elif value <= 0:
                raise ConfigError(f"threshold {name} must be positive")


@dataclass
class FigureSettings:
    area_per_work: float = 2.0       # world map, global scale (px^2 per work)
    reference_area: float = 600.0    # top-30 map, per-panel max (px^2)
    matrix_area_per_unit: float = 12.0
    gc_samples: int = 52


@dataclass
class AtlasConfig:
    disciplines: list[str] = field(default_factory=list)  # empty = all 15
    periods: list[str] = field(default_factory=lambda: [p.label for p in PERIODS])
    thresholds: Thresholds = field(default_factory=Thresholds)
    figures: FigureSettings = field(default_factory=FigureSettings)
    eu27: list[str] = field(default_factory=lambda: sorted(EU27_DEFAULT))
    contact_email: str = ""
    snapshot_dir: str = "snapshot"
    corpus_dir: str = "corpus"
    analytics_dir: str = "analytics"
    out_dir: str = "out"
    mode: str = "offline"  # online | offline
    requests_per_second: float = 10.0
    workers: int = 1
    party_matrix_weight: str = "pairs"  # pairs | works
    concept_score_min: float = 0.0
    discipline_manifest: str = ""  # override for the built-in Table-1 roots

    def validate(self) -> None:
        self.thresholds.validate()
        if self.mode not in ("online", "offline"):
            raise ConfigError(f"mode must be online or offline, got {self.mode!r}")
        if self.party_matrix_weight not in ("pairs", "works"):
            raise ConfigError(f"bad party_matrix_weight: {self.party_matrix_weight!r}")
        if self.requests_per_second <= 0:
            raise ConfigError("requests_per_second must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        known = {name for name, _ in self.roots()}
        for d in self.disciplines:
            if d not in known:
                raise ConfigError(f"unknown discipline: {d!r}")
        labels = {p.label for p in PERIODS}
        for label in self.periods:
            if label not in labels:
                raise ConfigError(f"unknown period: {label!r} (canonical: {sorted(labels)})")

    def roots(self) -> list[tuple[str, str]]:
        return load_table1_roots(self.discipline_manifest or None)

    def selected_disciplines(self) -> list[tuple[str, str]]:
        roots = self.roots()
        if not self.disciplines:
            return roots
        by_name = dict(roots)
        return [(name, by_name[name]) for name in self.disciplines]

    def selected_periods(self) -> list[Period]:
        return [p for p in PERIODS if p.label in self.periods]

    def config_hash(self) -> str:
        doc = asdict(self)
        canonical = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: Optional[str | Path] = None, overrides: Optional[dict] = None) -> AtlasConfig:
    """Build an AtlasConfig from a TOML file plus CLI overrides. Relative
    directory paths resolve against the config file's directory."""
    config = AtlasConfig()
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        base = path.parent
        try:
            doc = tomllib.loads(path.read_text("utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for key, value in doc.items():
            if key == "thresholds":
                config.thresholds = Thresholds(**value)
            elif key == "figures":
                config.figures = FigureSettings(**value)
            elif hasattr(config, key):
                setattr(config, key, value)
            else:
                raise ConfigError(f"unknown config key: {key}")
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)
    if not config.contact_email:
        config.contact_email = os.environ.get("OPENALEX_MAILTO", "")
    for attr in ("snapshot_dir", "corpus_dir", "analytics_dir", "out_dir"):
        value = Path(getattr(config, attr))
        if not value.is_absolute():
            value = base / value
        setattr(config, attr, str(value))
    config.validate()
    return config
