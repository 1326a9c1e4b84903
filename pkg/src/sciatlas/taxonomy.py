"""Discipline definitions: a level-1 root concept expanded with all of its
level >= 2 descendant concepts.

The 15 root disciplines ship as a built-in manifest (``data/disciplines.json``)
so the name/id mapping is auditable and can be overridden from config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import ConfigError


@dataclass(frozen=True)
class Concept:
    """One node of the OpenAlex concept taxonomy."""

    id: str
    level: int
    ancestor_ids: frozenset[str] = frozenset()
    display_name: str = ""


@dataclass(frozen=True)
class DisciplineSpec:
    """A root concept plus its expanded descendant-concept id set."""

    name: str
    root_id: str
    expanded_ids: frozenset[str] = field(default_factory=frozenset)


def expand_discipline(root: Concept, taxonomy: Iterable[Concept], name: str = "") -> DisciplineSpec:
    """Expand a level-1 root into the root plus all level >= 2 concepts that
    carry the root among their ancestors.

    Level-0 concepts are never members, even when they appear in ancestor
    chains of included concepts.
    """
    if root.level != 1:
        raise ConfigError(f"discipline root must be a level-1 concept, got level {root.level} ({root.id})")
    members = {root.id}
    for concept in taxonomy:
        if concept.level >= 2 and root.id in concept.ancestor_ids:
            members.add(concept.id)
    return DisciplineSpec(name=name or root.display_name, root_id=root.id, expanded_ids=frozenset(members))


def load_table1_roots(manifest_path: str | Path | None = None) -> list[tuple[str, str]]:
    """Return the 15 (discipline name, root concept id) pairs, in order.

    ``manifest_path`` overrides the built-in manifest.
    """
    if manifest_path is None:
        raw = resources.files("sciatlas.data").joinpath("disciplines.json").read_text("utf-8")
    else:
        raw = Path(manifest_path).read_text("utf-8")
    entries = json.loads(raw)
    return [(e["name"], e["id"]) for e in entries]
