"""Figure and table emitters: world collaboration maps, the five-party
matrix diagram, circular dendrograms, and the top-100 production tables.

All bubble encodings are linear in *area*, never radius. Rendering is pure:
the same inputs always serialize to byte-identical SVG.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .clustering import Dendrogram, leaf_order
from .errors import AntipodalArcError, DegeneratePathError, EmptyFigureError
from .geometry import GeoPoint, great_circle_points
from .metrics import PARTIES, PairCount, PartyMatrix, RankedInstitutions
from .svg import SvgDoc

log = logging.getLogger(__name__)

MAP_WIDTH = 1000
MAP_HEIGHT = 500
DENDRO_SIZE = 900

_THEME = {
    "land": "#e8e4d8",
    "coast": "#b0a890",
    "bubble": "#1f77b4",
    "bubble_opacity": "0.55",
    "link": "#c44e52",
    "link_width": 0.6,
    "link_opacity": "0.5",
    "matrix_bubble": "#1f77b4",
    "dot": "#444444",
    "tree": "#555555",
    "bar": "#1f77b4",
}


@dataclass
class BubbleScale:
    """Area encoding for count bubbles.

    ``global``: area = area_per_work * works, shared across period panels so
    bubbles are comparable between panels. ``per_panel``: the panel maximum
    gets ``reference_area`` and everything else scales linearly within the
    panel (not comparable across panels).
    """

    mode: str = "global"  # global | per_panel
    area_per_work: float = 2.0
    reference_area: float = 600.0

    def __post_init__(self):
        if self.mode not in ("global", "per_panel"):
            raise ValueError(f"unknown bubble scale mode: {self.mode}")
        if self.area_per_work <= 0 or self.reference_area <= 0:
            raise ValueError("bubble scale constants must be positive")

    def area(self, works: int, panel_max: int) -> float:
        if self.mode == "global":
            return self.area_per_work * works
        return self.reference_area * works / panel_max

    def radius(self, works: int, panel_max: int) -> float:
        return math.sqrt(self.area(works, panel_max) / math.pi)


@dataclass
class FigureDoc:
    kind: str  # world_map | top30_map | party_matrix | dendrogram | top100_table
    svg: str
    metadata: dict = field(default_factory=dict)

    def write(self, path: str | Path) -> None:
        Path(path).write_bytes(self.svg.encode("utf-8"))


@dataclass
class TableDoc:
    csv_text: str
    markdown_text: str
    metadata: dict = field(default_factory=dict)

    def write(self, csv_path: str | Path, md_path: str | Path) -> None:
        Path(csv_path).write_text(self.csv_text, encoding="utf-8")
        Path(md_path).write_text(self.markdown_text, encoding="utf-8")


def load_basemap() -> list[dict]:
    raw = resources.files("sciatlas.data").joinpath("basemap.json").read_text("utf-8")
    return json.loads(raw)["features"]


def _project(lat: float, lon: float) -> tuple[float, float]:
    # equirectangular: straight lon/lat to canvas
    x = (lon + 180.0) / 360.0 * MAP_WIDTH
    y = (90.0 - lat) / 180.0 * MAP_HEIGHT
    return x, y


def _draw_basemap(doc: SvgDoc, basemap: list[dict]) -> None:
    for feature in basemap:
        pts = [_project(lat, lon) for lon, lat in feature["ring"]]
        doc.polygon(pts, fill=_THEME["land"], stroke=_THEME["coast"],
                    stroke_width=0.5, data_name=feature["name"])


def _start_doc(width: int, height: int, provenance: str) -> SvgDoc:
    doc = SvgDoc(width, height)
    if provenance:
        doc.comment(f"provenance: {provenance}")
    return doc


def render_world_map(
    ranked: RankedInstitutions,
    coords: dict[str, tuple[float, float]],
    display_pairs: list[PairCount],
    scale: BubbleScale,
    basemap: list[dict],
    provenance: str = "",
    gc_samples: int = 52,
) -> FigureDoc:
    """Bubbles for all ranked institutions plus one great-circle link per
    displayed coauthorship pair. Institutions without coordinates are left off
    the map with a warning."""
    doc = _start_doc(MAP_WIDTH, MAP_HEIGHT, provenance)
    _draw_basemap(doc, basemap)

    missing = 0
    for pair in display_pairs:
        if pair.a not in coords or pair.b not in coords:
            missing += 1
            log.warning("link %s-%s skipped: missing coordinates", pair.a, pair.b)
            continue
        a = GeoPoint(*coords[pair.a])
        b = GeoPoint(*coords[pair.b])
        try:
            path = great_circle_points(a, b, gc_samples)
        except (DegeneratePathError, AntipodalArcError) as exc:
            missing += 1
            log.warning("link %s-%s skipped: %s", pair.a, pair.b, exc)
            continue
        for segment in path.segments():
            doc.polyline(
                [_project(p.lat, p.lon) for p in segment],
                fill="none", stroke=_THEME["link"], stroke_width=_THEME["link_width"],
                stroke_opacity=_THEME["link_opacity"], **{"class": "link"},
                data_pair=f"{pair.a}|{pair.b}",
            )

    panel_max = max((e.works for e in ranked.entries), default=1)
    for entry in ranked.entries:
        if entry.ror not in coords:
            log.warning("bubble for %s skipped: missing coordinates", entry.ror)
            continue
        lat, lon = coords[entry.ror]
        x, y = _project(lat, lon)
        doc.circle(x, y, scale.radius(entry.works, panel_max),
                   fill=_THEME["bubble"], fill_opacity=_THEME["bubble_opacity"],
                   **{"class": "bubble"}, data_ror=entry.ror, data_works=entry.works)
    return FigureDoc(
        kind="world_map",
        svg=doc.to_string(),
        metadata={
            "discipline": ranked.discipline, "period": ranked.period,
            "links": len(display_pairs) - missing, "links_skipped": missing,
        },
    )


def render_top30_map(
    ranked: RankedInstitutions,
    coords: dict[str, tuple[float, float]],
    scale: BubbleScale,
    basemap: list[dict],
    provenance: str = "",
) -> FigureDoc:
    """Leading institutions only, bubble areas standardised within the panel:
    the panel maximum always gets the reference area."""
    if not ranked.entries:
        raise EmptyFigureError(f"no institutions to draw for {ranked.discipline}/{ranked.period}")
    doc = _start_doc(MAP_WIDTH, MAP_HEIGHT, provenance)
    _draw_basemap(doc, basemap)
    panel_max = max(e.works for e in ranked.entries)
    for entry in ranked.entries:
        if entry.ror not in coords:
            log.warning("bubble for %s skipped: missing coordinates", entry.ror)
            continue
        lat, lon = coords[entry.ror]
        x, y = _project(lat, lon)
        doc.circle(x, y, scale.radius(entry.works, panel_max),
                   fill=_THEME["bubble"], fill_opacity=_THEME["bubble_opacity"],
                   **{"class": "bubble"}, data_ror=entry.ror, data_works=entry.works)
    return FigureDoc(
        kind="top30_map", svg=doc.to_string(),
        metadata={"discipline": ranked.discipline, "period": ranked.period},
    )


def render_party_matrix(
    matrix: PartyMatrix,
    area_per_unit: float = 12.0,
    provenance: str = "",
) -> FigureDoc:
    """Lower-triangular 5x5 layout (diagonal included). Bubble area is linear
    in the cell count; zero cells are drawn as small dots, which does not
    imply the absence of coauthorship outside the top-50 scope."""
    cell = 90
    margin = 70
    size = margin + cell * len(PARTIES) + 20
    doc = _start_doc(size, size, provenance)
    for i, p in enumerate(PARTIES):
        doc.text(margin + cell * i + cell / 2.0, margin - 14.0, p,
                 text_anchor="middle", font_size=14, **{"class": "col-label"})
        doc.text(margin - 14.0, margin + cell * i + cell / 2.0 + 5.0, p,
                 text_anchor="end", font_size=14, **{"class": "row-label"})
    for i, p in enumerate(PARTIES):          # row
        for j, q in enumerate(PARTIES[:i + 1]):  # column: lower triangle + diagonal
            count = matrix.get(q, p)
            cx = margin + cell * j + cell / 2.0
            cy = margin + cell * i + cell / 2.0
            doc.element("rect", x=margin + cell * j, y=margin + cell * i,
                        width=cell, height=cell, fill="none", stroke="#cccccc",
                        stroke_width=0.5)
            if count == 0:
                doc.circle(cx, cy, 1.5, fill=_THEME["dot"],
                           **{"class": "zero-dot"}, data_cell=f"{q}|{p}", data_count=0)
            else:
                r = math.sqrt(area_per_unit * count / math.pi)
                doc.circle(cx, cy, r, fill=_THEME["matrix_bubble"],
                           fill_opacity=_THEME["bubble_opacity"],
                           **{"class": "cell-bubble"}, data_cell=f"{q}|{p}", data_count=count)
    return FigureDoc(
        kind="party_matrix", svg=doc.to_string(),
        metadata={"discipline": matrix.discipline, "period": matrix.period,
                  "total": matrix.total()},
    )


def render_dendrogram(
    dend: Dendrogram,
    works: dict[str, int],
    labels: dict[str, tuple[str, str]],  # ror -> (country code, display name)
    provenance: str = "",
) -> FigureDoc:
    """Circular dendrogram: leaves on a ring in deterministic traversal order,
    merges drawn at radii shrinking monotonically with merge height, an outer
    bar ring linear in works count, and "CC: Name" leaf labels hyperlinked to
    their ROR pages."""
    size = DENDRO_SIZE
    center = size / 2.0
    r_leaf = 250.0
    r_core = 40.0
    r_bar0 = 265.0
    bar_max = 60.0
    r_label = r_bar0 + bar_max + 12.0

    order = leaf_order(dend)
    n = len(order)
    angle = {ror: 2.0 * math.pi * i / n - math.pi / 2.0 for i, ror in enumerate(order)}
    heights = [m[2] for m in dend.merges]
    h_max = max(heights) if heights else 1.0
    if h_max <= 0:
        h_max = 1.0

    def radius_of(h: float) -> float:
        return r_leaf - (h / h_max) * (r_leaf - r_core)

    def polar(r: float, theta: float) -> tuple[float, float]:
        return center + r * math.cos(theta), center + r * math.sin(theta)

    doc = _start_doc(size, size, provenance)

    # node angle = mean leaf angle of its subtree; node radius from its height
    node_angle: dict[int, float] = {}
    node_radius: dict[int, float] = {}
    for i, ror in enumerate(dend.leaves):
        node_angle[i] = angle[ror]
        node_radius[i] = r_leaf
    for k, (left, right, h, _) in enumerate(dend.merges):
        node = dend.n + k
        node_angle[node] = (node_angle[left] + node_angle[right]) / 2.0
        node_radius[node] = radius_of(h)

    for k, (left, right, h, _) in enumerate(dend.merges):
        r_merge = radius_of(h)
        for child in (left, right):
            x1, y1 = polar(node_radius[child], node_angle[child])
            x2, y2 = polar(r_merge, node_angle[child])
            doc.line(x1, y1, x2, y2, stroke=_THEME["tree"], stroke_width=1.0,
                     **{"class": "tree-radial"})
        a0 = min(node_angle[left], node_angle[right])
        a1 = max(node_angle[left], node_angle[right])
        x0, y0 = polar(r_merge, a0)
        x1, y1 = polar(r_merge, a1)
        large = 1 if (a1 - a0) > math.pi else 0
        doc.element(
            "path",
            d=(f"M {x0:.6f} {y0:.6f} A {r_merge:.6f} {r_merge:.6f} 0 {large} 1 "
               f"{x1:.6f} {y1:.6f}"),
            fill="none", stroke=_THEME["tree"], stroke_width=1.0,
            **{"class": "tree-arc"},
        )

    max_works = max((works.get(ror, 0) for ror in order), default=0) or 1
    for ror in order:
        theta = angle[ror]
        count = works.get(ror, 0)
        bar_len = bar_max * count / max_works
        x1, y1 = polar(r_bar0, theta)
        x2, y2 = polar(r_bar0 + bar_len, theta)
        doc.line(x1, y1, x2, y2, stroke=_THEME["bar"], stroke_width=4.0,
                 **{"class": "bar"}, data_ror=ror, data_works=count)
        if ror in labels:
            country, name = labels[ror]
            label = f"{country}: {abbreviate_name(name)}"
        else:
            log.warning("leaf %s has no institution metadata", ror)
            label = f"??: {ror}"
        lx, ly = polar(r_label, theta)
        anchor = "start" if math.cos(theta) >= 0 else "end"
        doc.raw(
            f'<a xlink:href="https://ror.org/{ror}" href="https://ror.org/{ror}">'
            f'<text class="leaf-label" font-size="9" text-anchor="{anchor}" '
            f'x="{lx:.6f}" y="{ly:.6f}">{_xml_escape(label)}</text></a>'
        )
    return FigureDoc(kind="dendrogram", svg=doc.to_string(), metadata={"leaves": n})


def _xml_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# Tables and name abbreviation

DEFAULT_ABBREVIATIONS: tuple[tuple[str, str], ...] = (
    ("University of", "U."),
    ("National Laboratory", "NL"),
    ("Institution", "Inst"),
    ("Institute", "Inst"),
    ("Technology", "Tech"),
    ("Science", "Sci"),
)


def _compile_rules(dictionary: Iterable[tuple[str, str]]):
    rules = sorted(dictionary, key=lambda kv: len(kv[0]), reverse=True)
    pattern = re.compile(r"\b(" + "|".join(re.escape(k) for k, _ in rules) + r")\b")
    mapping = dict(rules)
    return pattern, mapping


_DEFAULT_PATTERN, _DEFAULT_MAP = _compile_rules(DEFAULT_ABBREVIATIONS)


def abbreviate_name(name: str, dictionary: Optional[Iterable[tuple[str, str]]] = None) -> str:
    """Shorten an institution name with the abbreviation dictionary:
    longest match wins, left to right, single pass, idempotent."""
    if dictionary is None:
        pattern, mapping = _DEFAULT_PATTERN, _DEFAULT_MAP
    else:
        pattern, mapping = _compile_rules(dictionary)
    return pattern.sub(lambda m: mapping[m.group(1)], name)


def emit_top100_table(ranked: RankedInstitutions, provenance: str = "") -> TableDoc:
    """Production table: rank, country code, abbreviated name, works. Tie rows
    are already ordered by the ranking rule (count desc, country asc, name
    asc) and tied counts share a rank."""
    rows = [
        (e.rank, e.country, abbreviate_name(e.name), e.works)
        for e in ranked.entries
    ]
    buf = io.StringIO()
    if provenance:
        buf.write(f"# {provenance}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "country", "institution", "works"])
    writer.writerows(rows)

    md = io.StringIO()
    if provenance:
        md.write(f"<!-- {provenance} -->\n\n")
    title = f"Top {len(rows)} institutions ({ranked.discipline}, {ranked.period})"
    md.write(f"### {title}\n\n")
    md.write("| Rank | Country | Institution | Works |\n")
    md.write("| ---: | :--- | :--- | ---: |\n")
    for rank, country, name, n in rows:
        md.write(f"| {rank} | {country} | {name} | {n} |\n")
    return TableDoc(
        csv_text=buf.getvalue(),
        markdown_text=md.getvalue(),
        metadata={"discipline": ranked.discipline, "period": ranked.period, "rows": len(rows)},
    )
