import math

import pytest

from sciatlas.clustering import ward_cluster
from sciatlas.errors import EmptyFigureError
from sciatlas.figures import (
    BubbleScale,
    DEFAULT_ABBREVIATIONS,
    abbreviate_name,
    emit_top100_table,
    load_basemap,
    render_dendrogram,
    render_party_matrix,
    render_top30_map,
    render_world_map,
)
from sciatlas.metrics import DistanceMatrix, PairCount, PartyMatrix, RankedEntry, RankedInstitutions

import numpy as np

from conftest import svg_circles, svg_elements


def ranked_of(entries, discipline="Testing", period="2011-2020"):
    out = []
    for rank, (ror, country, name, works) in enumerate(entries, start=1):
        out.append(RankedEntry(rank=rank, ror=ror, country=country, name=name, works=works))
    return RankedInstitutions(discipline=discipline, period=period, entries=out)


def area_of(circle_attrs):
    return math.pi * float(circle_attrs["r"]) ** 2


BASEMAP = load_basemap()


class TestWorldMap:
    COORDS = {"0a": (40.0, -74.0), "0b": (51.0, 0.0), "0c": (35.0, 139.0)}

    def render(self, entries, pairs, area_per_work=2.0):
        ranked = ranked_of(entries)
        scale = BubbleScale("global", area_per_work=area_per_work)
        return render_world_map(ranked, self.COORDS, pairs, scale, BASEMAP)

    def test_two_bubbles_one_link(self):
        doc = self.render([("0a", "US", "A", 10), ("0b", "GB", "B", 5)],
                          [PairCount("0a", "0b", 6)])
        assert len(svg_circles(doc.svg, "bubble")) == 2
        assert len(svg_elements(doc.svg, "polyline", "link")) == 1

    def test_below_threshold_pairs_not_passed(self):
        doc = self.render([("0a", "US", "A", 10), ("0b", "GB", "B", 5)], [])
        assert len(svg_circles(doc.svg, "bubble")) == 2
        assert svg_elements(doc.svg, "polyline", "link") == []

    def test_area_doubles_with_works(self):
        doc = self.render([("0a", "US", "A", 10), ("0b", "GB", "B", 20)], [])
        by_ror = {c["data-ror"]: c for c in svg_circles(doc.svg, "bubble")}
        ratio = area_of(by_ror["0b"]) / area_of(by_ror["0a"])
        assert ratio == pytest.approx(2.0, rel=1e-6)

    def test_global_scale_shared_across_panels(self):
        doc1 = self.render([("0a", "US", "A", 10)], [])
        doc2 = self.render([("0b", "GB", "B", 1000)], [])
        a1 = area_of(svg_circles(doc1.svg, "bubble")[0])
        a2 = area_of(svg_circles(doc2.svg, "bubble")[0])
        assert a1 / 10 == pytest.approx(a2 / 1000, rel=1e-6)

    def test_missing_coordinates_warns_and_omits(self, caplog):
        with caplog.at_level("WARNING"):
            doc = self.render([("0a", "US", "A", 10), ("0zz", "US", "Z", 10)],
                              [PairCount("0a", "0zz", 9)])
        assert len(svg_circles(doc.svg, "bubble")) == 1
        assert svg_elements(doc.svg, "polyline", "link") == []
        assert doc.metadata["links_skipped"] == 1
        assert any("0zz" in m for m in caplog.messages)

    def test_byte_identical_rerender(self):
        entries = [("0a", "US", "A", 10), ("0b", "GB", "B", 5), ("0c", "JP", "C", 7)]
        pairs = [PairCount("0a", "0b", 6), PairCount("0b", "0c", 8)]
        assert self.render(entries, pairs).svg == self.render(entries, pairs).svg


class TestTop30Map:
    COORDS = {"0a": (40.0, -74.0), "0b": (51.0, 0.0)}

    def test_panel_max_gets_reference_area(self):
        scale = BubbleScale("per_panel", reference_area=600.0)
        doc_small = render_top30_map(ranked_of([("0a", "US", "A", 100)]),
                                     self.COORDS, scale, BASEMAP)
        doc_big = render_top30_map(ranked_of([("0b", "GB", "B", 1000)]),
                                   self.COORDS, scale, BASEMAP)
        a1 = area_of(svg_circles(doc_small.svg, "bubble")[0])
        a2 = area_of(svg_circles(doc_big.svg, "bubble")[0])
        assert a1 == pytest.approx(600.0, rel=1e-6)
        assert a2 == pytest.approx(600.0, rel=1e-6)

    def test_areas_proportional_within_panel(self):
        scale = BubbleScale("per_panel", reference_area=600.0)
        doc = render_top30_map(ranked_of([("0a", "US", "A", 30), ("0b", "GB", "B", 10)]),
                               self.COORDS, scale, BASEMAP)
        by_ror = {c["data-ror"]: c for c in svg_circles(doc.svg, "bubble")}
        assert area_of(by_ror["0a"]) / area_of(by_ror["0b"]) == pytest.approx(3.0, rel=1e-6)

    def test_empty_ranking_rejected(self):
        scale = BubbleScale("per_panel")
        with pytest.raises(EmptyFigureError):
            render_top30_map(ranked_of([]), self.COORDS, scale, BASEMAP)


class TestPartyMatrixFigure:
    def test_fifteen_glyphs(self):
        matrix = PartyMatrix()
        matrix.add("US", "CN", 3)
        doc = render_party_matrix(matrix)
        glyphs = svg_circles(doc.svg, "cell-bubble") + svg_circles(doc.svg, "zero-dot")
        assert len(glyphs) == 15

    def test_zero_cells_are_small_dots(self):
        doc = render_party_matrix(PartyMatrix())
        assert len(svg_circles(doc.svg, "zero-dot")) == 15
        assert svg_circles(doc.svg, "cell-bubble") == []

    def test_area_linear_in_count(self):
        matrix = PartyMatrix()
        matrix.add("US", "CN", 1)
        matrix.add("US", "JP", 4)
        doc = render_party_matrix(matrix)
        by_cell = {c["data-cell"]: c for c in svg_circles(doc.svg, "cell-bubble")}
        ratio = area_of(by_cell["US|JP"]) / area_of(by_cell["US|CN"])
        assert ratio == pytest.approx(4.0, rel=1e-6)


class TestDendrogramFigure:
    def make(self):
        d = np.array([[0.0, 0.2, 0.9], [0.2, 0.0, 0.8], [0.9, 0.8, 0.0]])
        dend = ward_cluster(DistanceMatrix(labels=["0aa", "0bb", "0cc"], d=d))
        works = {"0aa": 10, "0bb": 30, "0cc": 20}
        labels = {"0aa": ("US", "University of Northfield"),
                  "0bb": ("DE", "Institute for Analysis"),
                  "0cc": ("JP", "Tokyo Tech")}
        return dend, works, labels

    def test_structure(self):
        dend, works, labels = self.make()
        doc = render_dendrogram(dend, works, labels)
        assert len(svg_elements(doc.svg, "line", "bar")) == 3
        assert len(svg_elements(doc.svg, "path", "tree-arc")) == 2
        assert len(svg_elements(doc.svg, "text", "leaf-label")) == 3

    def test_ror_hyperlinks(self):
        dend, works, labels = self.make()
        doc = render_dendrogram(dend, works, labels)
        for ror in ("0aa", "0bb", "0cc"):
            assert f'href="https://ror.org/{ror}"' in doc.svg

    def test_bar_lengths_linear(self):
        dend, works, labels = self.make()
        doc = render_dendrogram(dend, works, labels)
        bars = {b["data-ror"]: b for b in svg_elements(doc.svg, "line", "bar")}

        def length(bar):
            return math.hypot(float(bar["x2"]) - float(bar["x1"]),
                              float(bar["y2"]) - float(bar["y1"]))

        assert length(bars["0bb"]) / length(bars["0aa"]) == pytest.approx(3.0, rel=1e-6)

    def test_country_prefix_in_labels(self):
        dend, works, labels = self.make()
        doc = render_dendrogram(dend, works, labels)
        assert "US: U. Northfield" in doc.svg
        assert "DE: Inst for Analysis" in doc.svg

    def test_missing_metadata_placeholder(self, caplog):
        dend, works, labels = self.make()
        del labels["0cc"]
        with caplog.at_level("WARNING"):
            doc = render_dendrogram(dend, works, labels)
        assert "??: 0cc" in doc.svg
        assert any("0cc" in m for m in caplog.messages)


class TestAbbreviation:
    @pytest.mark.parametrize("name,expected", [
        ("University of Tokyo", "U. Tokyo"),
        ("National Laboratory for X", "NL for X"),
        ("Institute for Advanced Study", "Inst for Advanced Study"),
        ("Institution of Engineers", "Inst of Engineers"),
        ("Science and Technology Facility", "Sci and Tech Facility"),
        ("Plain College", "Plain College"),
    ])
    def test_rules(self, name, expected):
        assert abbreviate_name(name) == expected

    def test_longest_match_wins(self):
        # "University of" must beat any shorter overlapping rule
        assert abbreviate_name("University of Science") == "U. Sci"

    def test_word_boundaries_respected(self):
        assert abbreviate_name("Sciences Department") == "Sciences Department"

    def test_idempotent_over_fixture_names(self):
        from sciatlas.corpus import generate_fixture
        corpus = generate_fixture(seed=9, n_institutions=50, n_works=1)
        for inst in corpus.institutions.values():
            once = abbreviate_name(inst.name)
            assert abbreviate_name(once) == once

    def test_custom_dictionary(self):
        assert abbreviate_name("Max Planck Society", [("Max Planck", "MP")]) == "MP Society"


class TestTop100Table:
    def test_tie_order_and_shared_rank(self):
        ranked = ranked_of([])
        ranked.entries = [
            RankedEntry(1, "0de", "DE", "X Institute", 10),
            RankedEntry(1, "0us", "US", "A Institute", 10),
            RankedEntry(3, "0jp", "JP", "B Institute", 4),
        ]
        table = emit_top100_table(ranked)
        lines = table.csv_text.strip().splitlines()
        assert lines[0] == "rank,country,institution,works"
        assert lines[1].startswith("1,DE,")
        assert lines[2].startswith("1,US,")
        assert lines[3].startswith("3,JP,")

    def test_abbreviation_applied(self):
        ranked = ranked_of([("0a", "JP", "University of Tokyo", 50)])
        table = emit_top100_table(ranked)
        assert "U. Tokyo" in table.csv_text
        assert "U. Tokyo" in table.markdown_text

    def test_provenance_header(self):
        ranked = ranked_of([("0a", "JP", "X", 1)])
        table = emit_top100_table(ranked, provenance="snapshot xyz")
        assert table.csv_text.startswith("# snapshot xyz\n")
        assert table.markdown_text.startswith("<!-- snapshot xyz -->")

    def test_fewer_than_100_lists_all(self):
        ranked = ranked_of([("0a", "JP", "X", 3), ("0b", "US", "Y", 1)])
        table = emit_top100_table(ranked)
        assert table.metadata["rows"] == 2


class TestBubbleScale:
    def test_mode_validation(self):
        with pytest.raises(ValueError):
            BubbleScale("bogus")

    def test_positive_constants(self):
        with pytest.raises(ValueError):
            BubbleScale("global", area_per_work=0)

    def test_area_not_radius(self):
        scale = BubbleScale("global", area_per_work=3.0)
        assert scale.area(10, 10) == 30.0
        assert scale.radius(10, 10) == pytest.approx(math.sqrt(30.0 / math.pi))
