from __future__ import annotations

import xml.etree.ElementTree as ET

import pytest

from sciatlas.corpus import Corpus, Institution, Work

SVG_NS = "{http://www.w3.org/2000/svg}"


def svg_circles(svg_text: str, cls: str | None = None) -> list[dict]:
    """All <circle> elements (attribute dicts) in an SVG document, optionally
    filtered by class."""
    root = ET.fromstring(svg_text)
    out = []
    for el in root.iter(SVG_NS + "circle"):
        if cls is None or el.get("class") == cls:
            out.append(dict(el.attrib))
    return out


def svg_elements(svg_text: str, tag: str, cls: str | None = None) -> list[dict]:
    root = ET.fromstring(svg_text)
    out = []
    for el in root.iter(SVG_NS + tag):
        if cls is None or el.get("class") == cls:
            out.append(dict(el.attrib))
    return out


def make_institution(ror: str, country: str = "US", name: str = "", lat: float = 0.0,
                     lon: float = 0.0) -> Institution:
    return Institution(ror=ror, openalex_id=f"I{abs(hash(ror)) % 10**6}",
                       name=name or f"Org {ror}", country=country, lat=lat, lon=lon)


@pytest.fixture
def tiny_corpus() -> Corpus:
    """Three institutions, four works, one discipline concept."""
    insts = {
        "0aaaa0001": make_institution("0aaaa0001", "US", "University of Northfield"),
        "0bbbb0002": make_institution("0bbbb0002", "DE", "Institute for Analysis", lat=50.0, lon=8.0),
        "0cccc0003": make_institution("0cccc0003", "JP", "Tokyo Science Center", lat=35.0, lon=139.0),
    }
    works = [
        Work("W1", 1985, frozenset({"C1"}), frozenset({"0aaaa0001", "0bbbb0002"})),
        Work("W2", 1986, frozenset({"C1"}), frozenset({"0aaaa0001", "0bbbb0002", "0cccc0003"})),
        Work("W3", 1987, frozenset({"C1"}), frozenset({"0aaaa0001"})),
        Work("W4", 1988, frozenset({"C1"}), frozenset()),
    ]
    return Corpus(discipline="Testing", works=works, institutions=insts)
