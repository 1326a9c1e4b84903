"""Minimal deterministic SVG writer.

Attributes are emitted in sorted order and floats with fixed 6-decimal
formatting, so identical scenes serialize to identical bytes.
"""

from __future__ import annotations


def fmt(value) -> str:
    if isinstance(value, float):
        text = f"{value:.6f}"
        if text == "-0.000000":
            text = "0.000000"
        return text
    return str(value)


class SvgDoc:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self._parts: list[str] = []

    def comment(self, text: str) -> None:
        self._parts.append(f"<!-- {text.replace('--', '- -')} -->")

    def element(self, tag: str, text: str | None = None, **attrs) -> None:
        rendered = " ".join(
            f'{k.replace("_", "-")}="{fmt(v)}"' for k, v in sorted(attrs.items()) if v is not None
        )
        if text is None:
            self._parts.append(f"<{tag} {rendered}/>" if rendered else f"<{tag}/>")
        else:
            open_tag = f"<{tag} {rendered}>" if rendered else f"<{tag}>"
            self._parts.append(f"{open_tag}{_escape(text)}</{tag}>")

    def raw(self, markup: str) -> None:
        self._parts.append(markup)

    def circle(self, cx: float, cy: float, r: float, **attrs) -> None:
        self.element("circle", cx=cx, cy=cy, r=r, **attrs)

    def polyline(self, points: list[tuple[float, float]], **attrs) -> None:
        coords = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
        self._parts.append(
            "<polyline points=\"" + coords + "\" "
            + " ".join(f'{k.replace("_", "-")}="{fmt(v)}"' for k, v in sorted(attrs.items()) if v is not None)
            + "/>"
        )
    def polygon(self, points: list[tuple[float, float]], **attrs) -> None:
        coords = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
        self._parts.append(
            "<polygon points=\"" + coords + "\" "
            + " ".join(f'{k.replace("_", "-")}="{fmt(v)}"' for k, v in sorted(attrs.items()) if v is not None)
            + "/>"
        )

    def line(self, x1: float, y1: float, x2: float, y2: float, **attrs) -> None:
        self.element("line", x1=x1, y1=y1, x2=x2, y2=y2, **attrs)

    def text(self, x: float, y: float, content: str, **attrs) -> None:
        self.element("text", text=content, x=x, y=y, **attrs)

    def to_string(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'xmlns:xlink="http://www.w3.org/1999/xlink" '
            f'width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">'
        )
        return head + "\n" + "\n".join(self._parts) + "\n</svg>\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
