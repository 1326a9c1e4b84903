"""Great-circle geometry for map links: spherical interpolation along the
minor arc, with antimeridian splitting for drawing."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import AntipodalArcError, DegeneratePathError

ANTIPODAL_TOL_RAD = 1e-9


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 < self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")

    def to_unit_vector(self) -> tuple[float, float, float]:
        lat = math.radians(self.lat)
        lon = math.radians(self.lon)
        return (math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))


def _from_unit_vector(v: tuple[float, float, float]) -> GeoPoint:
    x, y, z = v
    lat = math.degrees(math.asin(max(-1.0, min(1.0, z))))
    lon = math.degrees(math.atan2(y, x))
    if lon <= -180.0:
        lon += 360.0
    return GeoPoint(lat=lat, lon=lon)


@dataclass
class GreatCirclePath:
    endpoints: tuple[GeoPoint, GeoPoint]
    samples: list[GeoPoint]
    split: bool = False

    def segments(self) -> list[list[GeoPoint]]:
        """Polyline segments for drawing, divided where longitude wraps at
        the antimeridian."""
        if not self.split:
            return [self.samples]
        segs: list[list[GeoPoint]] = [[self.samples[0]]]
        for prev, cur in zip(self.samples, self.samples[1:]):
            if abs(cur.lon - prev.lon) > 180.0:
                segs.append([])
            segs[-1].append(cur)
        return segs


def great_circle_points(a: GeoPoint, b: GeoPoint, n: int = 52) -> GreatCirclePath:
    """Interpolate ``n`` points (endpoints included) at equal angular spacing
    along the minor arc from ``a`` to ``b`` on the unit sphere.

    Antipodal endpoints have no unique arc and raise; coincident endpoints
    raise as degenerate.
    """
    if n < 2:
        raise ValueError("need at least 2 samples")
    if a == b:
        raise DegeneratePathError(f"coincident endpoints: {a} and {b}")
    va = a.to_unit_vector()
    vb = b.to_unit_vector()
    dot = max(-1.0, min(1.0, sum(x * y for x, y in zip(va, vb))))
    omega = math.acos(dot)
    if omega == 0.0:
        raise DegeneratePathError(f"numerically coincident endpoints: {a} and {b}")
    if math.pi - omega < ANTIPODAL_TOL_RAD:
        raise AntipodalArcError(f"antipodal endpoints: {a} and {b}")

    sin_omega = math.sin(omega)
    samples: list[GeoPoint] = []
    for i in range(n):
        t = i / (n - 1)
        fa = math.sin((1.0 - t) * omega) / sin_omega
        fb = math.sin(t * omega) / sin_omega
        v = tuple(fa * x + fb * y for x, y in zip(va, vb))
        samples.append(_from_unit_vector(v))
    # exact endpoints, avoiding round-trip drift
    samples[0] = a
    samples[-1] = b

    split = any(abs(q.lon - p.lon) > 180.0 for p, q in zip(samples, samples[1:]))
    return GreatCirclePath(endpoints=(a, b), samples=samples, split=split)
