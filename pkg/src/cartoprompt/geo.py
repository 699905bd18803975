"""Planar geometry over a local tangent-plane projection.

Everything here works in meters on a plane centered on a circular study
area: an equirectangular projection maps WGS84 coordinates to local XY,
and all distances, areas and clipping happen in that plane. The circle
itself is discretized as an inscribed regular n-gon so that polygon
intersections reduce to convex clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

EARTH_RADIUS_M = 6371008.8

# Local projection is only trusted out to a few kilometers.
MAX_RADIUS_M = 5000.0


class DegenerateGeometryError(ValueError):
    """Raised for rings with fewer than three distinct vertices."""


class XY(NamedTuple):
    """Planar point: meters east / north of the circle center."""

    x: float
    y: float


@dataclass(frozen=True)
class CircleSpec:
    """A circular study area: (lat, lon) center in degrees, radius in meters."""

    center: tuple[float, float]
    radius_m: float

    def __post_init__(self):
        lat, lon = self.center
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValueError(f"center out of range: {self.center}")
        if not (0.0 < self.radius_m <= MAX_RADIUS_M):
            raise ValueError(
                f"radius_m must be in (0, {MAX_RADIUS_M:g}], got {self.radius_m}"
            )

    @property
    def area_m2(self) -> float:
        """True (undiscretized) circle area, used as the percent denominator."""
        return math.pi * self.radius_m ** 2


@dataclass(frozen=True)
class GeoConfig:
    """Numerical knobs: earth radius and circle discretization."""

    earth_radius_m: float = EARTH_RADIUS_M
    ngon_segments: int = 64

    def __post_init__(self):
        if self.ngon_segments < 16 or self.ngon_segments % 2 != 0:
            raise ValueError(
                f"ngon_segments must be an even integer >= 16, got {self.ngon_segments}"
            )


def project_local(circle: CircleSpec, p: tuple[float, float],
                  cfg: GeoConfig = GeoConfig()) -> XY:
    """Project a (lat, lon) point to planar meters relative to the circle center.

    Equirectangular tangent plane: x = R*cos(lat0)*dlon, y = R*dlat, with
    angles in radians. Valid for points within ~10 km of the center.
    """
    lat0, lon0 = circle.center
    r = cfg.earth_radius_m
    x = r * math.cos(math.radians(lat0)) * math.radians(p[1] - lon0)
    y = r * math.radians(p[0] - lat0)
    return XY(x, y)


def unproject_local(circle: CircleSpec, xy: tuple[float, float],
                    cfg: GeoConfig = GeoConfig()) -> tuple[float, float]:
    """Exact inverse of :func:`project_local`; returns (lat, lon) degrees."""
    lat0, lon0 = circle.center
    r = cfg.earth_radius_m
    lat = lat0 + math.degrees(xy[1] / r)
    lon = lon0 + math.degrees(xy[0] / (r * math.cos(math.radians(lat0))))
    return lat, lon


def project_coords(circle: CircleSpec, coords: Sequence[tuple[float, float]],
                   cfg: GeoConfig = GeoConfig()) -> np.ndarray:
    """Project a sequence of (lat, lon) pairs to an (n, 2) XY array."""
    arr = np.asarray(coords, dtype=float)
    lat0, lon0 = circle.center
    r = cfg.earth_radius_m
    out = np.empty_like(arr)
    out[:, 0] = r * math.cos(math.radians(lat0)) * np.radians(arr[:, 1] - lon0)
    out[:, 1] = r * np.radians(arr[:, 0] - lat0)
    return out


def haversine(p1: tuple[float, float], p2: tuple[float, float],
              earth_radius_m: float = EARTH_RADIUS_M) -> float:
    """Great-circle distance in meters between two (lat, lon) points."""
    lat1, lon1 = map(math.radians, p1)
    lat2, lon2 = map(math.radians, p2)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * earth_radius_m * math.asin(min(1.0, math.sqrt(a)))


def _as_closed_ring(ring) -> np.ndarray:
    """Normalize to a closed (first == last) float array; validate vertex count."""
    arr = np.asarray(ring, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DegenerateGeometryError(f"ring must be an (n, 2) array, got shape {arr.shape}")
    if len(arr) >= 2 and np.array_equal(arr[0], arr[-1]):
        distinct = len(arr) - 1
    else:
        distinct = len(arr)
        arr = np.vstack([arr, arr[:1]])
    if distinct < 3:
        raise DegenerateGeometryError(
            f"ring needs at least 3 distinct vertices, got {distinct}"
        )
    return arr


def ring_area(ring) -> float:
    """Unsigned shoelace area of one ring (open or closed vertex list)."""
    arr = _as_closed_ring(ring)
    x, y = arr[:-1, 0], arr[:-1, 1]
    xn, yn = arr[1:, 0], arr[1:, 1]
    return abs(float(np.sum(x * yn - xn * y))) / 2.0


def polygon_area(outer, holes: Iterable = ()) -> float:
    """Area of a polygon with holes: outer ring minus each hole ring."""
    area = ring_area(outer)
    for hole in holes:
        area -= ring_area(hole)
    return max(0.0, area)


def circle_ngon(circle: CircleSpec, cfg: GeoConfig = GeoConfig()) -> np.ndarray:
    """Regular n-gon inscribed in the circle, counterclockwise, closed, at origin."""
    n = cfg.ngon_segments
    theta = 2.0 * np.pi * np.arange(n + 1) / n
    ring = np.column_stack([np.cos(theta), np.sin(theta)]) * circle.radius_m
    ring[-1] = ring[0]
    return ring


def clip_polyline_circle(line, radius_m: float) -> float:
    """Total length of the polyline portions inside (or on) the origin circle.

    Each segment p + t*d, t in [0, 1] is intersected with |q| <= r exactly
    by solving the quadratic |p + t*d|^2 = r^2.
    """
    arr = np.asarray(line, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 2:
        return 0.0
    p = arr[:-1]
    d = arr[1:] - p
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", p, d)
    c = np.einsum("ij,ij->i", p, p) - radius_m ** 2
    total = 0.0
    disc = b * b - 4.0 * a * c
    valid = (a > 0.0) & (disc > 0.0)
    if not np.any(valid):
        return 0.0
    sq = np.sqrt(disc[valid])
    av, bv = a[valid], b[valid]
    t0 = np.clip((-bv - sq) / (2.0 * av), 0.0, 1.0)
    t1 = np.clip((-bv + sq) / (2.0 * av), 0.0, 1.0)
    total = float(np.sum(np.sqrt(av) * np.maximum(0.0, t1 - t0)))
    return total


def polyline_length(line) -> float:
    """Euclidean length of a polyline in the plane."""
    arr = np.asarray(line, dtype=float)
    if arr.ndim != 2 or len(arr) < 2:
        return 0.0
    return float(np.sum(np.hypot(*(arr[1:] - arr[:-1]).T)))


def clip_ring_convex(ring, clip_ring) -> np.ndarray:
    """Sutherland-Hodgman clip of an arbitrary ring against a convex CCW ring.

    Returns the clipped ring as a closed array; empty array if disjoint.
    Only valid when the clip ring is convex; the subject may be concave
    (zero-width bridges a concave subject can produce do not affect area).
    """
    subject = [tuple(v) for v in _as_closed_ring(ring)[:-1]]
    clip = [tuple(v) for v in _as_closed_ring(clip_ring)[:-1]]

    output = subject
    cx1, cy1 = clip[-1]
    for cx2, cy2 in clip:
        if not output:
            break
        ex, ey = cx2 - cx1, cy2 - cy1
        inputs = output
        output = []
        sx, sy = inputs[-1]
        s_inside = ex * (sy - cy1) - ey * (sx - cx1) >= 0.0
        for px, py in inputs:
            p_inside = ex * (py - cy1) - ey * (px - cx1) >= 0.0
            if p_inside != s_inside:
                # Intersection of segment (s, p) with the clip edge line.
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (cy1 - sy) - ey * (cx1 - sx)) / denom
                    output.append((sx + t * dx, sy + t * dy))
            if p_inside:
                output.append((px, py))
            sx, sy, s_inside = px, py, p_inside
        cx1, cy1 = cx2, cy2

    if len(output) < 3:
        return np.empty((0, 2), dtype=float)
    arr = np.asarray(output, dtype=float)
    return np.vstack([arr, arr[:1]])


def intersection_area(outer, clip_ring, holes: Iterable = ()) -> float:
    """Area of (polygon with holes) intersected with a convex clip ring.

    Clips each ring separately against the convex ring and subtracts the
    clipped hole areas from the clipped outer area.
    """
    clipped = clip_ring_convex(outer, clip_ring)
    if len(clipped) == 0:
        return 0.0
    area = ring_area(clipped)
    for hole in holes:
        clipped_hole = clip_ring_convex(hole, clip_ring)
        if len(clipped_hole):
            area -= ring_area(clipped_hole)
    return max(0.0, area)
