"""Quantitative description of one circular area from a feature set.

The extractors here follow two membership rules on purpose: whole things
(amenities, the building *count*) are in or out by their representative
point, while surface shares (building coverage, landuse / leisure
percentages) use areas clipped to the circle. Percent denominators are
the true circle area, so clipped content can approach but never exceed
100%.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from . import geo
from .geo import CircleSpec, GeoConfig
from .osm import Feature, FeatureSet, Point, Polygon, Polyline
from .util import round_half_up

log = logging.getLogger(__name__)

DEFAULT_EXCLUDED_LANDUSE = frozenset({"residential"})


@dataclass(frozen=True)
class DescriptorConfig:
    """Tunables for what ends up in an area description."""

    radius_m: float = 300.0
    coverage_threshold: float = 0.02
    province_admin_level: int = 4
    district_admin_level: int = 6
    road_key: str = "highway"
    rail_key: str = "railway"
    excluded_landuse: frozenset[str] = DEFAULT_EXCLUDED_LANDUSE
    geo: GeoConfig = GeoConfig()

    def __post_init__(self):
        if not (0.0 < self.coverage_threshold < 1.0):
            raise ValueError(f"coverage_threshold must be in (0, 1), got {self.coverage_threshold}")
        if self.province_admin_level == self.district_admin_level:
            raise ValueError("province and district admin levels must differ")

    @property
    def threshold_pct(self) -> int:
        return round_half_up(100.0 * self.coverage_threshold)


@dataclass(frozen=True)
class CoverageEntry:
    category: str  # "landuse" or "leisure"
    value: str
    pct: int


@dataclass
class AreaDescriptor:
    """Everything quantitative about one circular area."""

    center: tuple[float, float]
    radius_m: float
    provinces: list[str] = field(default_factory=list)
    districts: list[str] = field(default_factory=list)
    amenity_counts: dict[str, int] = field(default_factory=dict)
    building_count: int = 0
    building_coverage_pct: int = 0
    coverage_entries: list[CoverageEntry] = field(default_factory=list)
    road_lengths_m: dict[str, int] = field(default_factory=dict)
    rail_lengths_m: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not (0 <= self.building_coverage_pct <= 100):
            raise ValueError(f"building_coverage_pct out of range: {self.building_coverage_pct}")
        self.provinces = sorted(set(self.provinces))
        self.districts = sorted(set(self.districts))

    def to_dict(self) -> dict:
        """Stable JSON form; map keys sorted, field names as-is."""
        return {
            "center": {"lat": self.center[0], "lon": self.center[1]},
            "radius_m": self.radius_m,
            "provinces": list(self.provinces),
            "districts": list(self.districts),
            "amenity_counts": {k: self.amenity_counts[k] for k in sorted(self.amenity_counts)},
            "building_count": self.building_count,
            "building_coverage_pct": self.building_coverage_pct,
            "coverage_entries": [
                {"category": e.category, "value": e.value, "pct": e.pct}
                for e in self.coverage_entries
            ],
            "road_lengths_m": {k: self.road_lengths_m[k] for k in sorted(self.road_lengths_m)},
            "rail_lengths_m": {k: self.rail_lengths_m[k] for k in sorted(self.rail_lengths_m)},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AreaDescriptor":
        return cls(
            center=(doc["center"]["lat"], doc["center"]["lon"]),
            radius_m=doc["radius_m"],
            provinces=list(doc.get("provinces", [])),
            districts=list(doc.get("districts", [])),
            amenity_counts=dict(doc.get("amenity_counts", {})),
            building_count=doc.get("building_count", 0),
            building_coverage_pct=doc.get("building_coverage_pct", 0),
            coverage_entries=[
                CoverageEntry(e["category"], e["value"], e["pct"])
                for e in doc.get("coverage_entries", [])
            ],
            road_lengths_m=dict(doc.get("road_lengths_m", {})),
            rail_lengths_m=dict(doc.get("rail_lengths_m", {})),
        )


# --------------------------------------------------------------------------
# Geometry helpers


def representative_point(geometry) -> tuple[float, float]:
    """The single point deciding in/out membership for counting.

    Nodes are themselves; polylines and polygons use the plain average of
    their distinct vertices (the closing duplicate of a ring is dropped).
    """
    if isinstance(geometry, Point):
        return geometry.lat, geometry.lon
    if isinstance(geometry, Polyline):
        verts = geometry.vertices
        if len(verts) > 1 and verts[0] == verts[-1]:
            verts = verts[:-1]
    elif isinstance(geometry, Polygon):
        verts = geometry.outer[:-1]
    else:
        raise TypeError(f"unsupported geometry: {type(geometry)!r}")
    lat = sum(v[0] for v in verts) / len(verts)
    lon = sum(v[1] for v in verts) / len(verts)
    return lat, lon


def _inside_circle(geometry, circle: CircleSpec) -> bool:
    return geo.haversine(circle.center, representative_point(geometry)) <= circle.radius_m


def _circle_bbox(circle: CircleSpec, margin: float = 1.10) -> tuple[float, float, float, float]:
    lat0, lon0 = circle.center
    dlat = math.degrees(circle.radius_m * margin / geo.EARTH_RADIUS_M)
    dlon = math.degrees(circle.radius_m * margin /
                        (geo.EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return lat0 - dlat, lon0 - dlon, lat0 + dlat, lon0 + dlon


def _geometry_bbox(geometry) -> tuple[float, float, float, float]:
    if isinstance(geometry, Point):
        return geometry.lat, geometry.lon, geometry.lat, geometry.lon
    coords = geometry.vertices if isinstance(geometry, Polyline) else geometry.outer
    lats = [c[0] for c in coords]
    lons = [c[1] for c in coords]
    return min(lats), min(lons), max(lats), max(lons)


def _bbox_overlaps(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def _near_circle(feature: Feature, circle_box) -> bool:
    return _bbox_overlaps(_geometry_bbox(feature.geometry), circle_box)


def _polygon_intersection(feature_polygon: Polygon, circle: CircleSpec,
                          ngon, cfg: GeoConfig) -> float:
    outer = geo.project_coords(circle, feature_polygon.outer, cfg)
    holes = [geo.project_coords(circle, hole, cfg) for hole in feature_polygon.holes]
    return geo.intersection_area(outer, ngon, holes)


# --------------------------------------------------------------------------
# Extractors


def count_amenities(features: FeatureSet, circle: CircleSpec) -> dict[str, int]:
    """Count features per amenity tag value whose representative point is inside."""
    counts: dict[str, int] = {}
    for feature in features:
        value = feature.tags.get("amenity")
        if not value:
            continue
        if _inside_circle(feature.geometry, circle):
            counts[value] = counts.get(value, 0) + 1
    return {k: counts[k] for k in sorted(counts)}


def intersecting_admin(features: FeatureSet, circle: CircleSpec,
                       cfg: DescriptorConfig = DescriptorConfig()) -> tuple[list[str], list[str]]:
    """Names of administrative boundary polygons overlapping the circle.

    Returns (provinces, districts) at the configured admin levels, each
    alphabetically sorted and deduplicated. Unnamed boundaries are skipped
    with a warning.
    """
    ngon = geo.circle_ngon(circle, cfg.geo)
    provinces: set[str] = set()
    districts: set[str] = set()
    for feature in features:
        if feature.tags.get("boundary") != "administrative":
            continue
        if not isinstance(feature.geometry, Polygon):
            continue
        level = feature.tags.get("admin_level")
        if level not in (str(cfg.province_admin_level), str(cfg.district_admin_level)):
            continue
        name = feature.tags.get("name")
        if not name:
            log.warning("administrative boundary %s has no name tag; skipped",
                        feature.source_id)
            continue
        if _polygon_intersection(feature.geometry, circle, ngon, cfg.geo) > 0.0:
            if level == str(cfg.province_admin_level):
                provinces.add(name)
            else:
                districts.add(name)
    return sorted(provinces), sorted(districts)


def building_stats(features: FeatureSet, circle: CircleSpec,
                   cfg: DescriptorConfig = DescriptorConfig()) -> tuple[int, int]:
    """(number of buildings inside, integer percent of circle covered).

    The count is representative-point membership; coverage sums each
    building's clipped intersection area (buildings centered outside still
    contribute their overlapping sliver) over the true circle area.
    """
    ngon = geo.circle_ngon(circle, cfg.geo)
    circle_box = _circle_bbox(circle)
    count = 0
    covered = 0.0
    for feature in features:
        if "building" not in feature.tags or not isinstance(feature.geometry, Polygon):
            continue
        if not _near_circle(feature, circle_box):
            continue
        if _inside_circle(feature.geometry, circle):
            count += 1
        covered += _polygon_intersection(feature.geometry, circle, ngon, cfg.geo)
    pct = min(100, round_half_up(100.0 * covered / circle.area_m2))
    return count, pct


def coverage_percentages(features: FeatureSet, circle: CircleSpec,
                         cfg: DescriptorConfig = DescriptorConfig()) -> list[CoverageEntry]:
    """Landuse / leisure shares of the circle above the coverage threshold.

    Same-value polygons are aggregated before rounding and thresholding,
    so several small patches can jointly clear the gate.
    """
    ngon = geo.circle_ngon(circle, cfg.geo)
    circle_box = _circle_bbox(circle)
    areas: dict[tuple[str, str], float] = {}
    for feature in features:
        if not isinstance(feature.geometry, Polygon):
            continue
        if not _near_circle(feature, circle_box):
            continue
        for category in ("landuse", "leisure"):
            value = feature.tags.get(category)
            if not value:
                continue
            if category == "landuse" and value in cfg.excluded_landuse:
                continue
            area = _polygon_intersection(feature.geometry, circle, ngon, cfg.geo)
            if area > 0.0:
                areas[(category, value)] = areas.get((category, value), 0.0) + area

    entries = []
    for (category, value), area in areas.items():
        pct = round_half_up(100.0 * area / circle.area_m2)
        if pct >= cfg.threshold_pct:
            entries.append(CoverageEntry(category, value, min(100, pct)))
    entries.sort(key=lambda e: (-e.pct, e.value, e.category))
    return entries


def way_lengths(features: FeatureSet, circle: CircleSpec,
                cfg: DescriptorConfig = DescriptorConfig()) -> tuple[dict[str, int], dict[str, int]]:
    """Meters of road / rail per tag value inside the circle.

    Lengths are exact polyline-circle clips summed per value and rounded
    to whole meters; values that round to zero are omitted. A way tagged
    with both keys counts under both.
    """
    circle_box = _circle_bbox(circle)
    totals: dict[str, dict[str, float]] = {cfg.road_key: {}, cfg.rail_key: {}}
    for feature in features:
        if not isinstance(feature.geometry, Polyline):
            continue
        if not _near_circle(feature, circle_box):
            continue
        line = None
        for key in (cfg.road_key, cfg.rail_key):
            value = feature.tags.get(key)
            if not value:
                continue
            if line is None:
                line = geo.project_coords(circle, feature.geometry.vertices, cfg.geo)
            length = geo.clip_polyline_circle(line, circle.radius_m)
            if length > 0.0:
                totals[key][value] = totals[key].get(value, 0.0) + length

    def rounded(values: dict[str, float]) -> dict[str, int]:
        out = {}
        for value in sorted(values):
            meters = round_half_up(values[value])
            if meters > 0:
                out[value] = meters
        return out

    return rounded(totals[cfg.road_key]), rounded(totals[cfg.rail_key])


def build_descriptor(features: FeatureSet, circle: CircleSpec,
                     cfg: DescriptorConfig = DescriptorConfig()) -> AreaDescriptor:
    """Run every extractor and combine the results; order-independent."""
    provinces, districts = intersecting_admin(features, circle, cfg)
    building_count, building_pct = building_stats(features, circle, cfg)
    roads, rails = way_lengths(features, circle, cfg)
    return AreaDescriptor(
        center=circle.center,
        radius_m=circle.radius_m,
        provinces=provinces,
        districts=districts,
        amenity_counts=count_amenities(features, circle),
        building_count=building_count,
        building_coverage_pct=building_pct,
        coverage_entries=coverage_percentages(features, circle, cfg),
        road_lengths_m=roads,
        rail_lengths_m=rails,
    )
