"""OSM data model: XML / Overpass JSON parsing and geometry assembly.

Two ingestion paths (OSM XML v0.6 and Overpass API JSON) produce the same
:class:`OsmGraph`; :func:`assemble_features` then turns the graph into
tagged point / polyline / polygon features, resolving multipolygon and
administrative-boundary relations into polygons with holes.
"""

from __future__ import annotations

import json
import logging
import xml.parsers.expat
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Union

import requests

log = logging.getLogger(__name__)

# Tag keys that turn a closed way into an area rather than a loop road.
AREA_TAG_KEYS = ("building", "landuse", "leisure", "amenity")


class OsmParseError(ValueError):
    """Malformed OSM XML; carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: Optional[int] = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class OverpassFormatError(ValueError):
    """Overpass JSON response missing the expected structure."""


class TransportError(RuntimeError):
    """HTTP-level failure talking to an Overpass endpoint."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class TransportTimeout(TransportError):
    """The Overpass endpoint did not answer within the timeout."""


class RelationMember(NamedTuple):
    type: str
    ref: int
    role: str


@dataclass
class OsmNode:
    id: int
    lat: float
    lon: float
    tags: dict[str, str] = field(default_factory=dict)


@dataclass
class OsmWay:
    id: int
    node_ids: list[int] = field(default_factory=list)
    tags: dict[str, str] = field(default_factory=dict)

    @property
    def is_closed(self) -> bool:
        return len(self.node_ids) >= 4 and self.node_ids[0] == self.node_ids[-1]


@dataclass
class OsmRelation:
    id: int
    members: list[RelationMember] = field(default_factory=list)
    tags: dict[str, str] = field(default_factory=dict)


@dataclass
class Reject:
    """One rejected element for the JSON-lines rejects report."""

    kind: str
    id: int
    reason: str

    def to_json(self) -> dict:
        return {"kind": self.kind, "id": self.id, "reason": self.reason}


@dataclass
class OsmGraph:
    """Parsed OSM elements, keyed by id per element kind."""

    nodes: dict[int, OsmNode] = field(default_factory=dict)
    ways: dict[int, OsmWay] = field(default_factory=dict)
    relations: dict[int, OsmRelation] = field(default_factory=dict)
    rejects: list[Reject] = field(default_factory=list)
    skipped_kinds: int = 0

    def merge(self, other: "OsmGraph") -> "OsmGraph":
        """Union of two graphs; other's elements win on id collision."""
        self.nodes.update(other.nodes)
        self.ways.update(other.ways)
        self.relations.update(other.relations)
        self.rejects.extend(other.rejects)
        self.skipped_kinds += other.skipped_kinds
        return self


# --------------------------------------------------------------------------
# Geometries (lat/lon space) and features


@dataclass
class Point:
    lat: float
    lon: float


@dataclass
class Polyline:
    vertices: list[tuple[float, float]]

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("polyline needs at least 2 vertices")


@dataclass
class Polygon:
    """Outer ring plus holes; rings are closed (first vertex == last)."""

    outer: list[tuple[float, float]]
    holes: list[list[tuple[float, float]]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.outer) < 4 or self.outer[0] != self.outer[-1]:
            raise ValueError("outer ring must be closed with >= 4 vertices")


Geometry = Union[Point, Polyline, Polygon]


@dataclass
class Feature:
    geometry: Geometry
    tags: dict[str, str]
    source_id: str


@dataclass
class FeatureSet:
    features: list[Feature] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)

    def __iter__(self) -> Iterator[Feature]:
        return iter(self.features)

    def __len__(self) -> int:
        return len(self.features)


def write_rejects(path: str | Path, rejects: list[Reject]) -> None:
    """Write the rejects report as JSON lines {kind, id, reason}."""
    with open(path, "w", encoding="utf-8") as fh:
        for reject in rejects:
            fh.write(json.dumps(reject.to_json(), ensure_ascii=False) + "\n")


# --------------------------------------------------------------------------
# Parsing

_KNOWN_SKIP = {"osm", "bounds", "note", "meta", "remark"}


def parse_osm_xml(data: bytes) -> OsmGraph:
    """Parse OSM XML v0.6 into an :class:`OsmGraph`.

    Unknown element kinds are skipped and counted; nodes without usable
    coordinates are rejected into the graph's rejects list.
    """
    graph = OsmGraph()
    state: dict = {"current": None, "kind": None, "depth": 0}

    def start(name, attrs):
        state["depth"] += 1
        if state["depth"] == 2:
            if name == "node":
                state["kind"] = "node"
                state["current"] = {"attrs": attrs, "tags": {}}
            elif name == "way":
                state["kind"] = "way"
                state["current"] = {"attrs": attrs, "tags": {}, "nds": []}
            elif name == "relation":
                state["kind"] = "relation"
                state["current"] = {"attrs": attrs, "tags": {}, "members": []}
            elif name not in _KNOWN_SKIP:
                graph.skipped_kinds += 1
        elif state["depth"] == 3 and state["current"] is not None:
            if name == "tag":
                state["current"]["tags"][attrs.get("k", "")] = attrs.get("v", "")
            elif name == "nd":
                state["current"]["nds"].append(int(attrs["ref"]))
            elif name == "member":
                state["current"]["members"].append(
                    RelationMember(attrs.get("type", ""), int(attrs["ref"]),
                                   attrs.get("role", ""))
                )

    def end(name):
        state["depth"] -= 1
        if state["depth"] != 1 or state["current"] is None:
            return
        current, kind = state["current"], state["kind"]
        state["current"] = state["kind"] = None
        attrs = current["attrs"]
        elem_id = int(attrs.get("id", 0))
        if kind == "node":
            try:
                lat, lon = float(attrs["lat"]), float(attrs["lon"])
            except (KeyError, ValueError):
                graph.rejects.append(Reject("node", elem_id, "missing or invalid lat/lon"))
                return
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                graph.rejects.append(Reject("node", elem_id, "lat/lon out of range"))
                return
            graph.nodes[elem_id] = OsmNode(elem_id, lat, lon, current["tags"])
        elif kind == "way":
            graph.ways[elem_id] = OsmWay(elem_id, current["nds"], current["tags"])
        elif kind == "relation":
            graph.relations[elem_id] = OsmRelation(elem_id, current["members"], current["tags"])

    parser = xml.parsers.expat.ParserCreate()
    parser.StartElementHandler = start
    parser.EndElementHandler = end
    try:
        parser.Parse(data, True)
    except xml.parsers.expat.ExpatError as exc:
        raise OsmParseError(
            f"malformed OSM XML at byte {parser.ErrorByteIndex}: {exc}",
            byte_offset=parser.ErrorByteIndex,
        ) from exc
    return graph


def parse_overpass_json(data: bytes) -> OsmGraph:
    """Parse an Overpass API JSON response into an :class:`OsmGraph`."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise OverpassFormatError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "elements" not in doc:
        raise OverpassFormatError('response has no "elements" array')

    graph = OsmGraph()
    for elem in doc["elements"]:
        kind = elem.get("type")
        elem_id = int(elem.get("id", 0))
        tags = {str(k): str(v) for k, v in elem.get("tags", {}).items()}
        if kind == "node":
            if "lat" not in elem or "lon" not in elem:
                graph.rejects.append(Reject("node", elem_id, "missing or invalid lat/lon"))
                continue
            lat, lon = float(elem["lat"]), float(elem["lon"])
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                graph.rejects.append(Reject("node", elem_id, "lat/lon out of range"))
                continue
            graph.nodes[elem_id] = OsmNode(elem_id, lat, lon, tags)
        elif kind == "way":
            graph.ways[elem_id] = OsmWay(elem_id, [int(n) for n in elem.get("nodes", [])], tags)
        elif kind == "relation":
            members = [
                RelationMember(str(m.get("type", "")), int(m.get("ref", 0)),
                               str(m.get("role", "")))
                for m in elem.get("members", [])
            ]
            graph.relations[elem_id] = OsmRelation(elem_id, members, tags)
        else:
            graph.skipped_kinds += 1
    return graph


# --------------------------------------------------------------------------
# Feature assembly


def _is_area_way(way: OsmWay) -> bool:
    if any(key in way.tags for key in AREA_TAG_KEYS):
        return True
    return way.tags.get("area") == "yes"


def _resolve_way(graph: OsmGraph, way: OsmWay) -> Optional[list[tuple[float, float]]]:
    coords = []
    for node_id in way.node_ids:
        node = graph.nodes.get(node_id)
        if node is None:
            return None
        coords.append((node.lat, node.lon))
    return coords


def _chain_rings(ways: list[OsmWay], graph: OsmGraph) -> Optional[list[list[tuple[float, float]]]]:
    """Chain member ways end-to-end into closed rings; None if any chain is open.

    Matching is by node id, and ways may be traversed in either direction.
    """
    segments = []
    for way in ways:
        coords = _resolve_way(graph, way)
        if coords is None:
            return None
        segments.append((list(way.node_ids), coords))

    rings: list[list[tuple[float, float]]] = []
    unused = list(range(len(segments)))
    while unused:
        idx = unused.pop(0)
        ids, coords = list(segments[idx][0]), list(segments[idx][1])
        while ids[0] != ids[-1]:
            for pos, j in enumerate(unused):
                jids, jcoords = segments[j]
                if jids[0] == ids[-1]:
                    ids.extend(jids[1:])
                    coords.extend(jcoords[1:])
                elif jids[-1] == ids[-1]:
                    ids.extend(reversed(jids[:-1]))
                    coords.extend(reversed(jcoords[:-1]))
                else:
                    continue
                unused.pop(pos)
                break
            else:
                return None
        if len(coords) < 4:
            return None
        rings.append(coords)
    return rings


def _bbox(coords) -> tuple[float, float, float, float]:
    lats = [c[0] for c in coords]
    lons = [c[1] for c in coords]
    return min(lats), min(lons), max(lats), max(lons)


def _bbox_contains(outer_box, inner_box) -> bool:
    return (outer_box[0] <= inner_box[0] and outer_box[1] <= inner_box[1]
            and outer_box[2] >= inner_box[2] and outer_box[3] >= inner_box[3])


def _assemble_relation(graph: OsmGraph, rel: OsmRelation) -> list[Polygon]:
    """Build polygons with holes from a multipolygon / boundary relation.

    Raises ValueError with a reason string when the relation cannot be
    assembled (missing members, unclosable chains, orphan holes).
    """
    outer_ways, inner_ways = [], []
    for member in rel.members:
        if member.type != "way":
            continue
        way = graph.ways.get(member.ref)
        if way is None:
            raise ValueError("missing member way")
        if member.role in ("outer", ""):
            outer_ways.append(way)
        elif member.role == "inner":
            inner_ways.append(way)

    if not outer_ways:
        raise ValueError("no outer members")
    outer_rings = _chain_rings(outer_ways, graph)
    if outer_rings is None:
        raise ValueError("unclosable outer ring chain")
    inner_rings = _chain_rings(inner_ways, graph) if inner_ways else []
    if inner_rings is None:
        raise ValueError("unclosable inner ring chain")

    outer_boxes = [_bbox(ring) for ring in outer_rings]
    holes_per_outer: list[list[list[tuple[float, float]]]] = [[] for _ in outer_rings]
    for ring in inner_rings:
        box = _bbox(ring)
        for i, outer_box in enumerate(outer_boxes):
            if _bbox_contains(outer_box, box):
                holes_per_outer[i].append(ring)
                break
        else:
            raise ValueError("inner ring outside every outer ring")

    return [Polygon(outer=ring, holes=holes_per_outer[i])
            for i, ring in enumerate(outer_rings)]


def assemble_features(graph: OsmGraph) -> FeatureSet:
    """Turn a parsed graph into tagged geometric features.

    Tagged nodes become points; tagged ways become polylines, or polygons
    when closed and area-tagged; multipolygon and administrative-boundary
    relations become polygons with holes. Incomplete or unclosable
    geometry is dropped into the rejects list rather than half-built.
    """
    out = FeatureSet()

    for node in graph.nodes.values():
        if node.tags:
            out.features.append(Feature(Point(node.lat, node.lon), dict(node.tags),
                                        f"node/{node.id}"))

    for way in graph.ways.values():
        if not way.tags:
            continue
        coords = _resolve_way(graph, way)
        if coords is None:
            out.rejects.append(Reject("way", way.id, "unresolved node refs"))
            continue
        if way.is_closed and _is_area_way(way):
            out.features.append(Feature(Polygon(outer=coords), dict(way.tags),
                                        f"way/{way.id}"))
        elif len(coords) >= 2:
            out.features.append(Feature(Polyline(coords), dict(way.tags),
                                        f"way/{way.id}"))
        else:
            out.rejects.append(Reject("way", way.id, "fewer than 2 resolvable vertices"))

    for rel in graph.relations.values():
        if rel.tags.get("type") != "multipolygon" and rel.tags.get("boundary") != "administrative":
            continue
        try:
            polygons = _assemble_relation(graph, rel)
        except ValueError as exc:
            out.rejects.append(Reject("relation", rel.id, str(exc)))
            continue
        # Relation tags win over member-way tags on key collision.
        merged: dict[str, str] = {}
        for member in rel.members:
            if member.type == "way" and member.role in ("outer", ""):
                way = graph.ways.get(member.ref)
                if way is not None:
                    merged.update(way.tags)
        merged.update(rel.tags)
        for polygon in polygons:
            out.features.append(Feature(polygon, dict(merged), f"relation/{rel.id}"))

    return out


# --------------------------------------------------------------------------
# Overpass transport


def fetch_overpass(query: str, endpoint: str, timeout: float = 180.0,
                   session=None) -> bytes:
    """POST an Overpass QL query and return the raw response body."""
    http = session or requests
    try:
        response = http.post(endpoint, data={"data": query}, timeout=timeout)
    except requests.Timeout as exc:
        raise TransportTimeout(f"overpass request timed out after {timeout}s") from exc
    except requests.RequestException as exc:
        raise TransportError(f"overpass request failed: {exc}") from exc
    if response.status_code != 200:
        raise TransportError(
            f"overpass endpoint returned HTTP {response.status_code}",
            status=response.status_code,
        )
    return response.content
