"""Regenerate the bundled demo-area fixture.

Builds an OSM XML file whose statistics reproduce the reference
description in data/demo_area_preprompt.txt exactly: 525 buildings
covering 31% of a 300 m circle, 150 amenity nodes over 19 categories,
one province and one district boundary, and the full road/rail length
table. The script verifies the rendered preprompt against the expected
text before writing anything.

Usage: python scripts/build_demo_area.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from cartoprompt.descriptor import build_descriptor
from cartoprompt.geo import CircleSpec, unproject_local
from cartoprompt.osm import assemble_features, parse_osm_xml
from cartoprompt.verbalize import render_preprompt

CENTER = (41.013, 28.955)
RADIUS_M = 300.0
CIRCLE = CircleSpec(center=CENTER, radius_m=RADIUS_M)

# 150 nodes total, keys already in alphabetical order.
AMENITY_INVENTORY = [
    ("atm", 3), ("bank", 2), ("bureau_de_change", 1), ("cafe", 18),
    ("clinic", 2), ("court_house", 1), ("dentist", 2), ("driving_school", 1),
    ("events_venue", 2), ("fast_food", 11), ("guest_house", 1), ("hospital", 3),
    ("parking", 11), ("pharmacy", 33), ("place_of_worship", 9),
    ("post_office", 1), ("restaurant", 43), ("school", 5), ("shower", 1),
]

# (tag key, tag value, length in meters, chord offset y in meters).
# Chords are horizontal, centered on x=0, and lie entirely inside the
# circle, so clipping returns the exact drawn length.
WAY_SEGMENTS = [
    ("highway", "residential", 500.0, 10.0),
    ("highway", "residential", 500.0, 20.0),
    ("highway", "residential", 500.0, 30.0),
    ("highway", "residential", 500.0, 40.0),
    ("highway", "residential", 500.0, 50.0),
    ("highway", "residential", 286.0, 60.0),
    ("highway", "tertiary", 500.0, -10.0),
    ("highway", "tertiary", 500.0, -20.0),
    ("highway", "tertiary", 5.0, -30.0),
    ("highway", "footway", 100.0, 70.0),
    ("highway", "pedestrian", 80.0, 80.0),
    ("highway", "primary_link", 44.0, -40.0),
    ("highway", "service", 283.0, -50.0),
    ("highway", "steps", 20.0, 90.0),
    ("highway", "tertiary_link", 62.0, -60.0),
    ("highway", "unclassified", 249.0, -70.0),
    ("railway", "platform", 289.0, 100.0),
]

# 23x23 grid of 13 m square buildings on a 14 m pitch, minus the four
# grid corners: 529 - 4 = 525 buildings, 525 * 169 m2 = 88725 m2, which
# is 31.38% of pi * 300^2 and prints as 31%.
BUILDING_GRID_HALF = 11
BUILDING_PITCH_M = 14.0
BUILDING_HALF_M = 6.5

GOLDEN_PREPROMPT = (
    "This is a circular area of radius of 300 meters that intersects province(s) "
    "of İstanbul and district(s) of Fatih. There are 3 atm(s), 2 bank(s), "
    "1 bureau_de_change(s), 18 cafe(s), 2 clinic(s), 1 court_house(s), 2 dentist(s), "
    "1 driving_school(s), 2 events_venue(s), 11 fast_food(s), 1 guest_house(s), "
    "3 hospital(s), 11 parking(s), 33 pharmacy(s), 9 place_of_worship(s), "
    "1 post_office(s), 43 restaurant(s), 5 school(s), 1 shower(s). There are 525 "
    "buildings which cover 31% of the total area. It contains 289 meters of "
    "platform rail, 100 meters of footway road, 80 meters of pedestrian road, "
    "44 meters of primary_link road, 2786 meters of residential road, 283 meters "
    "of service road, 20 meters of steps road, 1005 meters of tertiary road, "
    "62 meters of tertiary_link road, 249 meters of unclassified road."
)


class XmlBuilder:
    def __init__(self):
        self.lines = ['<?xml version="1.0" encoding="UTF-8"?>',
                      '<osm version="0.6" generator="build_demo_area">']
        self.next_node = 100000
        self.next_way = 500000
        self.next_rel = 900000

    def node_at_xy(self, x, y, tags=None):
        lat, lon = unproject_local(CIRCLE, (x, y))
        return self.node(lat, lon, tags)

    def node(self, lat, lon, tags=None):
        node_id = self.next_node
        self.next_node += 1
        if tags:
            self.lines.append(f'  <node id="{node_id}" lat="{lat!r}" lon="{lon!r}">')
            for k, v in tags.items():
                self.lines.append(f'    <tag k="{k}" v="{v}"/>')
            self.lines.append("  </node>")
        else:
            self.lines.append(f'  <node id="{node_id}" lat="{lat!r}" lon="{lon!r}"/>')
        return node_id

    def way(self, node_ids, tags):
        way_id = self.next_way
        self.next_way += 1
        self.lines.append(f'  <way id="{way_id}">')
        for ref in node_ids:
            self.lines.append(f'    <nd ref="{ref}"/>')
        for k, v in tags.items():
            self.lines.append(f'    <tag k="{k}" v="{v}"/>')
        self.lines.append("  </way>")
        return way_id

    def relation(self, members, tags):
        rel_id = self.next_rel
        self.next_rel += 1
        self.lines.append(f'  <relation id="{rel_id}">')
        for mtype, ref, role in members:
            self.lines.append(f'    <member type="{mtype}" ref="{ref}" role="{role}"/>')
        for k, v in tags.items():
            self.lines.append(f'    <tag k="{k}" v="{v}"/>')
        self.lines.append("  </relation>")
        return rel_id

    def square_ring(self, cx, cy, half):
        corners = [(cx - half, cy - half), (cx + half, cy - half),
                   (cx + half, cy + half), (cx - half, cy + half)]
        ids = [self.node_at_xy(x, y) for x, y in corners]
        return ids + [ids[0]]

    def to_bytes(self):
        return ("\n".join(self.lines) + "\n</osm>\n").encode("utf-8")


def build_xml() -> bytes:
    xml = XmlBuilder()

    for i in range(-BUILDING_GRID_HALF, BUILDING_GRID_HALF + 1):
        for j in range(-BUILDING_GRID_HALF, BUILDING_GRID_HALF + 1):
            if abs(i) == BUILDING_GRID_HALF and abs(j) == BUILDING_GRID_HALF:
                continue
            ring = xml.square_ring(i * BUILDING_PITCH_M, j * BUILDING_PITCH_M,
                                   BUILDING_HALF_M)
            xml.way(ring, {"building": "yes"})

    for key, value, length, y in WAY_SEGMENTS:
        a = xml.node_at_xy(-length / 2.0, y)
        b = xml.node_at_xy(length / 2.0, y)
        xml.way([a, b], {key: value})

    k = 0
    for value, count in AMENITY_INVENTORY:
        for _ in range(count):
            xml.node_at_xy(-149.0 + 2.0 * k, 170.0, {"amenity": value})
            k += 1

    # Province ring from three open ways, exercising ring chaining.
    pa = xml.node_at_xy(-2000.0, -2000.0)
    pb = xml.node_at_xy(2000.0, -2000.0)
    pc = xml.node_at_xy(2000.0, 2000.0)
    pd = xml.node_at_xy(-2000.0, 2000.0)
    w1 = xml.way([pa, pb], {})
    w2 = xml.way([pb, pc, pd], {})
    w3 = xml.way([pd, pa], {})
    xml.relation(
        [("way", w1, "outer"), ("way", w2, "outer"), ("way", w3, "outer")],
        {"boundary": "administrative", "admin_level": "4", "name": "İstanbul",
         "type": "boundary"},
    )

    district_ring = xml.square_ring(0.0, 0.0, 1500.0)
    dw = xml.way(district_ring, {})
    xml.relation(
        [("way", dw, "outer")],
        {"boundary": "administrative", "admin_level": "6", "name": "Fatih",
         "type": "boundary"},
    )

    return xml.to_bytes()


def main() -> int:
    data = build_xml()
    features = assemble_features(parse_osm_xml(data))
    rendered = render_preprompt(build_descriptor(features, CIRCLE))
    if rendered != GOLDEN_PREPROMPT:
        print("FIXTURE MISMATCH")
        print("expected:", GOLDEN_PREPROMPT)
        print("rendered:", rendered)
        return 1

    out_dir = Path(__file__).resolve().parents[1] / "src" / "cartoprompt" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "demo_area.osm.xml").write_bytes(data)
    (out_dir / "demo_area_preprompt.txt").write_text(GOLDEN_PREPROMPT + "\n",
                                                     encoding="utf-8")
    print(f"wrote {out_dir / 'demo_area.osm.xml'} ({len(data)} bytes)")
    print(f"wrote {out_dir / 'demo_area_preprompt.txt'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
