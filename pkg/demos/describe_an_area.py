"""Walkthrough: from raw OSM XML to a verbal area description.

Uses the bundled demo extract (a dense Istanbul-like neighborhood), so it
runs offline. Each stage prints what it produced.

    python3 demos/describe_an_area.py
"""

from cartoprompt.datasets import DEMO_AREA_CENTER, DEMO_AREA_RADIUS_M, demo_area_xml
from cartoprompt.descriptor import DescriptorConfig, build_descriptor
from cartoprompt.geo import CircleSpec
from cartoprompt.osm import assemble_features, parse_osm_xml
from cartoprompt.verbalize import render_preprompt


def main():
    # Stage 1: parse. The graph holds raw nodes/ways/relations plus any
    # elements the parser had to drop.
    xml = demo_area_xml()
    graph = parse_osm_xml(xml)
    print(f"parsed {len(xml)} bytes of OSM XML")
    print(f"  nodes={len(graph.nodes)} ways={len(graph.ways)} "
          f"relations={len(graph.relations)} rejects={len(graph.rejects)}")

    # Stage 2: assemble geometry. Tagged nodes become points, ways become
    # polylines or polygons depending on their tags, multipolygon and
    # boundary relations become polygons with holes.
    features = assemble_features(graph)
    kinds = {}
    for feature in features:
        kinds[type(feature.geometry).__name__] = \
            kinds.get(type(feature.geometry).__name__, 0) + 1
    print(f"assembled {len(features)} features: {kinds}")

    # Stage 3: quantify a circular study area. Counts use representative
    # points, coverage and lengths use exact clipping against the circle.
    circle = CircleSpec(center=DEMO_AREA_CENTER, radius_m=DEMO_AREA_RADIUS_M)
    descriptor = build_descriptor(features, circle, DescriptorConfig())
    print(f"\ndescriptor for {circle.radius_m:.0f} m around {circle.center}:")
    print(f"  provinces={descriptor.provinces} districts={descriptor.districts}")
    print(f"  buildings={descriptor.building_count} "
          f"covering {descriptor.building_coverage_pct}%")
    print(f"  amenity kinds={len(descriptor.amenity_counts)} "
          f"total={sum(descriptor.amenity_counts.values())}")
    print(f"  road classes={sorted(descriptor.road_lengths_m)}")

    # Stage 4: verbalize. The fixed sentence template turns the numbers
    # into the preprompt a language model is conditioned on.
    preprompt = render_preprompt(descriptor)
    print("\npreprompt:")
    print(preprompt)


if __name__ == "__main__":
    main()
