"""Bundled demo data: a synthetic OSM extract with a known description.

The demo area is a 300 m circle whose statistics are engineered to be
exactly reproducible (see scripts/build_demo_area.py), which makes it
usable both as a quickstart dataset and as a regression anchor.
"""

from __future__ import annotations

from importlib import resources

from .osm import FeatureSet, assemble_features, parse_osm_xml

DEMO_AREA_CENTER = (41.013, 28.955)
DEMO_AREA_RADIUS_M = 300.0


def _data(name: str) -> bytes:
    return resources.files("cartoprompt.data").joinpath(name).read_bytes()


def demo_area_xml() -> bytes:
    """Raw OSM XML of the bundled demo area."""
    return _data("demo_area.osm.xml")


def demo_area_preprompt() -> str:
    """The reference preprompt text the demo area must render to."""
    return _data("demo_area_preprompt.txt").decode("utf-8").rstrip("\n")


def load_demo_features() -> FeatureSet:
    """Parse and assemble the demo area in one call."""
    return assemble_features(parse_osm_xml(demo_area_xml()))
