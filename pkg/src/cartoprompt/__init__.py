"""cartoprompt: verbal descriptions of circular OSM areas and everything downstream.

The pipeline: parse OpenStreetMap data, describe a 300 m circle around a
point as structured quantities, verbalize it into a preprompt, curate an
instruction dataset from preprompts through a teacher model, embed and
project preprompts into a colored 2D map layer, and serve live location
queries over HTTP.
"""

from .geo import CircleSpec, GeoConfig, XY
from .osm import (
    Feature,
    FeatureSet,
    OsmGraph,
    Point,
    Polygon,
    Polyline,
    assemble_features,
    fetch_overpass,
    parse_osm_xml,
    parse_overpass_json,
)
from .descriptor import AreaDescriptor, CoverageEntry, DescriptorConfig, build_descriptor
from .verbalize import VerbalizerRules, render_preprompt
from .curate import (
    CurationJob,
    Datapoint,
    Preprompt,
    QAPair,
    assemble_datapoint,
    parse_datapoint,
    run_curation,
    split_dataset,
)
from .embed import (
    Lexicon,
    ProjectionConfig,
    build_points,
    embed_text,
    emit_geojson,
    load_word_vectors,
    project_2d,
)
from .service import FeatureStore, PipelineConfig, create_app, load_config

__version__ = "0.1.0"

__all__ = [
    "AreaDescriptor",
    "CircleSpec",
    "CoverageEntry",
    "CurationJob",
    "Datapoint",
    "DescriptorConfig",
    "Feature",
    "FeatureSet",
    "FeatureStore",
    "GeoConfig",
    "Lexicon",
    "OsmGraph",
    "PipelineConfig",
    "Point",
    "Polygon",
    "Polyline",
    "Preprompt",
    "ProjectionConfig",
    "QAPair",
    "VerbalizerRules",
    "XY",
    "assemble_datapoint",
    "assemble_features",
    "build_descriptor",
    "build_points",
    "create_app",
    "embed_text",
    "emit_geojson",
    "fetch_overpass",
    "load_config",
    "load_word_vectors",
    "parse_datapoint",
    "parse_osm_xml",
    "parse_overpass_json",
    "project_2d",
    "render_preprompt",
    "run_curation",
    "split_dataset",
]
