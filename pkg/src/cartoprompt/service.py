"""HTTP service and pipeline configuration.

The service is a read-only facade over an ingested feature store: it
renders preprompts for clicked locations, forwards location questions to
a completion model with the `Area : ... Question : ... Answer :` prompt
grammar, and serves the precomputed embedding layer. CLI `describe` and
GET /v1/preprompt share one JSON renderer, so their bytes are identical.
"""

from __future__ import annotations

import asyncio
import dataclasses
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml
from fastapi import FastAPI, Request, Response
from fastapi.concurrency import run_in_threadpool
from fastapi.exceptions import RequestValidationError

from .client import TEACHER_TOKEN_ENV, ClientError, CompletionClient
from .descriptor import AreaDescriptor, DescriptorConfig, build_descriptor
from .geo import CircleSpec
from .osm import (
    Feature,
    FeatureSet,
    OsmGraph,
    Point,
    Polygon,
    Polyline,
    Reject,
    assemble_features,
    parse_osm_xml,
    parse_overpass_json,
)
from .verbalize import VerbalizerRules, render_preprompt

log = logging.getLogger(__name__)
access_log = logging.getLogger("cartoprompt.service.access")

MIN_RADIUS_M = 50.0
MAX_RADIUS_M = 2000.0
SNAPSHOT_VERSION = 1


def clamp_radius(radius_m: float) -> float:
    return min(MAX_RADIUS_M, max(MIN_RADIUS_M, radius_m))


# --------------------------------------------------------------------------
# Feature store


class SnapshotFormatError(ValueError):
    """Feature store snapshot file is not in the expected format."""


def _geometry_to_json(geometry) -> dict:
    if isinstance(geometry, Point):
        return {"type": "point", "coords": [geometry.lat, geometry.lon]}
    if isinstance(geometry, Polyline):
        return {"type": "polyline", "coords": [list(v) for v in geometry.vertices]}
    if isinstance(geometry, Polygon):
        return {"type": "polygon",
                "outer": [list(v) for v in geometry.outer],
                "holes": [[list(v) for v in hole] for hole in geometry.holes]}
    raise TypeError(f"unsupported geometry: {type(geometry)!r}")


def _geometry_from_json(doc: dict):
    kind = doc.get("type")
    if kind == "point":
        lat, lon = doc["coords"]
        return Point(lat, lon)
    if kind == "polyline":
        return Polyline([tuple(v) for v in doc["coords"]])
    if kind == "polygon":
        return Polygon(outer=[tuple(v) for v in doc["outer"]],
                       holes=[[tuple(v) for v in hole] for hole in doc["holes"]])
    raise SnapshotFormatError(f"unknown geometry type: {kind!r}")


class FeatureStore:
    """Immutable assembled features plus their data bounding box."""

    def __init__(self, features: FeatureSet,
                 bbox: Optional[tuple[float, float, float, float]] = None):
        self.features = features
        self.bbox = bbox if bbox is not None else self._compute_bbox(features)

    @staticmethod
    def _compute_bbox(features: FeatureSet):
        lats: list[float] = []
        lons: list[float] = []
        for feature in features:
            geometry = feature.geometry
            if isinstance(geometry, Point):
                coords = [(geometry.lat, geometry.lon)]
            elif isinstance(geometry, Polyline):
                coords = geometry.vertices
            else:
                coords = geometry.outer
            lats.extend(c[0] for c in coords)
            lons.extend(c[1] for c in coords)
        if not lats:
            return None
        return (min(lats), min(lons), max(lats), max(lons))

    def contains(self, lat: float, lon: float) -> bool:
        if self.bbox is None:
            return False
        return (self.bbox[0] <= lat <= self.bbox[2]
                and self.bbox[1] <= lon <= self.bbox[3])

    @classmethod
    def from_graph(cls, graph: OsmGraph) -> "FeatureStore":
        features = assemble_features(graph)
        # The store's rejects report covers both stages: elements the
        # parser dropped and features the assembler could not build.
        features.rejects = list(graph.rejects) + list(features.rejects)
        return cls(features)

    @classmethod
    def from_files(cls, paths) -> "FeatureStore":
        """Parse and merge OSM XML / Overpass JSON files into one store."""
        graph = OsmGraph()
        for path in paths:
            data = Path(path).read_bytes()
            if data.lstrip()[:1] == b"{":
                graph.merge(parse_overpass_json(data))
            else:
                graph.merge(parse_osm_xml(data))
        return cls.from_graph(graph)

    def save(self, path) -> None:
        doc = {
            "version": SNAPSHOT_VERSION,
            "bbox": list(self.bbox) if self.bbox else None,
            "features": [
                {"source_id": f.source_id, "tags": f.tags,
                 "geometry": _geometry_to_json(f.geometry)}
                for f in self.features
            ],
            "rejects": [r.to_json() for r in self.features.rejects],
        }
        Path(path).write_text(json.dumps(doc, ensure_ascii=False),
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeatureStore":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SnapshotFormatError(f"snapshot is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("version") != SNAPSHOT_VERSION:
            raise SnapshotFormatError("snapshot missing or unsupported version")
        features = FeatureSet(
            features=[
                Feature(geometry=_geometry_from_json(f["geometry"]),
                        tags=dict(f["tags"]), source_id=f["source_id"])
                for f in doc.get("features", [])
            ],
            rejects=[Reject(**r) for r in doc.get("rejects", [])],
        )
        bbox = tuple(doc["bbox"]) if doc.get("bbox") else None
        return cls(features, bbox=bbox)


# --------------------------------------------------------------------------
# Configuration


@dataclass
class TeacherConfig:
    endpoint: str = ""
    model: str = ""
    token_env: str = TEACHER_TOKEN_ENV
    temperature: float = 1.0
    pairs_per_request: int = 50
    rate_limit_per_minute: float = 20.0
    max_retries: int = 3


@dataclass
class CompletionConfig:
    endpoint: str = ""
    model: str = ""
    token_env: str = TEACHER_TOKEN_ENV
    max_tokens: Optional[int] = 256


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    max_concurrent_ask: int = 4
    store_path: str = "store.json"
    embeddings_path: str = "embeddings.geojson"


@dataclass
class PipelineConfig:
    source_files: list[str] = field(default_factory=list)
    overpass_endpoint: str = ""
    descriptor: DescriptorConfig = DescriptorConfig()
    rules: VerbalizerRules = VerbalizerRules()
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    completion: CompletionConfig = field(default_factory=CompletionConfig)
    split_fraction: float = 0.99
    split_seed: int = 0
    projection_method: str = "pca"
    projection_seed: int = 0
    serve: ServeConfig = field(default_factory=ServeConfig)

    def require_sources(self) -> None:
        if not self.source_files and not self.overpass_endpoint:
            raise ValueError("config needs source files or an overpass endpoint")


def load_config(path) -> PipelineConfig:
    """Build a PipelineConfig from a YAML file; unset keys keep defaults."""
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise ValueError("config root must be a mapping")

    cfg = PipelineConfig()
    sources = doc.get("sources", {}) or {}
    cfg.source_files = list(sources.get("files", []) or [])
    cfg.overpass_endpoint = sources.get("overpass_endpoint", "") or ""

    descriptor_kwargs = {}
    if "radius_m" in doc:
        descriptor_kwargs["radius_m"] = float(doc["radius_m"])
    if "coverage_threshold" in doc:
        descriptor_kwargs["coverage_threshold"] = float(doc["coverage_threshold"])
    levels = doc.get("admin_levels", {}) or {}
    if "province" in levels:
        descriptor_kwargs["province_admin_level"] = int(levels["province"])
    if "district" in levels:
        descriptor_kwargs["district_admin_level"] = int(levels["district"])
    if descriptor_kwargs:
        cfg.descriptor = DescriptorConfig(**descriptor_kwargs)

    for section, target in (("teacher", cfg.teacher), ("completion", cfg.completion)):
        for key, value in (doc.get(section, {}) or {}).items():
            if hasattr(target, key):
                setattr(target, key, value)

    split = doc.get("split", {}) or {}
    cfg.split_fraction = float(split.get("fraction", cfg.split_fraction))
    cfg.split_seed = int(split.get("seed", cfg.split_seed))

    projection = doc.get("projection", {}) or {}
    cfg.projection_method = projection.get("method", cfg.projection_method)
    cfg.projection_seed = int(projection.get("seed", cfg.projection_seed))

    for key, value in (doc.get("serve", {}) or {}).items():
        mapped = {"store": "store_path", "embeddings": "embeddings_path"}.get(key, key)
        if hasattr(cfg.serve, mapped):
            setattr(cfg.serve, mapped, value)
    return cfg


# --------------------------------------------------------------------------
# Shared describe rendering (CLI and HTTP must emit identical bytes)


def describe_location(store: FeatureStore, lat: float, lon: float, radius_m: float,
                      cfg: DescriptorConfig = DescriptorConfig(),
                      rules: VerbalizerRules = VerbalizerRules(),
                      ) -> tuple[AreaDescriptor, str]:
    circle = CircleSpec(center=(lat, lon), radius_m=radius_m)
    descriptor = build_descriptor(store.features, circle, cfg)
    return descriptor, render_preprompt(descriptor, rules)


def render_describe_json(descriptor: AreaDescriptor, preprompt: str) -> str:
    """One JSON document, trailing newline included.

    Both CLI `describe` and GET /v1/preprompt emit this string verbatim,
    which is what makes their outputs byte-identical.
    """
    payload = json.dumps({"descriptor": descriptor.to_dict(), "preprompt": preprompt},
                         ensure_ascii=False)
    return payload + "\n"


# --------------------------------------------------------------------------
# HTTP app


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> Response:
    return Response(content=json.dumps({"code": code, "message": message}),
                    status_code=status, media_type="application/json")


def create_app(store: FeatureStore,
               config: Optional[PipelineConfig] = None,
               completion_client: Optional[CompletionClient] = None) -> FastAPI:
    """Wire the three endpoints around an immutable store.

    A completion client may be injected for tests; otherwise one is built
    lazily from the config when /v1/ask is first used.
    """
    config = config or PipelineConfig()
    app = FastAPI(title="cartoprompt", docs_url=None, redoc_url=None)
    ask_semaphore = asyncio.Semaphore(config.serve.max_concurrent_ask)

    def get_completion_client() -> CompletionClient:
        nonlocal completion_client
        if completion_client is None:
            cc = config.completion
            if not cc.endpoint:
                raise ApiError(502, "upstream_error",
                               "no completion endpoint configured")
            completion_client = CompletionClient(
                endpoint=cc.endpoint, model=cc.model, token_env=cc.token_env)
        return completion_client

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error_response(400, "invalid_request", str(exc.errors()[:1]))

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(Exception)
    async def on_unexpected(request: Request, exc: Exception):
        log.exception("unhandled error for %s", request.url.path)
        return _error_response(500, "internal_error", "internal error")

    @app.middleware("http")
    async def access_logging(request: Request, call_next):
        start = time.monotonic()
        response = await call_next(request)
        access_log.info(json.dumps({
            "method": request.method, "path": request.url.path,
            "status": response.status_code,
            "duration_ms": round((time.monotonic() - start) * 1000.0, 2),
        }))
        return response

    def validated_circle(lat: float, lon: float, radius: Optional[float]):
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ApiError(400, "invalid_request",
                           f"coordinates out of range: lat={lat}, lon={lon}")
        if not store.contains(lat, lon):
            raise ApiError(422, "outside_coverage",
                           "location is outside the loaded data extent")
        radius_m = clamp_radius(radius if radius is not None
                                else config.descriptor.radius_m)
        return lat, lon, radius_m

    @app.get("/v1/preprompt")
    async def http_preprompt(lat: float, lon: float,
                             radius: Optional[float] = None) -> Response:
        lat, lon, radius_m = validated_circle(lat, lon, radius)
        cfg = config.descriptor
        if radius_m != cfg.radius_m:
            cfg = dataclasses.replace(cfg, radius_m=radius_m)
        descriptor, preprompt = describe_location(store, lat, lon, radius_m,
                                                  cfg, config.rules)
        return Response(content=render_describe_json(descriptor, preprompt),
                        media_type="application/json")

    @app.post("/v1/ask")
    async def http_ask(request: Request) -> Response:
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "invalid_request", "body must be JSON")
        if not isinstance(body, dict):
            raise ApiError(400, "invalid_request", "body must be a JSON object")
        question = str(body.get("question", "")).strip()
        if not question:
            raise ApiError(400, "invalid_request", "question must be nonempty")
        try:
            lat = float(body["lat"])
            lon = float(body["lon"])
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, "invalid_request", "lat and lon are required numbers")
        radius = body.get("radius_m")
        lat, lon, radius_m = validated_circle(
            lat, lon, float(radius) if radius is not None else None)

        _, preprompt = describe_location(store, lat, lon, radius_m,
                                         config.descriptor, config.rules)
        prompt = f"Area : {preprompt} Question : {question} Answer :"
        log.info("ask prompt: %s", prompt)

        client = get_completion_client()
        start = time.monotonic()
        async with ask_semaphore:
            try:
                reply = await run_in_threadpool(
                    client.complete, prompt, config.completion.max_tokens)
            except ClientError as exc:
                detail = f"upstream request failed: {exc}"
                if exc.status is not None:
                    detail = f"upstream returned HTTP {exc.status}"
                raise ApiError(502, "upstream_error", detail)
        latency_ms = round((time.monotonic() - start) * 1000.0, 2)
        return Response(
            content=json.dumps({"preprompt": preprompt,
                                "answer": reply.content.strip(),
                                "model": client.model,
                                "latency_ms": latency_ms}, ensure_ascii=False),
            media_type="application/json")

    @app.get("/v1/embeddings")
    async def http_embeddings(request: Request) -> Response:
        path = Path(config.serve.embeddings_path)
        if not path.exists():
            raise ApiError(404, "artifact_missing",
                           "no embedding artifact; run the embed command first")
        content = path.read_bytes()
        etag = '"' + hashlib.sha256(content).hexdigest() + '"'
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304, headers={"ETag": etag})
        return Response(content=content, media_type="application/geo+json",
                        headers={"ETag": etag})

    return app


def run_server(store: FeatureStore, config: PipelineConfig) -> None:
    import uvicorn

    app = create_app(store, config)
    uvicorn.run(app, host=config.serve.host, port=config.serve.port)


# Secrets stay in the environment; this helper only reports presence for
# startup diagnostics, never the value.
def token_available(token_env: str) -> bool:
    return bool(os.environ.get(token_env))
