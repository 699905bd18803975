"""HTTP service tests: store snapshots, config loading, endpoint contracts."""

import hashlib
import json
import logging

import pytest
from fastapi.testclient import TestClient

from cartoprompt.client import ClientError, Reply
from cartoprompt.datasets import (
    DEMO_AREA_CENTER,
    demo_area_preprompt,
    load_demo_features,
)
from cartoprompt.osm import Feature, FeatureSet, Point, Polygon, Polyline, Reject
from cartoprompt.service import (
    CompletionConfig,
    FeatureStore,
    PipelineConfig,
    ServeConfig,
    SnapshotFormatError,
    TeacherConfig,
    clamp_radius,
    create_app,
    describe_location,
    load_config,
    render_describe_json,
)

CENTER_LAT, CENTER_LON = DEMO_AREA_CENTER


def ring(a, b, c, d):
    return [a, b, c, d, a]


@pytest.fixture(scope="module")
def demo_store():
    return FeatureStore(load_demo_features())


@pytest.fixture(scope="module")
def demo_client(demo_store):
    app = create_app(demo_store)
    return TestClient(app, raise_server_exceptions=False)


class StubCompletion:
    """Stands in for the upstream completion model."""

    model = "stub-model"

    def __init__(self, content=" A residential area.", error=None):
        self.content = content
        self.error = error
        self.prompts = []

    def complete(self, prompt, max_tokens=None):
        self.prompts.append((prompt, max_tokens))
        if self.error is not None:
            raise self.error
        return Reply(content=self.content, retries=0)


class TestClampRadius:
    def test_inside_range_unchanged(self):
        assert clamp_radius(300.0) == 300.0

    def test_clamped_low(self):
        assert clamp_radius(3.0) == 50.0

    def test_clamped_high(self):
        assert clamp_radius(1e6) == 2000.0

    def test_boundaries(self):
        assert clamp_radius(50.0) == 50.0
        assert clamp_radius(2000.0) == 2000.0


class TestFeatureStore:
    def small_store(self):
        features = FeatureSet(
            features=[
                Feature(geometry=Point(41.0, 29.0), tags={"amenity": "cafe"},
                        source_id="node/1"),
                Feature(geometry=Polyline([(41.001, 29.0), (41.002, 29.003)]),
                        tags={"highway": "residential"}, source_id="way/2"),
                Feature(geometry=Polygon(
                    outer=ring((40.999, 28.999), (40.999, 29.001),
                               (41.0005, 29.001), (41.0005, 28.999)),
                    holes=[ring((40.9995, 28.9995), (40.9995, 29.0005),
                                (41.0, 29.0005), (41.0, 28.9995))]),
                    tags={"building": "yes"}, source_id="way/3"),
            ],
            rejects=[Reject(kind="node", id=7, reason="missing lat")],
        )
        return FeatureStore(features)

    def test_bbox_spans_all_geometry(self):
        store = self.small_store()
        assert store.bbox == (40.999, 28.999, 41.002, 29.003)

    def test_contains_inside_and_outside(self):
        store = self.small_store()
        assert store.contains(41.0, 29.0)
        assert not store.contains(41.1, 29.0)
        assert not store.contains(41.0, 28.0)

    def test_contains_boundary_inclusive(self):
        store = self.small_store()
        assert store.contains(40.999, 28.999)
        assert store.contains(41.002, 29.003)

    def test_empty_store_contains_nothing(self):
        store = FeatureStore(FeatureSet())
        assert store.bbox is None
        assert not store.contains(41.0, 29.0)

    def test_save_load_round_trip(self, tmp_path):
        store = self.small_store()
        path = tmp_path / "store.json"
        store.save(path)
        loaded = FeatureStore.load(path)
        assert loaded.bbox == pytest.approx(store.bbox)
        assert len(loaded.features) == len(store.features)
        for orig, back in zip(store.features, loaded.features):
            assert back.tags == orig.tags
            assert back.source_id == orig.source_id
            assert type(back.geometry) is type(orig.geometry)
        assert [r.to_json() for r in loaded.features.rejects] == \
            [r.to_json() for r in store.features.rejects]

    def test_round_trip_preserves_polygon_holes(self, tmp_path):
        store = self.small_store()
        path = tmp_path / "store.json"
        store.save(path)
        loaded = FeatureStore.load(path)
        polygon = loaded.features.features[2].geometry
        assert len(polygon.holes) == 1
        assert polygon.holes[0][0] == (40.9995, 28.9995)

    def test_load_rejects_non_json(self, tmp_path):
        path = tmp_path / "store.json"
        path.write_text("not json at all")
        with pytest.raises(SnapshotFormatError):
            FeatureStore.load(path)

    def test_load_rejects_wrong_version(self, tmp_path):
        path = tmp_path / "store.json"
        path.write_text(json.dumps({"version": 99, "features": []}))
        with pytest.raises(SnapshotFormatError, match="version"):
            FeatureStore.load(path)

    def test_from_files_mixes_formats(self, tmp_path):
        xml = tmp_path / "part.osm.xml"
        xml.write_text(
            '<?xml version="1.0"?><osm version="0.6">'
            '<node id="1" lat="41.0" lon="29.0"><tag k="amenity" v="cafe"/></node>'
            "</osm>")
        overpass = tmp_path / "part.json"
        overpass.write_text(json.dumps({"elements": [
            {"type": "node", "id": 2, "lat": 41.001, "lon": 29.001,
             "tags": {"amenity": "bank"}},
        ]}))
        store = FeatureStore.from_files([xml, overpass])
        amenities = sorted(f.tags["amenity"] for f in store.features)
        assert amenities == ["bank", "cafe"]

    def test_demo_store_contains_its_center(self, demo_store):
        assert demo_store.contains(CENTER_LAT, CENTER_LON)


class TestConfig:
    FULL_YAML = """
sources:
  files: [a.osm.xml, b.json]
  overpass_endpoint: https://overpass.example/api
radius_m: 450
coverage_threshold: 0.05
admin_levels:
  province: 3
  district: 7
teacher:
  endpoint: https://teach.example/v1/chat/completions
  model: teacher-large
  token_env: MY_TEACHER_TOKEN
  temperature: 0.9
  pairs_per_request: 25
  rate_limit_per_minute: 10
  max_retries: 5
completion:
  endpoint: https://infer.example/v1/completions
  model: tuned-small
  max_tokens: 128
split:
  fraction: 0.95
  seed: 11
projection:
  method: umap
  seed: 42
serve:
  host: 0.0.0.0
  port: 9001
  max_concurrent_ask: 2
  store: /data/store.json
  embeddings: /data/layer.geojson
"""

    def test_full_yaml(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text(self.FULL_YAML)
        cfg = load_config(path)
        assert cfg.source_files == ["a.osm.xml", "b.json"]
        assert cfg.overpass_endpoint == "https://overpass.example/api"
        assert cfg.descriptor.radius_m == 450
        assert cfg.descriptor.coverage_threshold == 0.05
        assert cfg.descriptor.province_admin_level == 3
        assert cfg.descriptor.district_admin_level == 7
        assert cfg.teacher.model == "teacher-large"
        assert cfg.teacher.token_env == "MY_TEACHER_TOKEN"
        assert cfg.teacher.pairs_per_request == 25
        assert cfg.completion.endpoint == "https://infer.example/v1/completions"
        assert cfg.completion.max_tokens == 128
        assert cfg.split_fraction == 0.95
        assert cfg.split_seed == 11
        assert cfg.projection_method == "umap"
        assert cfg.projection_seed == 42
        assert cfg.serve.host == "0.0.0.0"
        assert cfg.serve.port == 9001
        assert cfg.serve.max_concurrent_ask == 2
        assert cfg.serve.store_path == "/data/store.json"
        assert cfg.serve.embeddings_path == "/data/layer.geojson"

    def test_empty_yaml_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        cfg = load_config(path)
        assert cfg.descriptor.radius_m == 300.0
        assert cfg.split_fraction == 0.99
        assert cfg.serve.max_concurrent_ask == 4
        assert cfg.teacher.temperature == 1.0

    def test_partial_yaml_keeps_other_defaults(self, tmp_path):
        path = tmp_path / "partial.yaml"
        path.write_text("radius_m: 600\nserve:\n  port: 8100\n")
        cfg = load_config(path)
        assert cfg.descriptor.radius_m == 600
        assert cfg.serve.port == 8100
        assert cfg.serve.host == "127.0.0.1"
        assert cfg.descriptor.coverage_threshold == 0.02

    def test_non_mapping_root_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- just\n- a\n- list\n")
        with pytest.raises(ValueError, match="mapping"):
            load_config(path)

    def test_require_sources(self):
        cfg = PipelineConfig()
        with pytest.raises(ValueError):
            cfg.require_sources()
        cfg.source_files = ["x.xml"]
        cfg.require_sources()

    def test_secrets_stay_in_environment(self, tmp_path):
        # Config files carry only the env var *name*, never a token value.
        path = tmp_path / "config.yaml"
        path.write_text(self.FULL_YAML)
        cfg = load_config(path)
        assert cfg.teacher.token_env == "MY_TEACHER_TOKEN"
        assert not hasattr(cfg.teacher, "token")
        assert not hasattr(cfg.completion, "token")


class TestDescribeRendering:
    def test_render_shape(self, demo_store):
        descriptor, preprompt = describe_location(
            demo_store, CENTER_LAT, CENTER_LON, 300.0)
        rendered = render_describe_json(descriptor, preprompt)
        assert rendered.endswith("\n")
        doc = json.loads(rendered)
        assert set(doc) == {"descriptor", "preprompt"}
        assert doc["preprompt"] == preprompt

    def test_demo_center_gives_golden_preprompt(self, demo_store):
        _, preprompt = describe_location(demo_store, CENTER_LAT, CENTER_LON, 300.0)
        assert preprompt == demo_area_preprompt()

    def test_render_is_single_line(self, demo_store):
        descriptor, preprompt = describe_location(
            demo_store, CENTER_LAT, CENTER_LON, 300.0)
        rendered = render_describe_json(descriptor, preprompt)
        assert rendered.count("\n") == 1


class TestPrepromptEndpoint:
    def test_golden_preprompt(self, demo_client):
        r = demo_client.get("/v1/preprompt",
                            params={"lat": CENTER_LAT, "lon": CENTER_LON})
        assert r.status_code == 200
        assert r.json()["preprompt"] == demo_area_preprompt()

    def test_body_is_shared_renderer_output(self, demo_store, demo_client):
        descriptor, preprompt = describe_location(
            demo_store, CENTER_LAT, CENTER_LON, 300.0)
        r = demo_client.get("/v1/preprompt",
                            params={"lat": CENTER_LAT, "lon": CENTER_LON})
        assert r.content == render_describe_json(descriptor, preprompt).encode()

    def test_missing_lon_is_400(self, demo_client):
        r = demo_client.get("/v1/preprompt", params={"lat": CENTER_LAT})
        assert r.status_code == 400
        assert r.json()["code"] == "invalid_request"

    def test_non_numeric_lat_is_400(self, demo_client):
        r = demo_client.get("/v1/preprompt",
                            params={"lat": "north", "lon": CENTER_LON})
        assert r.status_code == 400
        assert r.json()["code"] == "invalid_request"

    def test_out_of_range_lat_is_400(self, demo_client):
        r = demo_client.get("/v1/preprompt",
                            params={"lat": 999, "lon": CENTER_LON})
        assert r.status_code == 400

    def test_far_outside_extent_is_422(self, demo_client):
        # Paris is far outside the Istanbul demo extent.
        r = demo_client.get("/v1/preprompt", params={"lat": 48.85, "lon": 2.35})
        assert r.status_code == 422
        assert r.json()["code"] == "outside_coverage"

    def test_radius_clamped_low(self, demo_client):
        r = demo_client.get("/v1/preprompt",
                            params={"lat": CENTER_LAT, "lon": CENTER_LON,
                                    "radius": 1})
        assert r.status_code == 200
        assert r.json()["descriptor"]["radius_m"] == 50.0

    def test_radius_clamped_high(self, demo_client):
        r = demo_client.get("/v1/preprompt",
                            params={"lat": CENTER_LAT, "lon": CENTER_LON,
                                    "radius": 50000})
        assert r.status_code == 200
        assert r.json()["descriptor"]["radius_m"] == 2000.0

    def test_radius_defaults_to_config(self, demo_client):
        r = demo_client.get("/v1/preprompt",
                            params={"lat": CENTER_LAT, "lon": CENTER_LON})
        assert r.json()["descriptor"]["radius_m"] == 300.0

    def test_error_body_shape(self, demo_client):
        r = demo_client.get("/v1/preprompt", params={"lat": 999, "lon": 0})
        assert set(r.json()) == {"code", "message"}


class TestAskEndpoint:
    def make(self, stub=None, max_concurrent=4):
        stub = stub or StubCompletion()
        config = PipelineConfig()
        config.serve.max_concurrent_ask = max_concurrent
        app = create_app(FeatureStore(load_demo_features()), config,
                         completion_client=stub)
        return stub, TestClient(app, raise_server_exceptions=False)

    def test_answer_passthrough(self):
        stub, client = self.make(StubCompletion(content=" A residential area."))
        r = client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                         "question": "How can we classify this region?"})
        assert r.status_code == 200
        body = r.json()
        assert body["answer"] == "A residential area."
        assert body["model"] == "stub-model"
        assert body["latency_ms"] >= 0
        assert body["preprompt"] == demo_area_preprompt()

    def test_prompt_grammar(self):
        stub, client = self.make()
        question = "Is there a tram line?"
        client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                     "question": question})
        prompt, _ = stub.prompts[0]
        assert prompt.startswith("Area : ")
        assert prompt.endswith(" Answer :")
        assert f" Question : {question} Answer :" in prompt
        assert demo_area_preprompt() in prompt

    def test_prompt_logged_for_audit(self, caplog):
        stub, client = self.make()
        with caplog.at_level(logging.INFO, logger="cartoprompt.service"):
            client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                         "question": "What is here?"})
        logged = [rec.message for rec in caplog.records
                  if rec.name == "cartoprompt.service" and "ask prompt" in rec.message]
        assert len(logged) == 1
        assert logged[0].endswith(" Answer :")

    def test_empty_question_is_400(self):
        _, client = self.make()
        r = client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                         "question": "   "})
        assert r.status_code == 400

    def test_missing_coordinates_is_400(self):
        _, client = self.make()
        r = client.post("/v1/ask", json={"question": "where am I?"})
        assert r.status_code == 400

    def test_non_json_body_is_400(self):
        _, client = self.make()
        r = client.post("/v1/ask", content=b"plain text",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400

    def test_array_body_is_400(self):
        _, client = self.make()
        r = client.post("/v1/ask", json=[1, 2, 3])
        assert r.status_code == 400

    def test_outside_extent_is_422(self):
        _, client = self.make()
        r = client.post("/v1/ask", json={"lat": 48.85, "lon": 2.35,
                                         "question": "anything here?"})
        assert r.status_code == 422

    def test_upstream_failure_maps_to_502(self):
        failing = StubCompletion(error=ClientError("upstream broke", status=500))
        _, client = self.make(failing)
        r = client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                         "question": "hello?"})
        assert r.status_code == 502
        body = r.json()
        assert body["code"] == "upstream_error"
        assert "500" in body["message"]

    def test_upstream_timeout_maps_to_502(self):
        failing = StubCompletion(error=ClientError("request timed out"))
        _, client = self.make(failing)
        r = client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                         "question": "hello?"})
        assert r.status_code == 502

    def test_no_completion_endpoint_is_502(self):
        app = create_app(FeatureStore(load_demo_features()))
        client = TestClient(app, raise_server_exceptions=False)
        r = client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                         "question": "hello?"})
        assert r.status_code == 502

    def test_request_radius_respected(self):
        stub, client = self.make()
        r = client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                         "radius_m": 5, "question": "hm?"})
        assert r.status_code == 200
        # Clamped to 50 m; the 300 m preprompt would differ.
        assert r.json()["preprompt"] != demo_area_preprompt()

    def test_max_tokens_forwarded(self):
        stub, client = self.make()
        client.app  # touch to silence lint on unused
        config_tokens = PipelineConfig().completion.max_tokens
        client.post("/v1/ask", json={"lat": CENTER_LAT, "lon": CENTER_LON,
                                     "question": "q?"})
        assert stub.prompts[0][1] == config_tokens


class TestEmbeddingsEndpoint:
    GEOJSON = json.dumps({"type": "FeatureCollection", "features": []}).encode()

    def make(self, tmp_path, write_artifact=True):
        artifact = tmp_path / "layer.geojson"
        if write_artifact:
            artifact.write_bytes(self.GEOJSON)
        config = PipelineConfig()
        config.serve.embeddings_path = str(artifact)
        app = create_app(FeatureStore(load_demo_features()), config)
        return artifact, TestClient(app, raise_server_exceptions=False)

    def test_missing_artifact_is_404_with_hint(self, tmp_path):
        _, client = self.make(tmp_path, write_artifact=False)
        r = client.get("/v1/embeddings")
        assert r.status_code == 404
        assert "embed" in r.json()["message"]

    def test_serves_artifact_bytes_with_etag(self, tmp_path):
        _, client = self.make(tmp_path)
        r = client.get("/v1/embeddings")
        assert r.status_code == 200
        assert r.content == self.GEOJSON
        expected = '"' + hashlib.sha256(self.GEOJSON).hexdigest() + '"'
        assert r.headers["ETag"] == expected

    def test_if_none_match_hit_is_304(self, tmp_path):
        _, client = self.make(tmp_path)
        etag = client.get("/v1/embeddings").headers["ETag"]
        r = client.get("/v1/embeddings", headers={"If-None-Match": etag})
        assert r.status_code == 304
        assert r.content == b""

    def test_if_none_match_stale_is_200(self, tmp_path):
        _, client = self.make(tmp_path)
        r = client.get("/v1/embeddings", headers={"If-None-Match": '"stale"'})
        assert r.status_code == 200

    def test_etag_tracks_content(self, tmp_path):
        artifact, client = self.make(tmp_path)
        first = client.get("/v1/embeddings").headers["ETag"]
        artifact.write_bytes(b'{"type": "FeatureCollection", "features": [1]}')
        second = client.get("/v1/embeddings").headers["ETag"]
        assert first != second


class TestErrorHandling:
    def test_unexpected_error_is_500_without_stack(self):
        class ExplodingStore(FeatureStore):
            def contains(self, lat, lon):
                raise RuntimeError("secret internal detail")

        app = create_app(ExplodingStore(load_demo_features()))
        client = TestClient(app, raise_server_exceptions=False)
        r = client.get("/v1/preprompt",
                       params={"lat": CENTER_LAT, "lon": CENTER_LON})
        assert r.status_code == 500
        body = r.json()
        assert body["code"] == "internal_error"
        assert "secret internal detail" not in body["message"]
        assert "Traceback" not in r.text

    def test_access_log_is_json_lines(self, demo_client, caplog):
        with caplog.at_level(logging.INFO, logger="cartoprompt.service.access"):
            demo_client.get("/v1/preprompt",
                            params={"lat": CENTER_LAT, "lon": CENTER_LON})
        lines = [rec.message for rec in caplog.records
                 if rec.name == "cartoprompt.service.access"]
        assert len(lines) == 1
        entry = json.loads(lines[0])
        assert entry["method"] == "GET"
        assert entry["path"] == "/v1/preprompt"
        assert entry["status"] == 200
        assert entry["duration_ms"] >= 0

    def test_errors_also_access_logged(self, demo_client, caplog):
        with caplog.at_level(logging.INFO, logger="cartoprompt.service.access"):
            demo_client.get("/v1/preprompt", params={"lat": 999, "lon": 0})
        entry = json.loads(caplog.records[-1].message)
        assert entry["status"] == 400


class TestConfigTypes:
    def test_dataclass_defaults(self):
        assert TeacherConfig().temperature == 1.0
        assert CompletionConfig().max_tokens == 256
        assert ServeConfig().max_concurrent_ask == 4
