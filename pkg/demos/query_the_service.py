"""Walkthrough: the HTTP facade over an ingested feature store.

Exercises all three endpoints in-process (no sockets) with a stand-in
completion model, including the error contract. A real deployment runs
`cartoprompt serve --config config.yaml` instead.

    python3 demos/query_the_service.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from cartoprompt.client import Reply
from cartoprompt.datasets import DEMO_AREA_CENTER, load_demo_features
from cartoprompt.service import FeatureStore, PipelineConfig, create_app


class CannedCompletion:
    model = "demo-completion"

    def complete(self, prompt, max_tokens=None):
        # A real client POSTs the prompt to a completion endpoint; the
        # prompt always ends with the " Answer :" cue.
        assert prompt.endswith(" Answer :")
        return Reply(content=" A dense mixed-use neighborhood.", retries=0)


def main():
    workdir = Path(tempfile.mkdtemp(prefix="service-demo-"))
    store = FeatureStore(load_demo_features())

    # Snapshots avoid re-parsing XML on every startup.
    snapshot = workdir / "store.json"
    store.save(snapshot)
    store = FeatureStore.load(snapshot)
    print(f"store: {len(store.features)} features, bbox={store.bbox}")

    config = PipelineConfig()
    config.serve.embeddings_path = str(workdir / "layer.geojson")
    app = create_app(store, config, completion_client=CannedCompletion())
    client = TestClient(app, raise_server_exceptions=False)
    lat, lon = DEMO_AREA_CENTER

    print("\nGET /v1/preprompt")
    r = client.get("/v1/preprompt", params={"lat": lat, "lon": lon})
    body = r.json()
    print(f"  {r.status_code}: preprompt of {len(body['preprompt'])} chars, "
          f"{body['descriptor']['building_count']} buildings")

    print("POST /v1/ask")
    r = client.post("/v1/ask", json={"lat": lat, "lon": lon,
                                     "question": "What kind of area is this?"})
    print(f"  {r.status_code}: {r.json()['answer']!r} "
          f"({r.json()['latency_ms']} ms)")

    print("GET /v1/embeddings (artifact not built yet)")
    r = client.get("/v1/embeddings")
    print(f"  {r.status_code}: {r.json()['message']}")

    # Write a layer so the caching path is visible.
    (workdir / "layer.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": []}))
    r = client.get("/v1/embeddings")
    etag = r.headers["ETag"]
    r304 = client.get("/v1/embeddings", headers={"If-None-Match": etag})
    print(f"GET /v1/embeddings again: {r.status_code} with ETag, "
          f"revalidation -> {r304.status_code}")

    print("\nerror contract:")
    for name, response in [
        ("lat=999", client.get("/v1/preprompt", params={"lat": 999, "lon": lon})),
        ("Paris (outside data)", client.get("/v1/preprompt",
                                            params={"lat": 48.85, "lon": 2.35})),
        ("empty question", client.post("/v1/ask", json={
            "lat": lat, "lon": lon, "question": ""})),
    ]:
        body = response.json()
        print(f"  {name:22s} -> {response.status_code} "
              f"{{code: {body['code']!r}}}")


if __name__ == "__main__":
    main()
