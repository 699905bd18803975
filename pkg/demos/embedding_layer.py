"""Walkthrough: preprompts to a colored 2D map layer.

Preprompts are averaged word vectors; projecting them to 2D and mapping
the axes to color channels gives each location a hue that encodes what
kind of area it is. The demo uses a tiny synthetic lexicon; real runs
load any text-format word-vector file (one "token v1 v2 ..." per line).

    python3 demos/embedding_layer.py
"""

import json

import numpy as np

from cartoprompt.embed import (
    Lexicon,
    ProjectionConfig,
    build_points,
    color_hex,
    embed_text,
    emit_geojson,
    tokenize,
)


def main():
    # A lexicon with two rough "directions": food-ish and green-ish.
    rng = np.random.default_rng(0)
    axes = {"cafe": [1, 0], "restaurant": [0.9, 0.1], "fast_food": [0.8, 0.2],
            "park": [0, 1], "forest": [0.1, 0.9], "grass": [0.2, 0.8],
            "school": [0.5, 0.5], "road": [0.4, 0.4]}
    vectors = {tok: np.array(v + list(rng.normal(0, 0.01, 6)))
               for tok, v in axes.items()}
    lexicon = Lexicon(dimension=8, vectors=vectors)

    preprompts = [
        ("food-street", 41.010, 28.950, "cafe restaurant fast_food road"),
        ("food-corner", 41.011, 28.951, "restaurant cafe school"),
        ("green-quarter", 41.012, 28.952, "park forest grass"),
        ("green-edge", 41.013, 28.953, "grass park road"),
        ("mixed-block", 41.014, 28.954, "school road cafe park"),
    ]

    print("tokenization splits on anything non-alphanumeric:")
    print(f"  'place_of_worship' -> {tokenize('place_of_worship')}\n")

    ids = [p[0] for p in preprompts]
    locations = [(p[1], p[2]) for p in preprompts]
    embeddings = [embed_text(lexicon, p[3]) for p in preprompts]

    points = build_points(ids, locations, embeddings,
                          ProjectionConfig(method="pca"))
    print("projected points and their colors:")
    for point in points:
        print(f"  {point.preprompt_id:14s} xy=({point.xy2d[0]:+.3f}, "
              f"{point.xy2d[1]:+.3f})  {color_hex(point.color)}")

    # The food-ish and green-ish preprompts land far apart, so their
    # colors separate too.
    layer = json.loads(emit_geojson(points))
    first = layer["features"][0]
    print(f"\nGeoJSON: {len(layer['features'])} features, "
          f"coordinates are [lon, lat]: {first['geometry']['coordinates']}")

    # UMAP is for bigger corpora; it needs at least n_neighbors+1 points
    # and a seed makes it reproducible.
    umap_cfg = ProjectionConfig(method="umap", n_neighbors=3, seed=42)
    umap_points = build_points(ids, locations, embeddings, umap_cfg)
    print("\nsame five preprompts through the UMAP path:")
    for point in umap_points:
        print(f"  {point.preprompt_id:14s} {color_hex(point.color)}")


if __name__ == "__main__":
    main()
