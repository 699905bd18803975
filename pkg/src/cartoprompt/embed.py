"""Preprompt embeddings: averaged word vectors, 2D projection, colors.

The word-vector table uses the common text format (token followed by
space-separated floats, one entry per line). Projection offers PCA as
the deterministic baseline and UMAP for manifold layouts; both live
behind the same call. Colors map the two projected dimensions linearly
to the red and green channels with blue held constant.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._umap import umap_layout
from .util import round_half_up

log = logging.getLogger(__name__)

# Alphanumeric runs; underscore is a separator, so tag values like
# place_of_worship split into their words.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

BLUE_CHANNEL = 128


class LexiconFormatError(ValueError):
    """Word-vector file violates the format; carries the line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(message)
        self.line_number = line_number


@dataclass
class Lexicon:
    dimension: int
    vectors: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors


def load_word_vectors(path) -> Lexicon:
    """Read a text-format vector table; every line must share one dimension."""
    vectors: dict[str, np.ndarray] = {}
    dimension = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            token, values = parts[0], parts[1:]
            try:
                vector = np.array([float(v) for v in values if v != ""],
                                  dtype=np.float64)
            except ValueError as exc:
                raise LexiconFormatError(
                    f"line {line_number}: non-numeric vector component ({exc})",
                    line_number) from exc
            if dimension is None:
                dimension = len(vector)
                if dimension == 0:
                    raise LexiconFormatError(
                        f"line {line_number}: token without vector", line_number)
            elif len(vector) != dimension:
                raise LexiconFormatError(
                    f"line {line_number}: expected {dimension} components, "
                    f"got {len(vector)}", line_number)
            vectors[token.lower()] = vector
    return Lexicon(dimension=dimension or 0, vectors=vectors)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; underscores and punctuation split."""
    return _TOKEN_RE.findall(text.lower())


def embed_text_stats(lexicon: Lexicon, text: str) -> tuple[np.ndarray, int, int]:
    """(mean vector, in-vocabulary token count, total token count).

    Out-of-vocabulary tokens are skipped from both numerator and
    denominator; a fully out-of-vocabulary text gives the zero vector.
    Accumulation runs over the sorted token multiset, so any reordering
    of the same tokens produces a bit-identical mean.
    """
    tokens = tokenize(text)
    counts = Counter(t for t in tokens if t in lexicon.vectors)
    used = sum(counts.values())
    if used == 0:
        return np.zeros(lexicon.dimension), 0, len(tokens)
    acc = np.zeros(lexicon.dimension)
    for token in sorted(counts):
        acc += lexicon.vectors[token] * counts[token]
    return acc / used, used, len(tokens)


def embed_text(lexicon: Lexicon, text: str) -> np.ndarray:
    vector, used, total = embed_text_stats(lexicon, text)
    if used == 0:
        log.warning("text has no in-vocabulary tokens (%d total); zero vector",
                    total)
    return vector


@dataclass(frozen=True)
class ProjectionConfig:
    method: str = "pca"
    n_neighbors: int = 15
    min_dist: float = 0.1
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("pca", "umap"):
            raise ValueError(f"unknown projection method: {self.method!r}")
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")


def _pca_2d(data: np.ndarray) -> np.ndarray:
    centered = data - data.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    axes = vt[:2]
    # Sign convention: largest-magnitude loading positive, so the output
    # does not flip between otherwise-identical runs.
    for row in range(len(axes)):
        pivot = axes[row, np.argmax(np.abs(axes[row]))]
        if pivot < 0:
            axes[row] = -axes[row]
    out = np.zeros((len(data), 2))
    out[:, : len(axes)] = centered @ axes.T
    return out


def project_2d(vectors, cfg: ProjectionConfig = ProjectionConfig()) -> np.ndarray:
    """Project d-dimensional vectors to 2D; one output row per input row."""
    data = np.asarray(vectors, dtype=np.float64)
    if data.ndim != 2 or len(data) < 3:
        raise ValueError("projection needs at least 3 vectors")
    if cfg.method == "pca":
        return _pca_2d(data)
    n_neighbors = cfg.n_neighbors
    if n_neighbors >= len(data):
        n_neighbors = len(data) - 1
        log.warning("n_neighbors %d >= point count %d; clamped to %d",
                    cfg.n_neighbors, len(data), n_neighbors)
    return umap_layout(data, n_neighbors=n_neighbors, min_dist=cfg.min_dist,
                       n_epochs=cfg.epochs, seed=cfg.seed)


def _rescale_channel(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(len(values), BLUE_CHANNEL, dtype=int)
    scaled = (values - lo) / (hi - lo) * 255.0
    return np.array([round_half_up(v) for v in scaled], dtype=int)


def colorize(xy) -> list[tuple[int, int, int]]:
    """Map dim 1 to red and dim 2 to green linearly; blue fixed at 128."""
    xy = np.asarray(xy, dtype=np.float64)
    if len(xy) == 0:
        raise ValueError("colorize needs at least one point")
    reds = _rescale_channel(xy[:, 0])
    greens = _rescale_channel(xy[:, 1])
    return [(int(r), int(g), BLUE_CHANNEL) for r, g in zip(reds, greens)]


def color_hex(color: tuple[int, int, int]) -> str:
    return "#{:02X}{:02X}{:02X}".format(*color)


@dataclass
class EmbeddingPoint:
    preprompt_id: str
    location: tuple[float, float]  # (lat, lon)
    vector: np.ndarray
    xy2d: tuple[float, float]
    color: tuple[int, int, int]

    def __post_init__(self):
        if not all(0 <= c <= 255 for c in self.color):
            raise ValueError(f"color out of range: {self.color}")
        if not all(np.isfinite(self.xy2d)):
            raise ValueError("xy2d must be finite")


def build_points(preprompt_ids, locations, vectors,
                 cfg: ProjectionConfig = ProjectionConfig()) -> list[EmbeddingPoint]:
    """Project and colorize a batch into EmbeddingPoints, order preserved."""
    xy = project_2d(vectors, cfg)
    colors = colorize(xy)
    return [
        EmbeddingPoint(preprompt_id=pid, location=tuple(loc),
                       vector=np.asarray(vec, dtype=np.float64),
                       xy2d=(float(x), float(y)), color=color)
        for pid, loc, vec, (x, y), color
        in zip(preprompt_ids, locations, vectors, xy, colors)
    ]


def emit_geojson(points: list[EmbeddingPoint]) -> str:
    """RFC 7946 FeatureCollection; coordinates are [longitude, latitude]."""
    features = [
        {
            "type": "Feature",
            "geometry": {
                "type": "Point",
                "coordinates": [p.location[1], p.location[0]],
            },
            "properties": {
                "preprompt_id": p.preprompt_id,
                "color": color_hex(p.color),
                "x2d": p.xy2d[0],
                "y2d": p.xy2d[1],
            },
        }
        for p in points
    ]
    return json.dumps({"type": "FeatureCollection", "features": features},
                      ensure_ascii=False)


def write_artifact(points: list[EmbeddingPoint], path, include_vectors=False) -> None:
    """Cache projected points as JSON lines for later serving."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for p in points:
            record = {"preprompt_id": p.preprompt_id,
                      "lat": p.location[0], "lon": p.location[1],
                      "x2d": p.xy2d[0], "y2d": p.xy2d[1],
                      "color": list(p.color)}
            if include_vectors:
                record["vector"] = p.vector.tolist()
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_artifact(path) -> list[EmbeddingPoint]:
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            vector = np.asarray(record.get("vector", []), dtype=np.float64)
            points.append(EmbeddingPoint(
                preprompt_id=record["preprompt_id"],
                location=(record["lat"], record["lon"]),
                vector=vector,
                xy2d=(record["x2d"], record["y2d"]),
                color=tuple(record["color"])))
    return points
