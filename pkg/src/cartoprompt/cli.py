"""Command-line entry point.

Subcommands cover the whole pipeline: ingest raw map data into a store
snapshot, render descriptors and preprompts, run teacher curation, split
the dataset, build the embedding layer, and serve the HTTP API.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .curate import CurationJob, Preprompt, run_curation, split_dataset
from .embed import (
    ProjectionConfig,
    build_points,
    embed_text,
    emit_geojson,
    load_word_vectors,
    write_artifact,
)
from .osm import write_rejects
from .service import (
    FeatureStore,
    PipelineConfig,
    clamp_radius,
    describe_location,
    load_config,
    render_describe_json,
    run_server,
)
from .util import read_jsonl, write_jsonl


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; our contract is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cartoprompt",
                     description="Verbal map descriptions and the pipeline around them.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse map sources into a store snapshot")
    p.add_argument("sources", nargs="+", help="OSM XML or Overpass JSON files")
    p.add_argument("--out", required=True, help="store snapshot path")
    p.add_argument("--rejects", help="optional JSON-lines rejects report")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("describe", help="print descriptor JSON and preprompt")
    p.add_argument("--store", required=True)
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--radius", type=float, default=None, help="meters")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("preprompts", help="batch-render preprompts for centers")
    p.add_argument("--store", required=True)
    p.add_argument("--centers", required=True,
                   help="JSON lines {id, lat, lon[, radius_m]}")
    p.add_argument("--out", required=True,
                   help="JSON lines {id, lat, lon, preprompt}")
    p.set_defaults(func=cmd_preprompts)

    p = sub.add_parser("curate", help="generate QA datapoints via the teacher")
    p.add_argument("--config", required=True, help="pipeline YAML config")
    p.add_argument("--preprompts", required=True,
                   help="JSON lines from the preprompts subcommand")
    p.add_argument("--out", required=True, help="dataset JSON lines")
    p.add_argument("--report", required=True, help="curation report JSON")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", help="partition a dataset file")
    p.add_argument("--input", required=True)
    p.add_argument("--fraction", type=float, default=0.99,
                   help="train fraction (default 0.99)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", help="default: <input>.train.jsonl")
    p.add_argument("--val-out", help="default: <input>.val.jsonl")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("embed", help="build the colored embedding layer")
    p.add_argument("--preprompts", required=True,
                   help="JSON lines from the preprompts subcommand")
    p.add_argument("--vectors", required=True, help="word vectors, text format")
    p.add_argument("--out", required=True, help="GeoJSON output path")
    p.add_argument("--method", choices=("pca", "umap"), default="pca")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--artifact", help="optional JSON-lines point artifact")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", required=True, help="pipeline YAML config")
    p.add_argument("--host", help="override config bind host")
    p.add_argument("--port", type=int, help="override config bind port")
    p.set_defaults(func=cmd_serve)

    return parser


def cmd_ingest(args) -> int:
    store = FeatureStore.from_files(args.sources)
    store.save(args.out)
    if args.rejects:
        write_rejects(args.rejects, store.features.rejects)
    print(f"ingested {len(store.features)} features "
          f"({len(store.features.rejects)} rejected) -> {args.out}")
    return 0


def cmd_describe(args) -> int:
    store = FeatureStore.load(args.store)
    config = PipelineConfig()
    radius_m = (clamp_radius(args.radius) if args.radius is not None
                else config.descriptor.radius_m)
    descriptor, preprompt = describe_location(
        store, args.lat, args.lon, radius_m, config.descriptor, config.rules)
    sys.stdout.write(render_describe_json(descriptor, preprompt))
    return 0


def cmd_preprompts(args) -> int:
    store = FeatureStore.load(args.store)
    config = PipelineConfig()
    rendered = []
    for record in read_jsonl(args.centers):
        lat, lon = float(record["lat"]), float(record["lon"])
        radius_m = clamp_radius(float(record.get("radius_m",
                                                 config.descriptor.radius_m)))
        _, preprompt = describe_location(store, lat, lon, radius_m,
                                         config.descriptor, config.rules)
        rendered.append({"id": str(record["id"]), "lat": lat, "lon": lon,
                         "preprompt": preprompt})
    count = write_jsonl(args.out, rendered)
    print(f"rendered {count} preprompts -> {args.out}")
    return 0


def cmd_curate(args) -> int:
    config = load_config(args.config)
    preprompts = [Preprompt(id=r["id"], text=r["preprompt"])
                  for r in read_jsonl(args.preprompts)]
    teacher = config.teacher
    job = CurationJob(
        preprompts=preprompts,
        pairs_per_request=teacher.pairs_per_request,
        endpoint=teacher.endpoint,
        model=teacher.model,
        token_env=teacher.token_env,
        temperature=teacher.temperature,
        max_retries=teacher.max_retries,
        rate_limit_per_minute=teacher.rate_limit_per_minute,
    )
    report = run_curation(job, args.out, args.report)
    totals = report["totals"]
    print(f"kept {totals['kept']} datapoints from "
          f"{totals['preprompt_count']} preprompts -> {args.out}")
    return 0


def cmd_split(args) -> int:
    records = list(read_jsonl(args.input))
    train, val = split_dataset(records, train_fraction=args.fraction,
                               seed=args.seed)
    stem = Path(args.input)
    train_out = args.train_out or str(stem.with_name(stem.stem + ".train.jsonl"))
    val_out = args.val_out or str(stem.with_name(stem.stem + ".val.jsonl"))
    write_jsonl(train_out, train)
    write_jsonl(val_out, val)
    print(f"train {len(train)} -> {train_out}")
    print(f"val {len(val)} -> {val_out}")
    return 0


def cmd_embed(args) -> int:
    lexicon = load_word_vectors(args.vectors)
    records = list(read_jsonl(args.preprompts))
    if not records:
        raise ValueError(f"no preprompts in {args.preprompts}")
    ids = [r["id"] for r in records]
    locations = [(float(r["lat"]), float(r["lon"])) for r in records]
    vectors = [embed_text(lexicon, r["preprompt"]) for r in records]
    cfg = ProjectionConfig(method=args.method, seed=args.seed)
    points = build_points(ids, locations, vectors, cfg)
    Path(args.out).write_text(emit_geojson(points) + "\n", encoding="utf-8")
    if args.artifact:
        write_artifact(points, args.artifact)
    print(f"embedded {len(points)} preprompts -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    config = load_config(args.config)
    if args.host:
        config.serve.host = args.host
    if args.port:
        config.serve.port = args.port
    store = FeatureStore.load(config.serve.store_path)
    run_server(store, config)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # runtime failures map to exit 2
        print(f"cartoprompt: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
