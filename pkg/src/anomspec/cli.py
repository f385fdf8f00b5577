"""Command-line pipeline: generate, train, estimate, specify, detect, evaluate."""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import io
from .analysis import contour_grid, eval_labels, self_validate
from .cutoff import greedy_gap_cutoff, run_seeds, single_estimate, stabilize_estimates
from .datagen import gen_experiment, ingest_ppm
from .forest import ForestConfig, build_forest, forest_depths
from .knn import knn_rank
from .spec import (
    IntractableDimensionalityError,
    classify_points,
    compile_spec,
    parse_spec,
    range_profile,
    serialize_spec,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIMS = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class _Manifest:
    """Stage timings plus resolved parameters, emitted once per run."""

    def __init__(self, subcommand, args):
        self.data = {
            "subcommand": subcommand,
            "params": {
                k: v for k, v in sorted(vars(args).items()) if k not in ("func", "manifest")
            },
            "timings": {},
        }
        self._path = getattr(args, "manifest", None)

    def stage(self, name):
        return _Stage(self.data["timings"], name)

    def emit(self):
        line = json.dumps(self.data, sort_keys=True)
        print(f"manifest: {line}", file=sys.stderr)
        if self._path:
            with open(self._path, "w") as fh:
                fh.write(line + "\n")


class _Stage:
    def __init__(self, sink, name):
        self.sink = sink
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.sink[self.name] = round(time.perf_counter() - self.t0, 6)
        return False


def _read_input(path):
    """Points from a CSV, or from a PPM (one RGB triple per pixel)."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic in (b"P3", b"P6"):
        ds = ingest_ppm(path)
        return ds.points, None
    return io.read_points_csv(path)


def cmd_gen(args, manifest):
    with manifest.stage("generate"):
        ds = gen_experiment(args.exp, args.n, args.rate, args.seed)
    with manifest.stage("write"):
        io.write_points_csv(args.out, ds.points, ds.labels)
    print(f"wrote {len(ds.points)} points ({int(ds.labels.sum())} anomalous) to {args.out}")
    return EXIT_OK


def cmd_train(args, manifest):
    with manifest.stage("read"):
        points, _ = _read_input(args.infile)
    config = ForestConfig(args.trees, args.sample, args.seed, args.integer_keys)
    if len(points) < 2:
        raise io.DataFormatError(f"{args.infile}: need at least 2 points to train")
    with manifest.stage("build"):
        forest = build_forest(points, config)
    with manifest.stage("write"):
        io.save_forest(args.model, forest)
    print(f"trained {forest.tree_count} trees on {len(points)} points -> {args.model}")
    return EXIT_OK


def cmd_estimate(args, manifest):
    with manifest.stage("read"):
        points, _ = _read_input(args.infile)
    with manifest.stage("read_model"):
        forest = io.load_forest(args.model)
    base = ForestConfig(forest.tree_count, forest.sample_size, forest.seed, forest.integer_keys)
    source = "ranges" if args.source == "ranges" else "data_points"
    with manifest.stage("estimate"):
        if args.runs <= 1:
            _, est = single_estimate(points, base, source=source)
            counts = [est.anomaly_count]
            final = est.anomaly_count
            rep = est
        else:
            ests = []
            for s in run_seeds(base.rng_seed, args.runs):
                cfg = ForestConfig(base.tree_count, base.sample_size, s, base.integer_key_mode)
                _, e = single_estimate(points, cfg, source=source)
                ests.append(e)
            counts = [e.anomaly_count for e in ests]
            final = stabilize_estimates(counts)
            rep = min(ests, key=lambda e: (abs(e.anomaly_count - final), e.cutoff_depth))
    print(f"anomaly_count={final}")
    print(f"cutoff={rep.cutoff_depth}")
    print(f"confidence={'low' if rep.low_confidence else 'high'}")
    print(f"runs={len(counts)}")
    print(f"run_counts={','.join(str(c) for c in counts)}")
    return EXIT_OK


def cmd_specify(args, manifest):
    with manifest.stage("read_model"):
        forest = io.load_forest(args.model)
    with manifest.stage("estimate"):
        if args.cutoff is not None:
            cutoff = args.cutoff
        else:
            cutoff = greedy_gap_cutoff(range_profile(forest)).cutoff_depth
    with manifest.stage("specify"):
        spec = compile_spec(
            forest, cutoff, min_cell=args.min_cell, prune=args.prune, force=args.force
        )
    with manifest.stage("write"):
        with open(args.out, "w") as fh:
            fh.write(serialize_spec(spec))
    print(f"cutoff={spec.cutoff_depth}")
    print(f"regions={len(spec.regions)}")
    return EXIT_OK


def cmd_detect(args, manifest):
    with manifest.stage("read_spec"):
        with open(args.spec) as fh:
            spec = parse_spec(fh.read())
    with manifest.stage("read"):
        points, _ = _read_input(args.infile)
    if points.shape[1] != spec.dims:
        raise io.DataFormatError(
            f"{args.infile}: {points.shape[1]}-D points against a {spec.dims}-D spec"
        )
    with manifest.stage("detect"):
        labels = classify_points(spec, points)
    elapsed = max(manifest.data["timings"]["detect"], 1e-9)
    with manifest.stage("write"):
        io.write_labels_csv(args.out, labels)
    print(f"anomalies={int(labels.sum())}")
    print(f"points_per_sec={len(points) / elapsed:.0f}")
    return EXIT_OK


def cmd_score(args, manifest):
    with manifest.stage("read_model"):
        forest = io.load_forest(args.model)
    with manifest.stage("read"):
        points, _ = _read_input(args.infile)
    if points.shape[1] != forest.dims:
        raise io.DataFormatError(
            f"{args.infile}: {points.shape[1]}-D points against a {forest.dims}-D model"
        )
    with manifest.stage("score"):
        depths = forest_depths(forest, points)
    with manifest.stage("write"):
        with open(args.out, "w") as fh:
            fh.write("depth\n")
            for d in depths:
                fh.write(f"{int(d)}\n")
    print(f"scored {len(points)} points -> {args.out}")
    return EXIT_OK


def cmd_eval(args, manifest):
    with manifest.stage("read"):
        pred = io.read_labels_csv(args.pred)
        truth = io.read_labels_csv(args.truth)
    if len(pred) != len(truth):
        raise io.DataFormatError("prediction/truth length mismatch")
    with manifest.stage("eval"):
        report = eval_labels(pred, truth)
    for key, value in report.as_dict().items():
        print(f"{key}={value}")
    return EXIT_OK


def cmd_contour(args, manifest):
    with manifest.stage("read_model"):
        forest = io.load_forest(args.model)
    with manifest.stage("read"):
        points, _ = _read_input(args.infile)
    with manifest.stage("contour"):
        grid = contour_grid(forest, points, args.width, args.height)
    with manifest.stage("write"):
        if args.out.lower().endswith(".pgm"):
            io.write_pgm(args.out, grid[::-1])  # top row = highest y
        else:
            io.write_matrix_csv(args.out, grid)
    print(f"wrote {args.height}x{args.width} contour to {args.out}")
    return EXIT_OK


def cmd_knn(args, manifest):
    with manifest.stage("read"):
        points, _ = _read_input(args.infile)
    with manifest.stage("rank"):
        ranking = knn_rank(points, args.max_k)
    with manifest.stage("write"):
        with open(args.out, "w") as fh:
            fh.write("score,argmax_k\n")
            for s, k in zip(ranking.scores, ranking.argmax_k):
                fh.write(f"{float(s)!r},{int(k)}\n")
    print(f"ranked {len(points)} points -> {args.out}")
    return EXIT_OK


def cmd_selfcheck(args, manifest):
    with manifest.stage("read"):
        points, _ = _read_input(args.infile)
    try:
        seed_a, seed_b = (int(s) for s in args.seeds.split(","))
    except ValueError:
        raise io.DataFormatError("--seeds expects two comma-separated integers") from None
    config = ForestConfig(args.trees, args.sample, seed_a)
    with manifest.stage("validate"):
        report = self_validate(points, config, seed_a, seed_b)
    for key, value in report.as_dict().items():
        print(f"{key}={value}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="anomspec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic experiment dataset")
    p.add_argument("--exp", type=int, required=True, choices=range(1, 10))
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--rate", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="build a forest from a points file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--sample", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--integer-keys", action="store_true")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="estimate the anomaly count and cutoff")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--source", choices=("data", "ranges"), default="data")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("specify", help="compile the anomalous-region specification")
    p.add_argument("--model", required=True)
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--min-cell", type=float, default=0.0)
    p.add_argument("--prune", action="store_true")
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_specify)

    p = sub.add_parser("detect", help="classify points against a specification")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("score", help="cumulative depths straight from the forest")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="precision/recall of predictions vs truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("contour", help="depth-percentile contour matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--w", dest="width", type=int, default=450)
    p.add_argument("--h", dest="height", type=int, default=250)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("knn", help="nearest-neighbour outlier scores")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--max-k", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_knn)

    p = sub.add_parser("selfcheck", help="two-seed self-validation report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--seeds", required=True, help="two comma-separated seeds")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--sample", type=int, default=256)
    p.set_defaults(func=cmd_selfcheck)

    for sp in sub.choices.values():
        sp.add_argument("--manifest", default=None, help="also write the run manifest here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    manifest = _Manifest(args.command, args)
    try:
        code = args.func(args, manifest)
    except IntractableDimensionalityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMS
    except (io.DataFormatError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    manifest.emit()
    return code


if __name__ == "__main__":
    sys.exit(main())
