"""Command-line entry point: ``erasorpp {run,export,eval,sweep,synth}``.

Exit codes: 0 success, 2 bad arguments or config, 3 input/ingestion error,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from . import ingest
from .config import load_config
from .errors import (
    ConfigError,
    EmptyGroundTruth,
    LabelCountMismatch,
    MalformedPoseLine,
    MalformedScan,
)
from .evaluate import DEFAULT_VOXEL_SIZE, compute_pr_rr, interval_sweep
from .pipeline import FrameStats, accumulate_map, check_conservation, run_sequence

logger = logging.getLogger("erasorpp")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4
INPUT_ERRORS = (OSError, MalformedScan, LabelCountMismatch, MalformedPoseLine, EmptyGroundTruth)


def parse_classes(text: str) -> frozenset[int]:
    """``"252..259"`` or ``"252,253,300..302"`` -> set of ints."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty class list")
    return frozenset(out)


def _format_for(path: Path) -> str:
    return "bin" if path.suffix.lower() == ".bin" else "ply"


def _source(args, with_labels=True) -> ingest.SequenceSource:
    return ingest.SequenceSource.from_directory(
        args.sequence, args.poses, args.calib, args.start, args.end, with_labels=with_labels
    )


def write_stats_csv(path, stats: list[FrameStats]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(FrameStats.CSV_COLUMNS)
        for s in stats:
            w.writerow([s.frame, s.dynamic_bins, s.rgpf_count, f"{s.seconds:.6f}"])


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.interval is not None:
        cfg = type(cfg)(cfg.voi, cfg.classify, cfg.retrieval, frame_interval=args.interval)
    source = _source(args, with_labels=False)
    initial = accumulate_map(source)
    if args.diagnostics:
        Path(args.diagnostics).mkdir(parents=True, exist_ok=True)
    state, stats = run_sequence(source, cfg, initial_map=initial, diagnostics_dir=args.diagnostics)
    check_conservation(initial, state)
    ingest.write_cloud(state.map, args.out, _format_for(Path(args.out)))
    if args.rejected:
        ingest.write_cloud(state.rejected, args.rejected, _format_for(Path(args.rejected)))
    if args.stats:
        write_stats_csv(args.stats, stats)
    print(f"kept {len(state.map)} points, rejected {len(state.rejected)} over {len(stats)} frames")
    return EXIT_OK


def cmd_export(args) -> int:
    cloud = ingest.read_cloud(args.map)
    ingest.write_cloud(cloud, args.out, args.format)
    return EXIT_OK


def _gt_source(args) -> ingest.SequenceSource:
    source = ingest.SequenceSource.from_directory(args.gt, args.poses, args.calib, args.start, args.end)
    if not source.has_labels:
        raise EmptyGroundTruth(f"{args.gt}: labels missing for some frames")
    return source


def cmd_eval(args) -> int:
    gt_map = accumulate_map(_gt_source(args))
    out_map = ingest.read_cloud(args.map)
    report = compute_pr_rr(gt_map, out_map, args.voxel, args.dynamic_classes)
    Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"PR={report.PR:.6f} RR={report.RR:.6f} F1={report.F1:.6f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    rows = interval_sweep(_gt_source(args), cfg, args.intervals, args.voxel, args.dynamic_classes)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["interval", "PR", "RR", "F1", "error"])
        for r in rows:
            w.writerow([r.interval, r.PR, r.RR, r.F1, r.error or ""])
    return EXIT_OK


def cmd_synth(args) -> int:
    from . import synth

    if args.config:
        try:
            data = yaml.safe_load(Path(args.config).read_text())
            scene = synth.scene_from_dict(data or {})
        except (yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
    else:
        scene = synth.ablation_scene() if args.preset == "ablation" else synth.reference_scene()
        if args.seed is not None:
            scene.seed = args.seed
    source = synth.generate_scene(scene)
    ingest.write_sequence(args.out, source.frames, source.poses)
    print(f"wrote {len(source.frames)} frames to {args.out}")
    return EXIT_OK


def _intervals(text: str) -> list[int]:
    vals = [int(v) for v in text.split(",") if v.strip()]
    if any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("intervals must be >= 1")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erasorpp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def sequence_args(p, flag="--sequence"):
        p.add_argument(flag, required=True, help="directory with velodyne/ (and labels/)")
        p.add_argument("--poses", help="pose file (default: <dir>/poses.txt)")
        p.add_argument("--calib", help="calibration file with the Tr: line")
        p.add_argument("--start", type=int, default=0)
        p.add_argument("--end", type=int, default=None, help="last frame, inclusive")

    def metric_args(p):
        p.add_argument("--voxel", type=float, default=DEFAULT_VOXEL_SIZE)
        p.add_argument("--dynamic-classes", type=parse_classes, default=ingest.DEFAULT_DYNAMIC_CLASSES)

    p = sub.add_parser("run", help="remove dynamic points from the accumulated map")
    sequence_args(p)
    p.add_argument("--interval", type=int, default=None, help="overrides frame_interval")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="cleaned map (.ply or .bin)")
    p.add_argument("--rejected", help="rejected points (.ply or .bin)")
    p.add_argument("--stats", help="per-frame statistics CSV")
    p.add_argument("--diagnostics", help="directory for per-frame bin CSVs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export", help="convert a map between PLY and KITTI binary")
    p.add_argument("--map", required=True)
    p.add_argument("--format", choices=["ply", "bin"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="voxel-wise PR/RR/F1 of a cleaned map")
    sequence_args(p, "--gt")
    p.add_argument("--map", required=True)
    metric_args(p)
    p.add_argument("--out", required=True, help="report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="PR/RR/F1 for several frame intervals")
    sequence_args(p, "--gt")
    p.add_argument("--config", required=True)
    p.add_argument("--intervals", type=_intervals, required=True, help="e.g. 1,2,4")
    metric_args(p)
    p.add_argument("--out", required=True, help="CSV table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic labelled sequence")
    p.add_argument("--config", help="scene YAML; omitted -> a preset")
    p.add_argument("--preset", choices=["reference", "ablation"], default="reference")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        logger.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
