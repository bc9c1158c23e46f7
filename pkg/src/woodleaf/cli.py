"""Command-line front end.

Three subcommands: ``classify`` runs the pipeline on one or more clouds,
``evaluate`` scores a predicted label file against a reference, and
``synth`` writes a synthetic labeled tree for testing. Diagnostics and
progress go to stderr; data goes to files or stdout, never mixed.

Exit codes: 0 success, 1 bad usage or invalid parameters, 2 I/O or parse
failure, 3 pipeline failure (for example an empty training class).
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .cloud import LabeledCloud
from .cloudio import (CloudFileFormat, read_cloud, read_labels, write_cloud,
                      write_cloud_colored, write_labels)
from .errors import (CloudFormatError, EmptyClassError, ParameterError,
                     WoodLeafError)
from .metrics import evaluate, throughput
from .params import ScanConfig, params_from_mapping
from .pipeline import classify, estimate_angular_step
from .synth import default_acceptance_tree, generate_tree

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_PIPELINE = 3

_EXIT_HELP = ("exit codes: 0 success; 1 bad usage or invalid parameters; "
              "2 I/O or parse failure; 3 pipeline failure (e.g. an empty "
              "training class)")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group(
        "pipeline parameters", "unset flags keep the library defaults")
    group.add_argument("--seed", type=int, metavar="N",
                       help="random seed for the sphere sampling draw")
    group.add_argument("--n-seeds", type=int, metavar="N",
                       help="number of sampling spheres")
    group.add_argument("--radius", type=float, metavar="R",
                       help="sampling sphere radius in meters")
    group.add_argument("--k", type=int, metavar="K",
                       help="neighbor count for the spacing test")
    group.add_argument("--thr", type=float, metavar="T",
                       help="largest mean-spacing ratio kept as wood")
    group.add_argument("--divisions", type=int, metavar="N",
                       help="voxel grid divisions per axis")
    group.add_argument("--voxel-ratio", type=float, metavar="T",
                       help="density ratio below which a voxel turns leaf")
    group.add_argument("--sd1", type=float, metavar="M",
                       help="distance multiplier of the unconditional "
                            "verification promotion")
    group.add_argument("--sd2", type=float, metavar="M",
                       help="distance multiplier of the intensity-gated "
                            "verification promotion")
    group.add_argument("--height-fraction", type=float, metavar="F",
                       help="tree-height fraction under which verification "
                            "grows voxel regions")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="woodleaf", epilog=_EXIT_HELP,
                     description="Wood/leaf classification of terrestrial "
                                 "laser scans of trees.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser, metavar="COMMAND")

    cls = sub.add_parser(
        "classify", epilog=_EXIT_HELP,
        help="separate clouds into wood and leaf points",
        description="Classify each input cloud and write one 0/1 label per "
                    "point (0 wood, 1 leaf). Progress and timing go to "
                    "stderr.")
    cls.add_argument("--input", nargs="+", required=True, metavar="CLOUD",
                     help="input cloud file(s)")
    cls.add_argument("--output", required=True, metavar="PATH",
                     help="label file to write; with several inputs, a "
                          "directory that receives one .labels file per "
                          "input")
    cls.add_argument("--format", choices=["auto", "xyzi", "ply", "ply-binary"],
                     default="auto",
                     help="input format (default: detect from extension and "
                          "header)")
    cls.add_argument("--scanner-pos", nargs=3, type=float,
                     default=(0.0, 0.0, 0.0), metavar=("X", "Y", "Z"),
                     help="scanner position in the cloud's world frame "
                          "(default: origin)")
    cls.add_argument("--angular-step", type=float, metavar="RAD",
                     help="scanner angular resolution in radians; required "
                          "unless --estimate-step is given")
    cls.add_argument("--estimate-step", action="store_true",
                     help="estimate the angular step from the cloud itself "
                          "(logged to stderr)")
    cls.add_argument("--colored-ply", metavar="PATH",
                     help="also write a color-coded PLY (brown wood, green "
                          "leaves); with several inputs, a directory")
    cls.add_argument("--jobs", type=int, default=1, metavar="N",
                     help="classify up to N input files concurrently")
    _add_param_flags(cls)
    cls.set_defaults(handler=_run_classify)

    ev = sub.add_parser(
        "evaluate", epilog=_EXIT_HELP,
        help="score predicted labels against a reference",
        description="Compare two label files and report the confusion "
                    "counts, overall accuracy, kappa, and Matthews "
                    "correlation. The table goes to stdout.")
    ev.add_argument("--labels", required=True, metavar="PATH",
                    help="predicted label file")
    ev.add_argument("--reference", required=True, metavar="PATH",
                    help="reference (ground truth) label file")
    ev.add_argument("--output", metavar="PATH",
                    help="also save the report as key=value lines")
    ev.set_defaults(handler=_run_evaluate)

    sy = sub.add_parser(
        "synth", epilog=_EXIT_HELP,
        help="generate a synthetic labeled tree scan",
        description="Simulate a scan of a synthetic tree and write the "
                    "cloud plus its ground-truth labels.")
    sy.add_argument("--output", required=True, metavar="PATH",
                    help="cloud file to write")
    sy.add_argument("--labels", metavar="PATH",
                    help="ground-truth label file (default: OUTPUT.labels)")
    sy.add_argument("--format", choices=["auto", "xyzi", "ply", "ply-binary"],
                    default="auto",
                    help="output format (default: by extension, .ply means "
                         "ascii PLY)")
    sy.add_argument("--seed", type=int, metavar="N",
                    help="random seed for the generator")
    sy.set_defaults(handler=_run_synth)
    return parser


def _params_from_args(args: argparse.Namespace):
    return params_from_mapping({
        "n_seeds": args.n_seeds,
        "sphere_radius": args.radius,
        "k_neighbors": args.k,
        "neighbor_ratio_threshold": args.thr,
        "voxel_divisions": args.divisions,
        "voxel_ratio_threshold": args.voxel_ratio,
        "sd1": args.sd1,
        "sd2": args.sd2,
        "height_fraction": args.height_fraction,
        "rng_seed": args.seed,
    })


def _read_format(flag: str) -> CloudFileFormat | None:
    return None if flag == "auto" else CloudFileFormat(flag)


def _write_format(flag: str, path: Path) -> CloudFileFormat:
    if flag != "auto":
        return CloudFileFormat(flag)
    if path.suffix.lower() == ".ply":
        return CloudFileFormat.PLY_ASCII
    return CloudFileFormat.XYZI_TEXT


def _run_classify(args: argparse.Namespace) -> int:
    if args.angular_step is None and not args.estimate_step:
        print("woodleaf classify: error: --angular-step is required unless "
              "--estimate-step is given", file=sys.stderr)
        return EXIT_USAGE
    if args.jobs < 1:
        print(f"woodleaf classify: error: --jobs must be >= 1, got "
              f"{args.jobs}", file=sys.stderr)
        return EXIT_USAGE
    params = _params_from_args(args)
    fmt = _read_format(args.format)
    scanner_pos = tuple(args.scanner_pos)
    inputs = [Path(p) for p in args.input]
    out = Path(args.output)
    colored = Path(args.colored_ply) if args.colored_ply else None
    multi = len(inputs) > 1
    if multi:
        out.mkdir(parents=True, exist_ok=True)
        if colored is not None:
            colored.mkdir(parents=True, exist_ok=True)

    def job(path: Path) -> str:
        # Placeholder step while reading; replaced below if estimating.
        step = args.angular_step if args.angular_step is not None else 1.0
        scan = ScanConfig(angular_step=step, scanner_position=scanner_pos)
        cloud = read_cloud(path, fmt=fmt, scan_config=scan)
        lines = [f"{path}: {cloud.n_points} points"]
        if args.angular_step is None:
            step = estimate_angular_step(cloud, params)
            scan = ScanConfig(angular_step=step, scanner_position=scanner_pos)
            lines.append(f"{path}: estimated angular step {step:.6e} rad")
        start = time.perf_counter()
        labels, trace = classify(cloud, scan, params)
        elapsed = time.perf_counter() - start
        label_path = out / (path.stem + ".labels") if multi else out
        write_labels(labels, label_path)
        if colored is not None:
            colored_path = (colored / (path.stem + ".ply")
                            if multi else colored)
            classified = LabeledCloud(xyz=cloud.xyz, intensity=cloud.intensity,
                                      labels=labels,
                                      scanner_position=cloud.scanner_position)
            write_cloud_colored(classified, colored_path)
            lines.append(f"{path}: colored cloud -> {colored_path}")
        threshold = trace.threshold
        lines.append(f"{path}: intensity threshold {threshold.value:.6g} "
                     f"({threshold.provenance.value})")
        lines.append(trace.counts_table())
        _, ms_per_million = throughput(max(elapsed, 1e-9), cloud.n_points)
        lines.append(f"{path}: {elapsed:.3f} s "
                     f"({ms_per_million:.1f} ms per million points)")
        lines.append(f"{path}: labels -> {label_path}")
        return "\n".join(lines)

    if args.jobs > 1 and multi:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(job, inputs))
    else:
        reports = [job(path) for path in inputs]
    for report in reports:
        print(report, file=sys.stderr)
    return EXIT_OK


def _run_evaluate(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    predicted = read_labels(Path(args.labels))
    reference = read_labels(Path(args.reference))
    elapsed = max(time.perf_counter() - start, 1e-9)
    report = evaluate(predicted, reference, elapsed_seconds=elapsed)
    print(report.as_table())
    if args.output:
        Path(args.output).write_text(report.as_key_values() + "\n",
                                     encoding="ascii")
        print(f"report -> {args.output}", file=sys.stderr)
    return EXIT_OK


def _run_synth(args: argparse.Namespace) -> int:
    spec = default_acceptance_tree()
    if args.seed is not None:
        spec = replace(spec, rng_seed=args.seed)
    cloud = generate_tree(spec)
    out = Path(args.output)
    write_cloud(cloud, out, fmt=_write_format(args.format, out))
    label_path = Path(args.labels) if args.labels else Path(str(out) + ".labels")
    write_labels(cloud.labels, label_path)
    wood = int(cloud.n_points - cloud.labels.sum())
    print(f"generated {cloud.n_points} points "
          f"({wood} wood, {cloud.n_points - wood} leaf)", file=sys.stderr)
    print(f"cloud -> {out}", file=sys.stderr)
    print(f"labels -> {label_path}", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CloudFormatError as exc:
        print(f"woodleaf: {exc}", file=sys.stderr)
        return EXIT_IO
    except EmptyClassError as exc:
        print(f"woodleaf: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except ParameterError as exc:
        print(f"woodleaf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WoodLeafError as exc:
        print(f"woodleaf: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as exc:
        print(f"woodleaf: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
