"""Command-line entry points: fetch, analyze, detect.

Exit codes are a stable contract for automation:
  0  success (detect: no synthetic_likely verdicts)
  1  fetch: every request failed
  2  fetch: some requests failed
  3  analyze: nothing usable in the corpus
  5  detect: at least one synthetic_likely verdict
 64  usage error (bad flags, missing model, unusable input)
 65  malformed goal-post data
 74  storage failure (unreadable/unwritable artifact)
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from ._util import fmt2, map_ordered
from .analyzer import (
    GoalPostTable,
    IOARecord,
    aggregate,
    analyze_sample,
    failure_record,
    read_goalposts,
    write_csv,
    write_goalposts,
)
from .detector import Classification, DetectorConfig, detect_batch, write_verdicts
from .errors import (
    BackendUnavailable,
    DegenerateResolution,
    EmptyCorpus,
    ImageDecodeError,
    MalformedGoalposts,
    StorageError,
)
from .ingest import LadderScheme, build_ladder, fetch_samples, load_image
from .landmarks import (
    DlibBackend,
    FixtureBackend,
    LandmarkBackend,
    SerializedBackend,
)

MODEL_ENV = "BLADERUNNER_MODEL"
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")

EX_OK = 0
EX_FETCH_ALL_FAILED = 1
EX_FETCH_PARTIAL = 2
EX_EMPTY_CORPUS = 3
EX_SYNTHETIC_FOUND = 5
EX_USAGE = 64
EX_DATA = 65
EX_IOERR = 74


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration for one command invocation."""

    model_path: Path | None = None
    ladder_scheme: LadderScheme = LadderScheme.BOTH
    sum_tolerance_px: float = 4.0
    midline_margin_px: float = 64.0
    strict_mode: bool = False
    fetch_min_interval_ms: int = 1500
    annotate_dir: Path | None = None

    def __post_init__(self):
        if self.sum_tolerance_px < 0 or self.midline_margin_px < 0:
            raise ValueError("tolerances must be >= 0")
        if self.fetch_min_interval_ms < 0:
            raise ValueError("fetch_min_interval_ms must be >= 0")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        model = getattr(args, "model", None)
        annotate = getattr(args, "annotate", None)
        try:
            return cls(
                model_path=Path(model) if model else None,
                ladder_scheme=LadderScheme(getattr(args, "ladder", "both")),
                sum_tolerance_px=getattr(args, "sum_tolerance", 4.0),
                midline_margin_px=getattr(args, "midline_margin", 64.0),
                strict_mode=getattr(args, "strict", False),
                fetch_min_interval_ms=getattr(args, "min_interval", 1500),
                annotate_dir=Path(annotate) if annotate else None,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(
            sum_tolerance_px=self.sum_tolerance_px,
            midline_margin_px=self.midline_margin_px,
            strict_mode=self.strict_mode,
            annotate_dir=self.annotate_dir,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we own the code
        raise UsageError(f"{self.prog}: {message}")


def _build_backend(spec: str, config: RunConfig) -> LandmarkBackend:
    if spec.startswith("fixture:"):
        fixture_path = spec[len("fixture:"):]
        if not fixture_path:
            raise UsageError("fixture backend needs a path: --backend fixture:PATH")
        try:
            return FixtureBackend.from_json(fixture_path)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if spec == "dlib":
        model = config.model_path or os.environ.get(MODEL_ENV)
        if not model:
            raise UsageError(
                f"the dlib backend needs a landmark model: pass --model or set {MODEL_ENV}"
            )
        try:
            return DlibBackend(Path(model))
        except BackendUnavailable as exc:
            raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown backend {spec!r}; use 'dlib' or 'fixture:PATH'")


def _collect_images(root: Path) -> list[Path]:
    return sorted(
        p for p in root.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def cmd_fetch(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    manifest = fetch_samples(
        args.source,
        args.count,
        args.out,
        min_interval_ms=config.fetch_min_interval_ms,
    )
    for entry in manifest.entries:
        if entry.ok:
            dup = "  (duplicate body)" if entry.duplicate else ""
            print(f"[{entry.index:03d}] OK    {entry.path}{dup}")
        else:
            print(f"[{entry.index:03d}] ERROR {entry.error}")
    print(f"fetched {manifest.ok_count}/{len(manifest.entries)}")
    if manifest.error_count == 0:
        return EX_OK
    if manifest.ok_count == 0:
        return EX_FETCH_ALL_FAILED
    return EX_FETCH_PARTIAL


def cmd_analyze(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    input_dir = Path(args.input)
    if not input_dir.is_dir():
        raise UsageError(f"--input {input_dir} is not a directory")
    paths = _collect_images(input_dir)
    if not paths:
        raise UsageError(f"no images ({', '.join(IMAGE_SUFFIXES)}) in {input_dir}")

    backend = _build_backend(args.backend, config)
    if args.jobs > 1 and not backend.thread_safe:
        backend = SerializedBackend(backend)

    def run(path: Path) -> list[IOARecord]:
        try:
            sample = load_image(path)
            ladder = build_ladder(sample.width, sample.height, config.ladder_scheme)
        except (ImageDecodeError, DegenerateResolution) as exc:
            return [
                failure_record(
                    path.name, 0, 0, type(exc).__name__, pose_label=args.pose_label
                )
            ]
        return analyze_sample(sample, ladder, backend, pose_label=args.pose_label)

    records = [r for batch in map_ordered(run, paths, jobs=args.jobs) for r in batch]
    write_csv(records, args.out_csv)
    print(f"wrote {len(records)} records to {args.out_csv}")

    try:
        table = aggregate(records, corpus_description=args.description)
    except EmptyCorpus as exc:
        print(f"no goal-posts written: {exc}", file=sys.stderr)
        return EX_EMPTY_CORPUS

    write_goalposts(table, args.out_goalposts)
    _print_table(table)
    print(f"wrote {len(table)} goal-post entries to {args.out_goalposts}")
    return EX_OK


def _print_table(table: GoalPostTable) -> None:
    for width, height in sorted(table.entries, reverse=True):
        e = table.entries[(width, height)]
        print(
            f"{width}x{height}  n={e.n_samples}"
            f"  left=({fmt2(e.left_mean[0])}, {fmt2(e.left_mean[1])})"
            f" std=({fmt2(e.left_std[0])}, {fmt2(e.left_std[1])})"
            f"  right=({fmt2(e.right_mean[0])}, {fmt2(e.right_mean[1])})"
            f" std=({fmt2(e.right_std[0])}, {fmt2(e.right_std[1])})"
            f"  tol={fmt2(e.tolerance_px)}"
        )


def cmd_detect(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    input_path = Path(args.input)
    if input_path.is_file():
        paths = [input_path]
    elif input_path.is_dir():
        paths = _collect_images(input_path)
        if not paths:
            raise UsageError(f"no images ({', '.join(IMAGE_SUFFIXES)}) in {input_path}")
    else:
        raise UsageError(f"--input {input_path} does not exist")

    table = read_goalposts(args.goalposts)
    backend = _build_backend(args.backend, config)
    verdicts, summary = detect_batch(
        paths, table, backend, config=config.detector_config(), jobs=args.jobs
    )
    write_verdicts(verdicts, args.out_csv)
    for name in Classification.ALL:
        print(f"{name}: {summary[name]}")
    print(f"wrote {len(verdicts)} verdicts to {args.out_csv}")
    return EX_SYNTHETIC_FOUND if summary[Classification.SYNTHETIC_LIKELY] else EX_OK


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--backend",
        default="dlib",
        help="landmark backend: 'dlib' (default) or 'fixture:PATH' with planted faces",
    )
    parser.add_argument(
        "--model",
        help=f"path to the 68-point model file for the dlib backend (or set {MODEL_ENV})",
    )
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker threads (default 1)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="bladerunner",
        description="Derive eye-coordinate goal-posts from synthetic-face corpora "
        "and flag probable GAN-generated faces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fetch = sub.add_parser("fetch", help="download images from a generator endpoint")
    fetch.add_argument("--source", required=True, help="URL returning one image per request")
    fetch.add_argument("--count", type=int, required=True, help="number of images")
    fetch.add_argument("--out", required=True, help="output directory")
    fetch.add_argument(
        "--min-interval",
        dest="min_interval",
        type=int,
        default=1500,
        help="minimum milliseconds between request starts (default 1500)",
    )
    fetch.set_defaults(func=cmd_fetch)

    analyze = sub.add_parser("analyze", help="measure a corpus and emit goal-posts")
    analyze.add_argument("--input", required=True, help="directory of corpus images")
    analyze.add_argument("--out-csv", dest="out_csv", required=True, help="measurement CSV path")
    analyze.add_argument(
        "--out-goalposts", dest="out_goalposts", required=True, help="goal-post JSON path"
    )
    analyze.add_argument(
        "--ladder",
        choices=[s.value for s in LadderScheme],
        default="both",
        help="resolution ladder scheme (default both)",
    )
    analyze.add_argument("--pose-label", dest="pose_label", help="optional pose tag for records")
    analyze.add_argument(
        "--description", default="", help="free-text corpus description stored in the JSON"
    )
    _add_backend_flags(analyze)
    analyze.set_defaults(func=cmd_analyze)

    detect = sub.add_parser("detect", help="classify images against goal-posts")
    detect.add_argument("--input", required=True, help="image file or directory")
    detect.add_argument("--goalposts", required=True, help="goal-post JSON path")
    detect.add_argument("--out-csv", dest="out_csv", required=True, help="verdict CSV path")
    detect.add_argument("--annotate", help="directory for annotated PNG copies")
    detect.add_argument(
        "--strict",
        action="store_true",
        help="also require sum and midline rules for synthetic_likely",
    )
    detect.add_argument(
        "--sum-tolerance",
        dest="sum_tolerance",
        type=float,
        default=4.0,
        help="sum-rule tolerance in px at 1024 width (default 4)",
    )
    detect.add_argument(
        "--midline-margin",
        dest="midline_margin",
        type=float,
        default=64.0,
        help="midline margin in px at 1024 height (default 64)",
    )
    _add_backend_flags(detect)
    detect.set_defaults(func=cmd_detect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    except MalformedGoalposts as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_DATA
    except StorageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_IOERR
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
