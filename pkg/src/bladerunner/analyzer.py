"""Corpus analysis: measure eye coordinates across resolution ladders
and aggregate them into per-resolution goal-post tables.

The CSV and JSON formats written here are the stable interchange
artifacts of the pipeline; see write_csv / write_goalposts for the
exact schemas.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from statistics import fmean, pstdev

from ._util import fmt2, round2, utc_now_iso
from .errors import (
    BackendUnavailable,
    EmptyCorpus,
    LandmarkFailure,
    MalformedCsv,
    MalformedGoalposts,
    NoFaceDetected,
    StorageError,
)
from .geometry import eye_geometry, scale_goalpost
from .ingest import ImageSample, ResolutionLadder, resize
from .landmarks import LandmarkBackend, primary_face

CSV_COLUMNS = (
    "sample_id",
    "source",
    "width",
    "height",
    "left_eye_x",
    "left_eye_y",
    "right_eye_x",
    "right_eye_y",
    "interocular",
    "face_count",
    "multi_face",
    "landmark_ok",
    "pose_label",
    "error",
)

# recomputed interocular must agree with the recorded one; 0.05 px
# absorbs 2-decimal rounding of the five inputs
_CONSISTENCY_TOL = 0.05


@dataclass(frozen=True)
class IOARecord:
    """One eye-coordinate measurement of one sample at one resolution."""

    sample_id: str
    source: str
    width: int
    height: int
    left_eye_x: float | None
    left_eye_y: float | None
    right_eye_x: float | None
    right_eye_y: float | None
    interocular: float | None
    face_count: int
    multi_face: bool
    landmark_ok: bool
    pose_label: str | None = None
    error: str | None = None

    def __post_init__(self):
        eye_fields = (
            self.left_eye_x,
            self.left_eye_y,
            self.right_eye_x,
            self.right_eye_y,
            self.interocular,
        )
        if self.landmark_ok:
            if any(v is None for v in eye_fields):
                raise ValueError(f"{self.sample_id}: landmark_ok record missing eye fields")
            recomputed = math.hypot(
                self.right_eye_x - self.left_eye_x, self.right_eye_y - self.left_eye_y
            )
            if abs(recomputed - self.interocular) > _CONSISTENCY_TOL:
                raise ValueError(
                    f"{self.sample_id}: interocular {self.interocular} does not match "
                    f"recorded centers (expected {recomputed:.4f})"
                )
        else:
            if any(v is not None for v in eye_fields):
                raise ValueError(f"{self.sample_id}: failed record carries eye fields")
            if not self.error:
                raise ValueError(f"{self.sample_id}: failed record missing error name")
        if self.face_count < 0:
            raise ValueError(f"{self.sample_id}: negative face_count")


@dataclass(frozen=True)
class GoalPostEntry:
    """Aggregated eye statistics for one resolution."""

    width: int
    height: int
    left_mean: tuple[float, float]
    right_mean: tuple[float, float]
    left_std: tuple[float, float]
    right_std: tuple[float, float]
    n_samples: int
    tolerance_px: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"degenerate goal-post resolution {self.width}x{self.height}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if any(s < 0 for s in (*self.left_std, *self.right_std)):
            raise ValueError("std components must be >= 0")
        if self.tolerance_px < 0:
            raise ValueError("tolerance_px must be >= 0")
        for mx, my in (self.left_mean, self.right_mean):
            if not (0 <= mx <= self.width and 0 <= my <= self.height):
                raise ValueError(
                    f"mean ({mx}, {my}) outside frame {self.width}x{self.height}"
                )


@dataclass(frozen=True)
class GoalPostTable:
    """Goal-post entries keyed by (width, height)."""

    entries: dict[tuple[int, int], GoalPostEntry]
    created_at: str
    corpus_description: str = ""

    def __post_init__(self):
        for key, entry in self.entries.items():
            if key != (entry.width, entry.height):
                raise ValueError(f"entry {entry.width}x{entry.height} stored under key {key}")

    def get(self, width: int, height: int) -> GoalPostEntry | None:
        return self.entries.get((width, height))

    def __len__(self) -> int:
        return len(self.entries)


def failure_record(
    sample_id: str,
    width: int,
    height: int,
    error: str,
    face_count: int = 0,
    source: str = "local_file",
    pose_label: str | None = None,
) -> IOARecord:
    """A landmark_ok=false record for a sample that produced no geometry.

    Samples that never decoded record width/height as 0.
    """
    return IOARecord(
        sample_id=sample_id,
        source=source,
        width=width,
        height=height,
        left_eye_x=None,
        left_eye_y=None,
        right_eye_x=None,
        right_eye_y=None,
        interocular=None,
        face_count=face_count,
        multi_face=face_count > 1,
        landmark_ok=False,
        pose_label=pose_label,
        error=error,
    )


def analyze_sample(
    sample: ImageSample,
    ladder: ResolutionLadder,
    backend: LandmarkBackend,
    pose_label: str | None = None,
) -> list[IOARecord]:
    """Measure one sample at every ladder rung.

    Failures at a rung (no face, bad landmarks, missing backend) become
    landmark_ok=false records naming the error; remaining rungs still
    run. Nothing raises.
    """
    records = []
    for width, height in ladder:
        rung = resize(sample, (width, height))
        try:
            face = primary_face(rung, backend)
            geo = eye_geometry(face.landmarks)
            records.append(
                IOARecord(
                    sample_id=rung.sample_id,
                    source=sample.source.value,
                    width=width,
                    height=height,
                    left_eye_x=geo.left_center[0],
                    left_eye_y=geo.left_center[1],
                    right_eye_x=geo.right_center[0],
                    right_eye_y=geo.right_center[1],
                    interocular=geo.interocular_distance,
                    face_count=face.face_count,
                    multi_face=face.multi_face,
                    landmark_ok=True,
                    pose_label=pose_label,
                )
            )
        except (NoFaceDetected, LandmarkFailure, BackendUnavailable) as exc:
            records.append(
                IOARecord(
                    sample_id=rung.sample_id,
                    source=sample.source.value,
                    width=width,
                    height=height,
                    left_eye_x=None,
                    left_eye_y=None,
                    right_eye_x=None,
                    right_eye_y=None,
                    interocular=None,
                    face_count=getattr(exc, "face_count", 0),
                    multi_face=getattr(exc, "face_count", 0) > 1,
                    landmark_ok=False,
                    pose_label=pose_label,
                    error=type(exc).__name__,
                )
            )
    return records


def aggregate(
    records: list[IOARecord],
    corpus_description: str = "",
    pose_label: str | None = None,
    created_at: str | None = None,
) -> GoalPostTable:
    """Collapse measurement records into per-resolution goal-posts.

    Only landmark_ok records count; pose_label, when given, further
    restricts to that label. Std is population std (the corpus is the
    population), and tolerance_px = max(2.0, 2 x the largest std
    component) so tight corpora keep the scaling margin floor.
    """
    usable = [
        r
        for r in records
        if r.landmark_ok and (pose_label is None or r.pose_label == pose_label)
    ]
    if not usable:
        raise EmptyCorpus("no usable landmark records to aggregate")

    groups: dict[tuple[int, int], list[IOARecord]] = {}
    for record in usable:
        groups.setdefault((record.width, record.height), []).append(record)

    entries = {}
    for (width, height), group in sorted(groups.items()):
        lx = [r.left_eye_x for r in group]
        ly = [r.left_eye_y for r in group]
        rx = [r.right_eye_x for r in group]
        ry = [r.right_eye_y for r in group]

        def stats(values: list[float]) -> tuple[float, float]:
            return fmean(values), pstdev(values)

        (lmx, lsx), (lmy, lsy) = stats(lx), stats(ly)
        (rmx, rsx), (rmy, rsy) = stats(rx), stats(ry)
        entries[(width, height)] = GoalPostEntry(
            width=width,
            height=height,
            left_mean=(lmx, lmy),
            right_mean=(rmx, rmy),
            left_std=(lsx, lsy),
            right_std=(rsx, rsy),
            n_samples=len(group),
            tolerance_px=max(2.0, 2.0 * max(lsx, lsy, rsx, rsy)),
        )
    return GoalPostTable(
        entries=entries,
        created_at=created_at or utc_now_iso(),
        corpus_description=corpus_description,
    )


def _record_to_row(record: IOARecord) -> list[str]:
    def num(v: float | None) -> str:
        return "" if v is None else fmt2(v)

    return [
        record.sample_id,
        record.source,
        str(record.width),
        str(record.height),
        num(record.left_eye_x),
        num(record.left_eye_y),
        num(record.right_eye_x),
        num(record.right_eye_y),
        num(record.interocular),
        str(record.face_count),
        "true" if record.multi_face else "false",
        "true" if record.landmark_ok else "false",
        record.pose_label or "",
        record.error or "",
    ]


def write_csv(records: list[IOARecord], path: Path | str) -> None:
    """Write records as UTF-8 comma-separated LF lines, one header row."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for record in records:
                writer.writerow(_record_to_row(record))
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from exc


def _parse_row(row: list[str], line_no: int) -> IOARecord:
    def opt_float(text: str) -> float | None:
        return None if text == "" else float(text)

    def parse_bool(text: str) -> bool:
        if text == "true":
            return True
        if text == "false":
            return False
        raise ValueError(f"bad boolean {text!r}")

    try:
        return IOARecord(
            sample_id=row[0],
            source=row[1],
            width=int(row[2]),
            height=int(row[3]),
            left_eye_x=opt_float(row[4]),
            left_eye_y=opt_float(row[5]),
            right_eye_x=opt_float(row[6]),
            right_eye_y=opt_float(row[7]),
            interocular=opt_float(row[8]),
            face_count=int(row[9]),
            multi_face=parse_bool(row[10]),
            landmark_ok=parse_bool(row[11]),
            pose_label=row[12] or None,
            error=row[13] or None,
        )
    except ValueError as exc:
        raise MalformedCsv(f"line {line_no}: {exc}") from exc


def read_csv(path: Path | str) -> list[IOARecord]:
    """Read a measurement CSV, rejecting schema violations.

    A repeated header row anywhere in the body is the classic defect
    this format guards against; it raises MalformedCsv.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from exc

    if not rows:
        raise MalformedCsv(f"{path}: empty file, header row required")
    if tuple(rows[0]) != CSV_COLUMNS:
        raise MalformedCsv(f"{path}: bad header {rows[0]!r}")

    records = []
    for line_no, row in enumerate(rows[1:], start=2):
        if tuple(row) == CSV_COLUMNS:
            raise MalformedCsv(f"{path}: duplicate header at line {line_no}")
        if len(row) != len(CSV_COLUMNS):
            raise MalformedCsv(
                f"{path}: line {line_no} has {len(row)} columns, expected {len(CSV_COLUMNS)}"
            )
        records.append(_parse_row(row, line_no))
    return records


def _entry_payload(entry: GoalPostEntry) -> dict:
    return {
        "width": entry.width,
        "height": entry.height,
        "left_mean": [round2(entry.left_mean[0]), round2(entry.left_mean[1])],
        "right_mean": [round2(entry.right_mean[0]), round2(entry.right_mean[1])],
        "left_std": [round2(entry.left_std[0]), round2(entry.left_std[1])],
        "right_std": [round2(entry.right_std[0]), round2(entry.right_std[1])],
        "n_samples": entry.n_samples,
        "tolerance_px": round2(entry.tolerance_px),
    }


def write_goalposts(table: GoalPostTable, path: Path | str) -> None:
    """Serialize a goal-post table as versioned JSON, entries sorted by
    resolution, floats at 2 decimals."""
    payload = {
        "version": 1,
        "corpus_description": table.corpus_description,
        "created_at": table.created_at,
        "entries": [_entry_payload(table.entries[key]) for key in sorted(table.entries)],
    }
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from exc


_ENTRY_KEYS = {
    "width",
    "height",
    "left_mean",
    "right_mean",
    "left_std",
    "right_std",
    "n_samples",
    "tolerance_px",
}


def _parse_pair(value, label: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise MalformedGoalposts(f"{label} must be a [x, y] pair")
    x, y = value
    for v in (x, y):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedGoalposts(f"{label} must be numeric")
    return (float(x), float(y))


def read_goalposts(path: Path | str) -> GoalPostTable:
    """Parse and validate a goal-post JSON file.

    IO problems raise StorageError; anything wrong with the content
    itself (syntax, schema, invariant violations, duplicate resolutions)
    raises MalformedGoalposts.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedGoalposts(f"{path}: invalid JSON: {exc}") from exc

    if not isinstance(data, dict):
        raise MalformedGoalposts(f"{path}: top level must be an object")
    if data.get("version") != 1:
        raise MalformedGoalposts(f"{path}: unsupported version {data.get('version')!r}")
    for key in ("corpus_description", "created_at", "entries"):
        if key not in data:
            raise MalformedGoalposts(f"{path}: missing key {key!r}")
    if not isinstance(data["entries"], list):
        raise MalformedGoalposts(f"{path}: entries must be a list")

    entries: dict[tuple[int, int], GoalPostEntry] = {}
    for n, raw in enumerate(data["entries"]):
        if not isinstance(raw, dict):
            raise MalformedGoalposts(f"{path}: entry {n} must be an object")
        missing = _ENTRY_KEYS - raw.keys()
        if missing:
            raise MalformedGoalposts(f"{path}: entry {n} missing {sorted(missing)}")
        if not isinstance(raw["width"], int) or not isinstance(raw["height"], int):
            raise MalformedGoalposts(f"{path}: entry {n} dimensions must be integers")
        if not isinstance(raw["n_samples"], int) or isinstance(raw["n_samples"], bool):
            raise MalformedGoalposts(f"{path}: entry {n} n_samples must be an integer")
        if isinstance(raw["tolerance_px"], bool) or not isinstance(
            raw["tolerance_px"], (int, float)
        ):
            raise MalformedGoalposts(f"{path}: entry {n} tolerance_px must be numeric")
        try:
            entry = GoalPostEntry(
                width=raw["width"],
                height=raw["height"],
                left_mean=_parse_pair(raw["left_mean"], f"entry {n} left_mean"),
                right_mean=_parse_pair(raw["right_mean"], f"entry {n} right_mean"),
                left_std=_parse_pair(raw["left_std"], f"entry {n} left_std"),
                right_std=_parse_pair(raw["right_std"], f"entry {n} right_std"),
                n_samples=raw["n_samples"],
                tolerance_px=float(raw["tolerance_px"]),
            )
        except ValueError as exc:
            raise MalformedGoalposts(f"{path}: entry {n}: {exc}") from exc
        key = (entry.width, entry.height)
        if key in entries:
            raise MalformedGoalposts(f"{path}: duplicate resolution {key[0]}x{key[1]}")
        entries[key] = entry

    try:
        return GoalPostTable(
            entries=entries,
            created_at=str(data["created_at"]),
            corpus_description=str(data["corpus_description"]),
        )
    except ValueError as exc:
        raise MalformedGoalposts(f"{path}: {exc}") from exc


def rescaled_entry(entry: GoalPostEntry, width: int, height: int) -> GoalPostEntry:
    """Project a goal-post entry onto another resolution.

    Means and stds scale per axis; tolerance scales by the width ratio.
    """
    src = (entry.width, entry.height)
    dst = (width, height)
    ratio_w = width / entry.width
    return replace(
        entry,
        width=width,
        height=height,
        left_mean=scale_goalpost(entry.left_mean, src, dst),
        right_mean=scale_goalpost(entry.right_mean, src, dst),
        left_std=scale_goalpost(entry.left_std, src, dst),
        right_std=scale_goalpost(entry.right_std, src, dst),
        tolerance_px=entry.tolerance_px * ratio_w,
    )
