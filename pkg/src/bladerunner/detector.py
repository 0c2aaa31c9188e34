"""Classify live images against goal-post tables.

The core rule is True-True containment: inflate each measured eye box
by the goal-post tolerance and test whether it contains the stored mean
eye coordinate. Both sides hitting marks the image synthetic_likely.
Sum, midline, and interocular checks are recorded alongside but gate
the verdict only in strict mode.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw

from ._util import map_ordered
from .analyzer import (
    GoalPostEntry,
    GoalPostTable,
    IOARecord,
    failure_record,
    rescaled_entry,
)
from .errors import (
    BackendUnavailable,
    ImageDecodeError,
    LandmarkFailure,
    NoCompatibleGoalpost,
    NoFaceDetected,
    StorageError,
)
from .geometry import (
    REFERENCE_HEIGHT,
    REFERENCE_WIDTH,
    EyeGeometry,
    eye_geometry,
    interocular,
    midline_rule,
    sum_rule,
)
from .ingest import ImageSample, load_image
from .landmarks import LandmarkBackend, SerializedBackend, primary_face

ASPECT_SLACK = 0.01  # relative aspect-ratio mismatch tolerated by goal-post reuse


class Classification:
    SYNTHETIC_LIKELY = "synthetic_likely"
    INCONCLUSIVE = "inconclusive"
    NO_DETECTION = "no_detection"

    ALL = (SYNTHETIC_LIKELY, INCONCLUSIVE, NO_DETECTION)


@dataclass(frozen=True)
class DetectorConfig:
    """Tunables for one detection run.

    sum_tolerance_px and midline_margin_px are defined at the 1024
    reference resolution and scale with the sample's width/height.
    """

    sum_tolerance_px: float = 4.0
    midline_margin_px: float = 64.0
    strict_mode: bool = False
    annotate_dir: Path | None = None

    def __post_init__(self):
        if self.sum_tolerance_px < 0 or self.midline_margin_px < 0:
            raise ValueError("tolerances must be >= 0")


@dataclass(frozen=True)
class Verdict:
    sample_id: str
    width: int
    height: int
    goalpost_resolution_used: tuple[int, int] | None
    goalposts_scaled: bool
    left_hit: bool
    right_hit: bool
    sum_rule_pass: bool
    midline_rule_pass: bool
    interocular_match: bool | None
    classification: str
    reasons: tuple[str, ...]
    record: IOARecord

    def __post_init__(self):
        if not self.reasons:
            raise ValueError(f"{self.sample_id}: verdict must carry reasons")
        if self.classification not in Classification.ALL:
            raise ValueError(f"{self.sample_id}: bad classification {self.classification!r}")
        if (self.classification == Classification.NO_DETECTION) != (
            not self.record.landmark_ok
        ):
            raise ValueError(f"{self.sample_id}: no_detection must mirror landmark_ok")
        if self.classification == Classification.SYNTHETIC_LIKELY and not (
            self.left_hit and self.right_hit
        ):
            raise ValueError(f"{self.sample_id}: synthetic_likely without True-True hits")


def select_goalposts(
    table: GoalPostTable, width: int, height: int
) -> tuple[GoalPostEntry, bool]:
    """Pick the goal-post entry for a query resolution.

    Exact resolution match wins unscaled. Otherwise the entry with a
    compatible aspect ratio (within 1%) and the nearest width is
    projected onto the query resolution.
    """
    exact = table.get(width, height)
    if exact is not None:
        return exact, False

    query_aspect = width / height
    candidates = [
        e
        for e in table.entries.values()
        if abs(e.width / e.height - query_aspect) <= ASPECT_SLACK * query_aspect
    ]
    if not candidates:
        raise NoCompatibleGoalpost(f"no goal-posts compatible with {width}x{height}")
    best = min(candidates, key=lambda e: (abs(e.width - width), e.width))
    return rescaled_entry(best, width, height), True


def _no_detection_verdict(record: IOARecord) -> Verdict:
    return Verdict(
        sample_id=record.sample_id,
        width=record.width,
        height=record.height,
        goalpost_resolution_used=None,
        goalposts_scaled=False,
        left_hit=False,
        right_hit=False,
        sum_rule_pass=False,
        midline_rule_pass=False,
        interocular_match=None,
        classification=Classification.NO_DETECTION,
        reasons=(record.error,),
        record=record,
    )


def _detect_full(
    sample: ImageSample,
    table: GoalPostTable,
    backend: LandmarkBackend,
    config: DetectorConfig,
) -> tuple[Verdict, EyeGeometry | None, GoalPostEntry | None]:
    width, height = sample.width, sample.height
    try:
        face = primary_face(sample, backend)
    except (NoFaceDetected, LandmarkFailure, BackendUnavailable) as exc:
        record = failure_record(
            sample.sample_id, width, height, type(exc).__name__,
            face_count=getattr(exc, "face_count", 0),
            source=sample.source.value,
        )
        return _no_detection_verdict(record), None, None

    geo = eye_geometry(face.landmarks)
    record = IOARecord(
        sample_id=sample.sample_id,
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
    )

    sum_ok = sum_rule(
        geo.left_center,
        geo.right_center,
        width,
        config.sum_tolerance_px * width / REFERENCE_WIDTH,
    )
    mid_ok = midline_rule(
        geo.left_center,
        geo.right_center,
        height,
        config.midline_margin_px * height / REFERENCE_HEIGHT,
    )

    try:
        entry, scaled = select_goalposts(table, width, height)
    except NoCompatibleGoalpost:
        reasons = [
            "NoCompatibleGoalpost",
            "sum_rule_pass" if sum_ok else "sum_rule_fail",
            "midline_rule_pass" if mid_ok else "midline_rule_fail",
        ]
        verdict = Verdict(
            sample_id=sample.sample_id,
            width=width,
            height=height,
            goalpost_resolution_used=None,
            goalposts_scaled=False,
            left_hit=False,
            right_hit=False,
            sum_rule_pass=sum_ok,
            midline_rule_pass=mid_ok,
            interocular_match=None,
            classification=Classification.INCONCLUSIVE,
            reasons=tuple(reasons),
            record=record,
        )
        return verdict, geo, None

    tol = entry.tolerance_px
    left_hit = geo.left_box.inflate(tol).contains(entry.left_mean)
    right_hit = geo.right_box.inflate(tol).contains(entry.right_mean)
    expected_io = interocular(entry.left_mean, entry.right_mean)
    io_match = abs(geo.interocular_distance - expected_io) <= 2.0 * tol

    synthetic = left_hit and right_hit
    strict_gated = False
    if synthetic and config.strict_mode and not (sum_ok and mid_ok):
        synthetic = False
        strict_gated = True

    reasons = [
        "left_goalpost_hit" if left_hit else "left_goalpost_miss",
        "right_goalpost_hit" if right_hit else "right_goalpost_miss",
        "sum_rule_pass" if sum_ok else "sum_rule_fail",
        "midline_rule_pass" if mid_ok else "midline_rule_fail",
        "interocular_match" if io_match else "interocular_mismatch",
    ]
    if scaled:
        reasons.append("goalposts_scaled")
    if record.multi_face:
        reasons.append("multi_face")
    if strict_gated:
        reasons.append("strict_mode_gated")

    verdict = Verdict(
        sample_id=sample.sample_id,
        width=width,
        height=height,
        goalpost_resolution_used=(entry.width, entry.height),
        goalposts_scaled=scaled,
        left_hit=left_hit,
        right_hit=right_hit,
        sum_rule_pass=sum_ok,
        midline_rule_pass=mid_ok,
        interocular_match=io_match,
        classification=(
            Classification.SYNTHETIC_LIKELY if synthetic else Classification.INCONCLUSIVE
        ),
        reasons=tuple(reasons),
        record=record,
    )
    return verdict, geo, entry


def detect(
    sample: ImageSample,
    table: GoalPostTable,
    backend: LandmarkBackend,
    config: DetectorConfig | None = None,
) -> Verdict:
    """Classify one in-memory sample. Never raises on face or landmark
    problems; those come back as no_detection verdicts."""
    verdict, _, _ = _detect_full(sample, table, backend, config or DetectorConfig())
    return verdict


def detect_batch(
    paths: list[Path | str],
    table: GoalPostTable,
    backend: LandmarkBackend,
    config: DetectorConfig | None = None,
    jobs: int = 1,
) -> tuple[list[Verdict], dict[str, int]]:
    """Classify a batch of files.

    Verdicts come back in input order. Files that fail to decode yield
    no_detection verdicts with the error named. When config.annotate_dir
    is set, every verdict with usable landmarks and a matched goal-post
    entry gets an annotated PNG.
    """
    config = config or DetectorConfig()
    if jobs > 1 and not backend.thread_safe:
        backend = SerializedBackend(backend)

    def run(path: Path | str) -> Verdict:
        path = Path(path)
        try:
            sample = load_image(path)
        except ImageDecodeError:
            record = failure_record(path.name, 0, 0, "ImageDecodeError")
            return _no_detection_verdict(record)
        verdict, geo, entry = _detect_full(sample, table, backend, config)
        if config.annotate_dir is not None and geo is not None and entry is not None:
            out = Path(config.annotate_dir) / f"{path.stem}.annotated.png"
            annotate(sample, verdict, geo, entry, out)
        return verdict

    verdicts = map_ordered(run, paths, jobs=jobs)
    counts = Counter(v.classification for v in verdicts)
    summary = {name: counts.get(name, 0) for name in Classification.ALL}
    return verdicts, summary


def annotate(
    sample: ImageSample,
    verdict: Verdict,
    geometry: EyeGeometry,
    entry: GoalPostEntry,
    out_path: Path | str,
) -> None:
    """Write a PNG copy with eye boxes, centers, goal-posts, and the
    classification drawn on. Presentation only; nothing reads it back."""
    if not verdict.record.landmark_ok:
        raise ValueError("cannot annotate a verdict without landmarks")
    image = Image.fromarray(sample.pixel_data, mode="L").convert("RGB")
    draw = ImageDraw.Draw(image)

    for box in (geometry.left_box, geometry.right_box):
        draw.rectangle((box.min_x, box.min_y, box.max_x, box.max_y), outline=(0, 200, 0))
    for cx, cy in (geometry.left_center, geometry.right_center):
        draw.line((cx - 3, cy, cx + 3, cy), fill=(60, 120, 255))
        draw.line((cx, cy - 3, cx, cy + 3), fill=(60, 120, 255))
    radius = max(entry.tolerance_px, 1.0)
    for gx, gy in (entry.left_mean, entry.right_mean):
        draw.ellipse((gx - radius, gy - radius, gx + radius, gy + radius), outline=(230, 40, 40))
        draw.point((gx, gy), fill=(230, 40, 40))
    draw.text((4, 4), verdict.classification, fill=(230, 40, 40))

    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        image.save(out_path, format="PNG")
    except OSError as exc:
        raise StorageError(f"{out_path}: {exc}") from exc


VERDICT_COLUMNS = (
    "sample_id",
    "width",
    "height",
    "gp_width",
    "gp_height",
    "gp_scaled",
    "left_hit",
    "right_hit",
    "sum_rule",
    "midline_rule",
    "interocular_match",
    "classification",
    "reasons",
)


def write_verdicts(verdicts: list[Verdict], path: Path | str) -> None:
    """Write verdicts as UTF-8 comma-separated LF lines, one header row."""

    def flag(value: bool) -> str:
        return "true" if value else "false"

    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(VERDICT_COLUMNS)
            for v in verdicts:
                gp_w, gp_h = ("", "") if v.goalpost_resolution_used is None else (
                    str(v.goalpost_resolution_used[0]),
                    str(v.goalpost_resolution_used[1]),
                )
                writer.writerow(
                    [
                        v.sample_id,
                        str(v.width),
                        str(v.height),
                        gp_w,
                        gp_h,
                        flag(v.goalposts_scaled),
                        flag(v.left_hit),
                        flag(v.right_hit),
                        flag(v.sum_rule_pass),
                        flag(v.midline_rule_pass),
                        "" if v.interocular_match is None else flag(v.interocular_match),
                        v.classification,
                        ";".join(v.reasons),
                    ]
                )
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from exc
