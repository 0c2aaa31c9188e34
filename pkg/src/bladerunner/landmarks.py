"""Face detection and 68-point landmark extraction.

Landmarks use 1-based iBUG numbering throughout; the four points cited
for each eye are exposed as LEFT_EYE_QUAD / RIGHT_EYE_QUAD. Two backends
exist: a real dlib predictor and a deterministic fixture backend that
replays planted faces from JSON, so the whole pipeline is testable
without a model file.
"""

from __future__ import annotations

import abc
import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from .errors import BackendUnavailable, LandmarkFailure, NoFaceDetected
from .ingest import ImageSample

LEFT_EYE_QUAD = (37, 38, 40, 41)
RIGHT_EYE_QUAD = (43, 44, 46, 47)

_FRAME_SLACK = 0.1  # predictors may place points slightly outside the frame
_RESIZE_SUFFIX = re.compile(r"@\d+x\d+$")


@dataclass(frozen=True)
class FaceRect:
    """Integer face bounding box, left/top inclusive orientation."""

    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self):
        if self.left >= self.right or self.top >= self.bottom:
            raise ValueError(f"degenerate face rect {self}")

    @property
    def area(self) -> int:
        return (self.right - self.left) * (self.bottom - self.top)


@dataclass(frozen=True)
class LandmarkSet:
    """68 landmark points in full-image coordinates, indexed 1..68."""

    points: tuple[tuple[float, float], ...]
    face: FaceRect
    image_width: int
    image_height: int

    def __post_init__(self):
        if len(self.points) != 68:
            raise ValueError(f"expected 68 points, got {len(self.points)}")
        x_lo, x_hi = -_FRAME_SLACK * self.image_width, (1 + _FRAME_SLACK) * self.image_width
        y_lo, y_hi = -_FRAME_SLACK * self.image_height, (1 + _FRAME_SLACK) * self.image_height
        for n, (x, y) in enumerate(self.points, start=1):
            if not (x_lo <= x <= x_hi and y_lo <= y <= y_hi):
                raise ValueError(f"point {n} at ({x}, {y}) is far outside the frame")
        left_group = self.points[36:42]
        right_group = self.points[42:48]
        if left_group == right_group:
            raise ValueError("left and right eye groups are identical")

    def __getitem__(self, index: int) -> tuple[float, float]:
        """1-based access matching iBUG numbering: set[37] is the first
        left-eye corner, not the 38th array slot."""
        if not 1 <= index <= 68:
            raise IndexError(f"landmark index {index} outside 1..68")
        return self.points[index - 1]


class PrimaryFace(NamedTuple):
    face: FaceRect
    landmarks: LandmarkSet
    face_count: int

    @property
    def multi_face(self) -> bool:
        return self.face_count > 1


class LandmarkBackend(abc.ABC):
    """A face detector plus 68-point predictor.

    thread_safe declares whether one instance may serve concurrent
    callers; wrap non-safe backends in SerializedBackend before sharing.
    """

    thread_safe: bool = False

    @abc.abstractmethod
    def faces(self, sample: ImageSample) -> list[FaceRect]:
        """All face rects in the sample, any order."""

    @abc.abstractmethod
    def landmarks(self, sample: ImageSample, face: FaceRect) -> Sequence[tuple[float, float]]:
        """Raw 68 points for one face, full-image coordinates."""


class SerializedBackend(LandmarkBackend):
    """Lock-guarded wrapper making any backend safe to share."""

    thread_safe = True

    def __init__(self, inner: LandmarkBackend):
        self._inner = inner
        self._lock = threading.Lock()

    def faces(self, sample: ImageSample) -> list[FaceRect]:
        with self._lock:
            return self._inner.faces(sample)

    def landmarks(self, sample: ImageSample, face: FaceRect) -> Sequence[tuple[float, float]]:
        with self._lock:
            return self._inner.landmarks(sample, face)


@dataclass(frozen=True)
class FixtureFace:
    """One planted face: a rect and either 68 points or None to plant
    an extraction failure."""

    rect: FaceRect
    points: tuple[tuple[float, float], ...] | None


class FixtureBackend(LandmarkBackend):
    """Replays planted faces, optionally rescaled per sample.

    Lookup order for a sample: exact sample_id key in the per-sample
    map, then the id with any trailing "@WxH" resize suffix stripped,
    then the default face list. When a reference frame is set, planted
    coordinates are scaled by (sample size / frame size) per axis, so a
    single planted face follows a sample down a resolution ladder.
    """

    thread_safe = True

    def __init__(
        self,
        faces: Sequence[FixtureFace] = (),
        frame: tuple[int, int] | None = None,
        samples: dict[str, tuple[FixtureFace, ...]] | None = None,
    ):
        self._faces = tuple(faces)
        self._frame = frame
        self._samples = dict(samples or {})

    @classmethod
    def from_json(cls, path: Path | str) -> "FixtureBackend":
        """Load planted faces from a fixture file.

        Schema: {"faces": [{"rect": [l,t,r,b], "points": [[x,y] x68]}]}
        with optional "frame": [w,h] and optional per-sample overrides
        "samples": {"<sample_id>": {"faces": [...]}}. "points": null
        plants a LandmarkFailure for that face.
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"unreadable fixture file {path}: {exc}") from exc
        frame = data.get("frame")
        if frame is not None:
            frame = (int(frame[0]), int(frame[1]))
        samples = {
            str(key): cls._parse_faces(value.get("faces", []))
            for key, value in data.get("samples", {}).items()
        }
        return cls(faces=cls._parse_faces(data.get("faces", [])), frame=frame, samples=samples)

    @staticmethod
    def _parse_faces(raw: Sequence[dict]) -> tuple[FixtureFace, ...]:
        faces = []
        for item in raw:
            rect = FaceRect(*(int(v) for v in item["rect"]))
            pts = item.get("points")
            if pts is not None:
                pts = tuple((float(x), float(y)) for x, y in pts)
            faces.append(FixtureFace(rect=rect, points=pts))
        return tuple(faces)

    def _faces_for(self, sample: ImageSample) -> tuple[FixtureFace, ...]:
        if sample.sample_id in self._samples:
            return self._samples[sample.sample_id]
        base_id = _RESIZE_SUFFIX.sub("", sample.sample_id)
        if base_id in self._samples:
            return self._samples[base_id]
        return self._faces

    def _scale(self, sample: ImageSample) -> tuple[float, float]:
        if self._frame is None:
            return (1.0, 1.0)
        fw, fh = self._frame
        return (sample.width / fw, sample.height / fh)

    def _scaled_rect(self, rect: FaceRect, sx: float, sy: float) -> FaceRect:
        if (sx, sy) == (1.0, 1.0):
            return rect
        return FaceRect(
            left=round(rect.left * sx),
            top=round(rect.top * sy),
            right=max(round(rect.right * sx), round(rect.left * sx) + 1),
            bottom=max(round(rect.bottom * sy), round(rect.top * sy) + 1),
        )

    def faces(self, sample: ImageSample) -> list[FaceRect]:
        sx, sy = self._scale(sample)
        return [self._scaled_rect(f.rect, sx, sy) for f in self._faces_for(sample)]

    def landmarks(self, sample: ImageSample, face: FaceRect) -> Sequence[tuple[float, float]]:
        sx, sy = self._scale(sample)
        for planted in self._faces_for(sample):
            if self._scaled_rect(planted.rect, sx, sy) == face:
                if planted.points is None:
                    raise LandmarkFailure(
                        f"planted landmark failure for {sample.sample_id}"
                    )
                return [(x * sx, y * sy) for x, y in planted.points]
        raise LandmarkFailure(f"no planted face matches rect {face} in {sample.sample_id}")


class DlibBackend(LandmarkBackend):
    """dlib HOG frontal detector plus the published 68-point predictor.

    dlib is an optional dependency; constructing this without it (or
    without a readable model file) raises BackendUnavailable.
    """

    thread_safe = False

    def __init__(self, model_path: Path | str):
        try:
            import dlib
        except ImportError as exc:
            raise BackendUnavailable(
                "dlib is not installed; install the 'real' extra or use a fixture backend"
            ) from exc
        model_path = Path(model_path)
        if not model_path.is_file():
            raise BackendUnavailable(f"landmark model not found at {model_path}")
        self._dlib = dlib
        self.model_path = model_path
        self._detector = dlib.get_frontal_face_detector()
        self._predictor = dlib.shape_predictor(str(model_path))

    def faces(self, sample: ImageSample) -> list[FaceRect]:
        rects = self._detector(sample.pixel_data)
        out = []
        for r in rects:
            try:
                out.append(FaceRect(r.left(), r.top(), r.right(), r.bottom()))
            except ValueError:
                continue  # zero-area detections are useless downstream
        return out

    def landmarks(self, sample: ImageSample, face: FaceRect) -> Sequence[tuple[float, float]]:
        rect = self._dlib.rectangle(face.left, face.top, face.right, face.bottom)
        shape = self._predictor(sample.pixel_data, rect)
        if shape.num_parts != 68:
            raise LandmarkFailure(f"predictor returned {shape.num_parts} points")
        return [(float(p.x), float(p.y)) for p in shape.parts()]


def detect_faces(sample: ImageSample, backend: LandmarkBackend) -> list[FaceRect]:
    """All faces, largest area first; ties break by (left, top)."""
    return sorted(backend.faces(sample), key=lambda r: (-r.area, r.left, r.top))


def extract_landmarks(
    sample: ImageSample, face: FaceRect, backend: LandmarkBackend
) -> LandmarkSet:
    """Run the predictor on one face and validate the result.

    Any malformed backend output (wrong count, wild coordinates,
    duplicated eye groups) surfaces as LandmarkFailure, never as a
    malformed LandmarkSet.
    """
    raw = backend.landmarks(sample, face)
    try:
        return LandmarkSet(
            points=tuple((float(x), float(y)) for x, y in raw),
            face=face,
            image_width=sample.width,
            image_height=sample.height,
        )
    except (ValueError, TypeError) as exc:
        raise LandmarkFailure(f"{sample.sample_id}: {exc}") from exc


def primary_face(sample: ImageSample, backend: LandmarkBackend) -> PrimaryFace:
    """Detect faces, pick the largest, extract its landmarks.

    Raises NoFaceDetected when nothing is found. LandmarkFailure from
    extraction propagates with face_count attached so callers can record
    how many faces were visible.
    """
    rects = detect_faces(sample, backend)
    if not rects:
        raise NoFaceDetected(f"no face in {sample.sample_id}")
    try:
        landmarks = extract_landmarks(sample, rects[0], backend)
    except LandmarkFailure as exc:
        exc.face_count = len(rects)
        raise
    return PrimaryFace(face=rects[0], landmarks=landmarks, face_count=len(rects))
