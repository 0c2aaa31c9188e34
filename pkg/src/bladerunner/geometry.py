"""Eye-landmark geometry: centroids, boxes, layout predictions, rules.

All functions here are pure. Coordinates are floats in pixel units with
the origin at the top-left corner, x growing right and y growing down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateResolution
from .landmarks import LEFT_EYE_QUAD, RIGHT_EYE_QUAD, LandmarkSet

Point = tuple[float, float]

# Eye row sits just above the vertical midpoint: 480/1024 on the
# reference square, i.e. 15/32 of the height.
DEFAULT_EYE_Y_FRACTION = 0.46875
REFERENCE_WIDTH = 1024
REFERENCE_HEIGHT = 1024
DEFAULT_SUM_TOLERANCE_PX = 4.0  # at reference width
DEFAULT_MIDLINE_MARGIN_PX = 64.0  # at reference height, = height / 16


class EyeSide(Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def quad(self) -> tuple[int, int, int, int]:
        return LEFT_EYE_QUAD if self is EyeSide.LEFT else RIGHT_EYE_QUAD


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; contains() is inclusive on all edges."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError("box edges out of order")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def contains(self, point: Point) -> bool:
        x, y = point
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def inflate(self, amount: float) -> "Box":
        if amount < 0:
            raise ValueError("inflate amount must be >= 0")
        return Box(
            self.min_x - amount,
            self.min_y - amount,
            self.max_x + amount,
            self.max_y + amount,
        )


def contains(box: Box, point: Point) -> bool:
    return box.contains(point)


def eye_center(landmarks: LandmarkSet, side: EyeSide) -> Point:
    """Centroid of the four-landmark eye quad: sum the coordinates, divide by 4."""
    p1, p2, p3, p4 = (landmarks[i] for i in side.quad)
    return (
        (p1[0] + p2[0] + p3[0] + p4[0]) / 4.0,
        (p1[1] + p2[1] + p3[1] + p4[1]) / 4.0,
    )


def eye_box(landmarks: LandmarkSet, side: EyeSide) -> Box:
    """Tight axis-aligned bounding box of the four-landmark eye quad.

    Degenerate boxes are allowed; they contain exactly their one point.
    """
    pts = [landmarks[i] for i in side.quad]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return Box(min(xs), min(ys), max(xs), max(ys))


def interocular(left_center: Point, right_center: Point) -> float:
    """Euclidean distance between two eye centers."""
    return math.hypot(right_center[0] - left_center[0], right_center[1] - left_center[1])


@dataclass(frozen=True)
class EyeGeometry:
    """Per-face eye measurements derived from one LandmarkSet.

    left_center.x < right_center.x for ordinary upright faces; that is
    not enforced here because tilted or mislabeled faces must still be
    measurable.
    """

    left_center: Point
    right_center: Point
    left_box: Box
    right_box: Box
    interocular_distance: float


def eye_geometry(landmarks: LandmarkSet) -> EyeGeometry:
    left = eye_center(landmarks, EyeSide.LEFT)
    right = eye_center(landmarks, EyeSide.RIGHT)
    return EyeGeometry(
        left_center=left,
        right_center=right,
        left_box=eye_box(landmarks, EyeSide.LEFT),
        right_box=eye_box(landmarks, EyeSide.RIGHT),
        interocular_distance=interocular(left, right),
    )


@dataclass(frozen=True)
class LayoutModel:
    """Predicted eye positions for one resolution.

    The face is modeled as centered, with eye columns one third of the
    width in from each edge. predicted_left.x + predicted_right.x gives
    back width exactly: the right column is width - width/3, and that
    subtraction is exact in IEEE doubles at any integer width.
    """

    width: int
    height: int
    third_w: float
    predicted_left: Point
    predicted_right: Point
    sum_tolerance: float
    midline_margin: float


def default_sum_tolerance(width: int) -> float:
    return DEFAULT_SUM_TOLERANCE_PX * width / REFERENCE_WIDTH


def default_midline_margin(height: int) -> float:
    return DEFAULT_MIDLINE_MARGIN_PX * height / REFERENCE_HEIGHT


def layout_model(
    width: int,
    height: int,
    y_fraction: float = DEFAULT_EYE_Y_FRACTION,
    sum_tolerance: float | None = None,
    midline_margin: float | None = None,
) -> LayoutModel:
    """Build the centered-face layout prediction for a resolution."""
    if width < 1 or height < 1:
        raise DegenerateResolution(f"layout undefined for {width}x{height}")
    if not 0.0 < y_fraction < 0.5:
        raise ValueError("y_fraction must lie in (0, 0.5): eyes sit above the midline")
    third = width / 3.0
    eye_y = y_fraction * height
    return LayoutModel(
        width=width,
        height=height,
        third_w=third,
        predicted_left=(third, eye_y),
        predicted_right=(width - third, eye_y),
        sum_tolerance=default_sum_tolerance(width) if sum_tolerance is None else sum_tolerance,
        midline_margin=default_midline_margin(height) if midline_margin is None else midline_margin,
    )


def sum_rule(left_center: Point, right_center: Point, width: int, tolerance: float) -> bool:
    """Centered faces put the eye columns symmetric about width/2, so
    left x + right x should give back the width."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    return abs((left_center[0] + right_center[0]) - width) <= tolerance


def midline_rule(left_center: Point, right_center: Point, height: int, margin: float) -> bool:
    """Both eye rows must sit just above the horizontal midline: at or
    past the midline is out, more than margin above it is out."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    half = height / 2.0
    floor = half - margin
    return all(floor <= y < half for y in (left_center[1], right_center[1]))


def scale_goalpost(point: Point, from_res: tuple[int, int], to_res: tuple[int, int]) -> Point:
    """Map a stored goal-post coordinate onto another resolution.

    Scaling is per-axis and ratio-first, so halving both dimensions
    halves the coordinates exactly.
    """
    fw, fh = from_res
    tw, th = to_res
    if min(fw, fh, tw, th) < 1:
        raise DegenerateResolution(f"cannot scale {from_res} -> {to_res}")
    return (point[0] * (tw / fw), point[1] * (th / fh))
