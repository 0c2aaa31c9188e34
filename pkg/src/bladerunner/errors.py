"""Exception types shared across the pipeline."""

from __future__ import annotations


class BladeRunnerError(Exception):
    """Base class for every error raised by this package."""


class ImageDecodeError(BladeRunnerError):
    """File is missing, corrupt, or not a JPEG/PNG."""


class DegenerateResolution(BladeRunnerError):
    """A requested resolution is too small to carry a face."""


class NetworkError(BladeRunnerError):
    """A single HTTP fetch failed; the batch may continue."""


class StorageError(BladeRunnerError):
    """Reading or writing a local artifact failed."""


class BackendUnavailable(BladeRunnerError):
    """The selected landmark backend cannot run in this environment."""


class LandmarkFailure(BladeRunnerError):
    """A face was found but usable landmarks could not be extracted."""

    def __init__(self, message: str, face_count: int = 0):
        super().__init__(message)
        self.face_count = face_count


class NoFaceDetected(BladeRunnerError):
    """The detector found no face in the image."""

    face_count = 0


class EmptyCorpus(BladeRunnerError):
    """Aggregation saw no usable measurement records."""


class MalformedCsv(BladeRunnerError):
    """A measurement CSV violates the documented schema."""


class MalformedGoalposts(BladeRunnerError):
    """A goal-post JSON file violates the documented schema."""


class NoCompatibleGoalpost(BladeRunnerError):
    """No stored goal-post entry matches the query resolution."""
