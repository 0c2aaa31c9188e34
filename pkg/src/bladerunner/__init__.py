"""Goal-post based synthetic-face screening.

The package measures where GAN face generators place eyes (analyzer),
freezes those positions into per-resolution goal-posts, and flags live
images whose eye geometry lines up with them (detector).
"""

from .analyzer import (
    GoalPostEntry,
    GoalPostTable,
    IOARecord,
    aggregate,
    analyze_sample,
    read_csv,
    read_goalposts,
    write_csv,
    write_goalposts,
)
from .detector import (
    Classification,
    DetectorConfig,
    Verdict,
    annotate,
    detect,
    detect_batch,
    select_goalposts,
    write_verdicts,
)
from .errors import (
    BackendUnavailable,
    BladeRunnerError,
    DegenerateResolution,
    EmptyCorpus,
    ImageDecodeError,
    LandmarkFailure,
    MalformedCsv,
    MalformedGoalposts,
    NetworkError,
    NoCompatibleGoalpost,
    NoFaceDetected,
    StorageError,
)
from .geometry import (
    Box,
    EyeGeometry,
    EyeSide,
    LayoutModel,
    contains,
    eye_box,
    eye_center,
    eye_geometry,
    interocular,
    layout_model,
    midline_rule,
    scale_goalpost,
    sum_rule,
)
from .ingest import (
    ImageSample,
    LadderScheme,
    ResolutionLadder,
    SourceKind,
    build_ladder,
    fetch_samples,
    load_image,
    resize,
    save_jpeg,
    to_luminance,
)
from .landmarks import (
    LEFT_EYE_QUAD,
    RIGHT_EYE_QUAD,
    DlibBackend,
    FaceRect,
    FixtureBackend,
    FixtureFace,
    LandmarkBackend,
    LandmarkSet,
    PrimaryFace,
    SerializedBackend,
    detect_faces,
    extract_landmarks,
    primary_face,
)

__version__ = "0.1.0"
