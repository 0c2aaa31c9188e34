"""Image acquisition and normalization.

Everything downstream works on 8-bit grayscale rasters. This module owns
decode, luminance conversion, the per-base resolution ladders, bilinear
downscaling, and the rate-limited HTTP fetcher used to build corpora.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np
import requests
from PIL import Image, UnidentifiedImageError

from .errors import DegenerateResolution, ImageDecodeError, NetworkError, StorageError

MIN_FACE_DIM = 50  # below this a rung cannot carry a usable face

_BT601 = np.array([0.299, 0.587, 0.114])


class SourceKind(str, Enum):
    LOCAL_FILE = "local_file"
    FETCHED = "fetched"
    FIXTURE = "fixture"


class LadderScheme(str, Enum):
    BASE2 = "base2"
    BASE10 = "base10"
    BOTH = "both"


@dataclass(eq=False)
class ImageSample:
    """A single grayscale image plus provenance.

    pixel_data is a 2-D uint8 array indexed [row, col]; width/height are
    derived from it, never stored separately.
    """

    sample_id: str
    source: SourceKind
    pixel_data: np.ndarray
    original_format: str | None = None

    def __post_init__(self):
        arr = self.pixel_data
        if not isinstance(arr, np.ndarray) or arr.ndim != 2:
            raise ValueError("pixel_data must be a 2-D array")
        if arr.dtype != np.uint8:
            raise ValueError("pixel_data must be uint8")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("pixel_data must be at least 1x1")

    @property
    def width(self) -> int:
        return int(self.pixel_data.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixel_data.shape[0])


def to_luminance(pixels: np.ndarray) -> np.ndarray:
    """Collapse an image array to 2-D uint8 luminance.

    Accepts HxW (returned as a copy), HxWx3, or HxWx4 (alpha dropped).
    Color is weighted 0.299 R + 0.587 G + 0.114 B and rounded half away
    from zero, so (255, 0, 0) maps to 76, not 75.
    """
    if pixels.ndim == 2:
        return pixels.astype(np.uint8, copy=True)
    if pixels.ndim == 3 and pixels.shape[2] in (3, 4):
        rgb = pixels[:, :, :3].astype(np.float64)
        y = rgb @ _BT601
        return np.floor(y + 0.5).astype(np.uint8)
    raise ValueError(f"unsupported pixel array shape {pixels.shape}")


def load_image(path: Path | str) -> ImageSample:
    """Decode a JPEG or PNG file into a grayscale ImageSample.

    Raises ImageDecodeError for missing files, unreadable bytes, or any
    format other than JPEG/PNG.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            fmt = (im.format or "").lower()
            if fmt not in ("jpeg", "png"):
                raise ImageDecodeError(f"{path}: unsupported format {fmt or 'unknown'!r}")
            im.load()
            if im.mode == "L":
                pixels = np.asarray(im, dtype=np.uint8)
            else:
                pixels = to_luminance(np.asarray(im.convert("RGB")))
    except ImageDecodeError:
        raise
    except (FileNotFoundError, UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    return ImageSample(
        sample_id=path.name,
        source=SourceKind.LOCAL_FILE,
        pixel_data=pixels,
        original_format=fmt,
    )


@dataclass(frozen=True)
class ResolutionLadder:
    """Ordered (width, height) rungs descending from a base resolution."""

    base_width: int
    base_height: int
    scheme: LadderScheme
    rungs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        widths = [w for w, _ in self.rungs]
        if widths != sorted(widths, reverse=True) or len(set(widths)) != len(widths):
            raise ValueError("rung widths must be strictly decreasing")
        aspect = self.base_height / self.base_width
        for w, h in self.rungs:
            if w < MIN_FACE_DIM or h < MIN_FACE_DIM:
                raise ValueError(f"rung {w}x{h} below the {MIN_FACE_DIM}px floor")
            if abs(h - w * aspect) > 1.0:
                raise ValueError(f"rung {w}x{h} breaks base aspect ratio")

    def __iter__(self):
        return iter(self.rungs)

    def __len__(self) -> int:
        return len(self.rungs)


def _aspect_height(width: int, base_width: int, base_height: int) -> int:
    return int(width * base_height / base_width + 0.5)


def build_ladder(base_width: int, base_height: int, scheme: LadderScheme) -> ResolutionLadder:
    """Enumerate downscale targets for one base resolution.

    base2 repeatedly halves the width; base10 walks multiples of 100
    down from the base. Heights follow the base aspect ratio. Rungs
    where either dimension would drop below 50 px are omitted, and the
    base resolution itself is always the first rung.
    """
    if base_width < MIN_FACE_DIM or base_height < MIN_FACE_DIM:
        raise DegenerateResolution(
            f"base {base_width}x{base_height} below the {MIN_FACE_DIM}px floor"
        )

    def keep(w: int, h: int) -> bool:
        return w >= MIN_FACE_DIM and h >= MIN_FACE_DIM

    widths: list[int] = []
    if scheme in (LadderScheme.BASE2, LadderScheme.BOTH):
        w = base_width
        while True:
            w = int(w / 2 + 0.5)
            if w >= base_width:  # guard against 1 -> 1 loops
                break
            if w < MIN_FACE_DIM:
                break
            widths.append(w)
    if scheme in (LadderScheme.BASE10, LadderScheme.BOTH):
        top = (base_width // 100) * 100
        if top == base_width:
            top -= 100
        widths.extend(range(top, 99, -100))

    rungs: list[tuple[int, int]] = [(base_width, base_height)]
    for w in sorted(set(widths), reverse=True):
        h = _aspect_height(w, base_width, base_height)
        if keep(w, h) and w < base_width:
            rungs.append((w, h))
    return ResolutionLadder(base_width, base_height, scheme, tuple(rungs))


def resize(sample: ImageSample, target: tuple[int, int]) -> ImageSample:
    """Bilinear-resize a sample to (width, height).

    The result's sample_id is the original id with an "@WxH" suffix so
    every ladder rung stays distinguishable in downstream CSVs. A target
    equal to the source size is returned as a pixel-identical copy.
    """
    tw, th = target
    if tw < 1 or th < 1:
        raise DegenerateResolution(f"cannot resize to {tw}x{th}")
    if (tw, th) == (sample.width, sample.height):
        pixels = sample.pixel_data.copy()
    else:
        im = Image.fromarray(sample.pixel_data, mode="L")
        pixels = np.asarray(im.resize((tw, th), Image.Resampling.BILINEAR), dtype=np.uint8)
    return ImageSample(
        sample_id=f"{sample.sample_id}@{tw}x{th}",
        source=sample.source,
        pixel_data=pixels,
        original_format=sample.original_format,
    )


def save_jpeg(sample: ImageSample, path: Path | str) -> None:
    """Write a sample as a baseline JPEG, quality 95, no metadata."""
    path = Path(path)
    try:
        Image.fromarray(sample.pixel_data, mode="L").save(path, format="JPEG", quality=95)
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from exc


@dataclass
class FetchEntry:
    """Outcome of one HTTP request in a fetch run."""

    index: int
    url: str
    started_monotonic: float
    path: Path | None = None
    sha256: str | None = None
    duplicate: bool = False
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class FetchManifest:
    out_dir: Path
    entries: list[FetchEntry] = field(default_factory=list)

    @property
    def paths(self) -> list[Path]:
        return [e.path for e in self.entries if e.path is not None]

    @property
    def ok_count(self) -> int:
        return sum(1 for e in self.entries if e.ok)

    @property
    def error_count(self) -> int:
        return sum(1 for e in self.entries if not e.ok)

    @property
    def duplicate_count(self) -> int:
        return sum(1 for e in self.entries if e.duplicate)


def fetch_samples(
    source_url: str,
    count: int,
    out_dir: Path | str,
    min_interval_ms: int = 1500,
    timeout_s: float = 30.0,
    session: requests.Session | None = None,
) -> FetchManifest:
    """Download count images from a generator endpoint.

    Consecutive requests start at least min_interval_ms apart. A failed
    request is recorded in the manifest and the run continues; only
    local write failures abort (StorageError). Repeated response bodies
    are saved anyway but flagged as duplicates via SHA-256.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"{out_dir}: {exc}") from exc

    http = session or requests.Session()
    manifest = FetchManifest(out_dir=out_dir)
    seen_hashes: set[str] = set()
    interval = min_interval_ms / 1000.0
    previous_start: float | None = None

    for index in range(1, count + 1):
        if previous_start is not None:
            wait = previous_start + interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
        started = time.monotonic()
        previous_start = started
        entry = FetchEntry(index=index, url=source_url, started_monotonic=started)
        manifest.entries.append(entry)
        try:
            response = http.get(source_url, timeout=timeout_s)
            if response.status_code != 200:
                raise NetworkError(f"HTTP {response.status_code}")
            body = response.content
        except NetworkError as exc:
            entry.error = str(exc)
            continue
        except requests.RequestException as exc:
            entry.error = f"{type(exc).__name__}: {exc}"
            continue

        digest = hashlib.sha256(body).hexdigest()
        entry.sha256 = digest
        entry.duplicate = digest in seen_hashes
        seen_hashes.add(digest)

        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")[:-3]
        target = out_dir / f"{stamp}_{index:03d}.jpg"
        try:
            target.write_bytes(body)
        except OSError as exc:
            raise StorageError(f"{target}: {exc}") from exc
        entry.path = target

    return manifest
