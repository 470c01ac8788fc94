"""Sensor snapshots, image histograms, and scenario file ingestion.

A snapshot is one validated tick of sensor truth. Fields are either absent
(None: the stream did not arrive this tick) or fully valid; the evaluator
relies on that and never re-checks. Scenario files are UTF-8 JSON and may
carry images inline, as binary PGM references, or as precomputed histograms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .diagnostics import NO_SPAN, ScenarioError, SnapshotError, error

LASER_MASK_BITS = 32
_MASK_LIMIT = 1 << LASER_MASK_BITS


@dataclass(frozen=True)
class Detection:
    class_label: str
    distance: float  # meters, >= 0


@dataclass(frozen=True)
class Image:
    """Row-major 8-bit grayscale image."""

    width: int
    height: int
    pixels: bytes  # len == width * height


@dataclass(frozen=True)
class Histogram:
    """Intensity histogram with both raw counts and a normalized view."""

    bin_counts: tuple[int, ...]
    total_pixels: int
    normalized_view: tuple[float, ...]

    @classmethod
    def from_counts(cls, counts: tuple[int, ...] | list[int]) -> "Histogram":
        total = sum(counts)
        if total <= 0:
            raise SnapshotError(
                [error("E-SNAPSHOT", "histogram total pixel count must be positive", NO_SPAN)]
            )
        return cls(tuple(counts), total, tuple(c / total for c in counts))


@dataclass(frozen=True)
class SensorSnapshot:
    """One tick of sensor truth; None marks an absent stream."""

    timestamp: float
    camera_detections: tuple[Detection, ...] | None = None
    camera_image: Image | Histogram | None = None
    lidar_objects: tuple[Detection, ...] | None = None
    laser_alive_mask: int | None = None


@dataclass(frozen=True)
class ExpectedTick:
    stop: bool
    speed: float
    sounds: tuple[str, ...]


@dataclass(frozen=True)
class Scenario:
    name: str
    ticks: tuple[SensorSnapshot, ...]
    expected: tuple[ExpectedTick, ...] | None = None


# --- Histogram computation ----------------------------------------------------


def compute_histogram(image: Image, bins: int) -> Histogram:
    """Equal-width histogram over [0, 256): intensity v lands in bin
    v * bins // 256. Exact integer arithmetic, so bin 255 never spills.

    Raises SnapshotError (E-BINS) for bins outside [1, 256].
    """
    if not 1 <= bins <= 256:
        raise SnapshotError(
            [error("E-BINS", f"bins must be in [1, 256], got {bins}", NO_SPAN)]
        )
    total = image.width * image.height
    if len(image.pixels) != total:
        raise _fail(
            "image.pixels",
            f"length {len(image.pixels)} does not match {image.width}x{image.height}",
        )
    values = np.frombuffer(image.pixels, dtype=np.uint8).astype(np.int64)
    counts = np.bincount(values * bins // 256, minlength=bins)
    bin_counts = tuple(int(c) for c in counts)
    return Histogram(bin_counts, total, tuple(c / total for c in bin_counts))


# --- Snapshot validation ------------------------------------------------------


def _fail(path: str, message: str) -> SnapshotError:
    return SnapshotError([error("E-SNAPSHOT", f"{path}: {message}", NO_SPAN)])


def _require_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(path, f"expected a number, got {type(value).__name__}")
    out = float(value)
    if math.isnan(out) or math.isinf(out):
        raise _fail(path, "must be finite")
    return out


def _validate_detections(raw: Any, path: str) -> tuple[Detection, ...]:
    if not isinstance(raw, list):
        raise _fail(path, "expected a list of detections")
    out = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise _fail(f"{path}[{i}]", "expected an object")
        label = entry.get("class")
        if not isinstance(label, str) or not label:
            raise _fail(f"{path}[{i}].class", "expected a non-empty string")
        distance = _require_number(entry.get("distance_m"), f"{path}[{i}].distance")
        if distance < 0:
            raise _fail(f"{path}[{i}].distance", f"must be nonnegative, got {distance}")
        unknown = set(entry) - {"class", "distance_m"}
        if unknown:
            raise _fail(f"{path}[{i}]", f"unknown keys: {sorted(unknown)}")
        out.append(Detection(label, distance))
    return tuple(out)


def _validate_image(raw: Any, path: str, base_dir: Path | None) -> Image | Histogram:
    if not isinstance(raw, dict):
        raise _fail(path, "expected an image object")
    if "pgm" in raw:
        if base_dir is None:
            raise _fail(f"{path}.pgm", "PGM references need a scenario file to resolve against")
        return read_pgm(base_dir / str(raw["pgm"]))
    if "histogram" in raw:
        hist = raw["histogram"]
        if not isinstance(hist, dict) or not isinstance(hist.get("bins"), list):
            raise _fail(f"{path}.histogram", "expected an object with a 'bins' list")
        counts = []
        for i, c in enumerate(hist["bins"]):
            if isinstance(c, bool) or not isinstance(c, int) or c < 0:
                raise _fail(f"{path}.histogram.bins[{i}]", "expected a nonnegative integer")
            counts.append(c)
        if not counts:
            raise _fail(f"{path}.histogram.bins", "must not be empty")
        if sum(counts) <= 0:
            raise _fail(f"{path}.histogram.bins", "total pixel count must be positive")
        return Histogram.from_counts(counts)
    width = raw.get("width")
    height = raw.get("height")
    pixels = raw.get("pixels")
    for name, v in (("width", width), ("height", height)):
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise _fail(f"{path}.{name}", "expected a positive integer")
    if not isinstance(pixels, list):
        raise _fail(f"{path}.pixels", "expected a list of intensities")
    if len(pixels) != width * height:
        raise _fail(
            f"{path}.pixels",
            f"length {len(pixels)} does not match {width}x{height}",
        )
    buf = bytearray(len(pixels))
    for i, v in enumerate(pixels):
        if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 255:
            raise _fail(f"{path}.pixels[{i}]", "intensity must be an integer in [0, 255]")
        buf[i] = v
    return Image(width, height, bytes(buf))


def _validate_mask(raw: Any, path: str) -> int:
    if isinstance(raw, str):
        text = raw[2:] if raw.lower().startswith("0x") else raw
        try:
            value = int(text, 16)
        except ValueError:
            raise _fail(path, f"invalid hex mask {raw!r}") from None
    elif isinstance(raw, int) and not isinstance(raw, bool):
        value = raw
    else:
        raise _fail(path, "expected a hex string")
    if not 0 <= value < _MASK_LIMIT:
        raise _fail(path, f"mask must fit in {LASER_MASK_BITS} bits")
    return value


def validate_snapshot(raw: Any, path: str = "snapshot") -> SensorSnapshot:
    """Validate one raw tick (parsed JSON) into a SensorSnapshot.

    Enforces every snapshot invariant (nonnegative finite distances,
    matching image dimensions, 32-bit masks) so evaluation never has to.
    Raises SnapshotError (E-SNAPSHOT) with the offending field path.
    """
    return _validate_tick(raw, path, base_dir=None)


def _validate_tick(raw: Any, path: str, base_dir: Path | None) -> SensorSnapshot:
    if not isinstance(raw, dict):
        raise _fail(path, "expected an object")
    unknown = set(raw) - {"t", "camera", "lidar", "laser"}
    if unknown:
        raise _fail(path, f"unknown keys: {sorted(unknown)}")
    timestamp = _require_number(raw.get("t"), f"{path}.t")

    detections = None
    image = None
    if "camera" in raw:
        camera = raw["camera"]
        if not isinstance(camera, dict):
            raise _fail(f"{path}.camera", "expected an object")
        bad = set(camera) - {"detections", "image"}
        if bad:
            raise _fail(f"{path}.camera", f"unknown keys: {sorted(bad)}")
        if "detections" in camera:
            detections = _validate_detections(
                camera["detections"], f"{path}.camera_detections"
            )
        if "image" in camera:
            image = _validate_image(camera["image"], f"{path}.camera_image", base_dir)

    lidar = None
    if "lidar" in raw:
        block = raw["lidar"]
        if not isinstance(block, dict) or set(block) - {"objects"}:
            raise _fail(f"{path}.lidar", "expected an object with an 'objects' list")
        if "objects" in block:
            lidar = _validate_detections(block["objects"], f"{path}.lidar_objects")

    mask = None
    if "laser" in raw:
        block = raw["laser"]
        if not isinstance(block, dict) or set(block) - {"alive_mask"}:
            raise _fail(f"{path}.laser", "expected an object with an 'alive_mask'")
        if "alive_mask" in block:
            mask = _validate_mask(block["alive_mask"], f"{path}.laser_liveness")

    return SensorSnapshot(timestamp, detections, image, lidar, mask)


# --- PGM ----------------------------------------------------------------------


def read_pgm(path: Path | str) -> Image:
    """Read a binary PGM (P5, maxval 255) bit-exactly.

    Raises ScenarioError: E-IO when unreadable, E-FORMAT on a bad header.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(
            [error("E-IO", f"cannot read PGM file '{path}': {exc.strerror}", NO_SPAN)]
        ) from exc

    def bad(message: str) -> ScenarioError:
        return ScenarioError([error("E-FORMAT", f"{path}: {message}", NO_SPAN)])

    fields, offset = _pgm_header_fields(data)
    if fields is None or fields[0] != b"P5":
        raise bad("not a binary PGM (expected P5 magic)")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise bad("malformed header") from None
    if width <= 0 or height <= 0:
        raise bad(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise bad(f"unsupported maxval {maxval} (only 255)")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise bad(f"raster has {len(raster)} bytes, expected {width * height}")
    return Image(width, height, raster)


def _pgm_header_fields(data: bytes) -> tuple[list[bytes] | None, int]:
    """Magic, width, height, maxval; returns offset just past the header."""
    fields: list[bytes] = []
    i = 0
    while len(fields) < 4 and i < len(data):
        if data[i : i + 1].isspace():
            i += 1
        elif data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        else:
            start = i
            while i < len(data) and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
                i += 1
            fields.append(data[start:i])
    if len(fields) < 4 or i >= len(data) or not data[i : i + 1].isspace():
        return None, i
    return fields, i + 1  # single whitespace byte separates header and raster


# --- Scenario files -----------------------------------------------------------


def load_scenario(path: Path | str) -> Scenario:
    """Load a scenario JSON file, validating every tick.

    Raises ScenarioError (E-IO / E-FORMAT) or SnapshotError (E-SNAPSHOT,
    with the tick and field path) on bad input.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        detail = getattr(exc, "strerror", None) or str(exc)
        raise ScenarioError(
            [error("E-IO", f"cannot read scenario '{path}': {detail}", NO_SPAN)]
        ) from exc

    def bad(message: str) -> ScenarioError:
        return ScenarioError([error("E-FORMAT", f"{path}: {message}", NO_SPAN)])

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise bad(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise bad("top level must be an object")
    unknown = set(doc) - {"name", "ticks", "expected"}
    if unknown:
        raise bad(f"unknown keys: {sorted(unknown)}")
    name = doc.get("name", path.stem)
    if not isinstance(name, str):
        raise bad("'name' must be a string")
    raw_ticks = doc.get("ticks")
    if not isinstance(raw_ticks, list) or not raw_ticks:
        raise bad("scenario requires at least one tick")

    ticks = tuple(
        _validate_tick(raw, f"ticks[{i}]", path.parent) for i, raw in enumerate(raw_ticks)
    )
    for prev, cur in zip(ticks, ticks[1:]):
        if cur.timestamp <= prev.timestamp:
            raise bad(
                f"timestamps must be strictly increasing "
                f"(t={cur.timestamp} after t={prev.timestamp})"
            )

    expected = None
    if "expected" in doc:
        raw_expected = doc["expected"]
        if not isinstance(raw_expected, list):
            raise bad("'expected' must be a list")
        if len(raw_expected) != len(ticks):
            raise bad(
                f"'expected' has {len(raw_expected)} entries for {len(ticks)} ticks"
            )
        expected = tuple(
            _validate_expected(raw, f"expected[{i}]", bad)
            for i, raw in enumerate(raw_expected)
        )

    return Scenario(name, ticks, expected)


def _validate_expected(raw: Any, path: str, bad) -> ExpectedTick:
    if not isinstance(raw, dict):
        raise bad(f"{path}: expected an object")
    if set(raw) - {"stop", "speed", "sounds"}:
        raise bad(f"{path}: unknown keys")
    stop = raw.get("stop")
    if not isinstance(stop, bool):
        raise bad(f"{path}.stop: expected a boolean")
    speed = raw.get("speed")
    if isinstance(speed, bool) or not isinstance(speed, (int, float)):
        raise bad(f"{path}.speed: expected a number")
    sounds = raw.get("sounds", [])
    if not isinstance(sounds, list) or not all(isinstance(s, str) for s in sounds):
        raise bad(f"{path}.sounds: expected a list of strings")
    return ExpectedTick(stop, float(speed), tuple(sounds))


# --- Scenario serialization -----------------------------------------------------


def dump_scenario(scenario: Scenario) -> dict:
    """Scenario back to its JSON object form (images inline)."""
    doc: dict[str, Any] = {"name": scenario.name, "ticks": []}
    for tick in scenario.ticks:
        doc["ticks"].append(_dump_tick(tick))
    if scenario.expected is not None:
        doc["expected"] = [
            {"stop": e.stop, "speed": e.speed, "sounds": list(e.sounds)}
            for e in scenario.expected
        ]
    return doc


def _dump_tick(tick: SensorSnapshot) -> dict:
    out: dict[str, Any] = {"t": tick.timestamp}
    camera: dict[str, Any] = {}
    if tick.camera_detections is not None:
        camera["detections"] = [
            {"class": d.class_label, "distance_m": d.distance}
            for d in tick.camera_detections
        ]
    if tick.camera_image is not None:
        if isinstance(tick.camera_image, Image):
            img = tick.camera_image
            camera["image"] = {
                "width": img.width,
                "height": img.height,
                "pixels": list(img.pixels),
            }
        else:
            camera["image"] = {"histogram": {"bins": list(tick.camera_image.bin_counts)}}
    if camera:
        out["camera"] = camera
    if tick.lidar_objects is not None:
        out["lidar"] = {
            "objects": [
                {"class": d.class_label, "distance_m": d.distance}
                for d in tick.lidar_objects
            ]
        }
    if tick.laser_alive_mask is not None:
        out["laser"] = {"alive_mask": f"0x{tick.laser_alive_mask:08x}"}
    return out


def iter_snapshot_streams(snapshot: SensorSnapshot) -> Iterator[tuple[str, Any]]:
    """(canonical stream name, value) pairs for the streams present."""
    if snapshot.camera_detections is not None:
        yield "camera_detections", snapshot.camera_detections
    if snapshot.camera_image is not None:
        yield "camera_image", snapshot.camera_image
    if snapshot.lidar_objects is not None:
        yield "lidar_objects", snapshot.lidar_objects
    if snapshot.laser_alive_mask is not None:
        yield "laser_liveness", snapshot.laser_alive_mask
