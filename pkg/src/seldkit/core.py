"""Core audio/label types, coordinate conversions, and dataset I/O.

Conventions used throughout the toolkit:

* FOA audio is 4-channel, ACN channel order ``[W, Y, Z, X]`` with SN3D
  normalization, 24 kHz for dataset-conformant clips.
* Directions use x-front / y-left / z-up axes with azimuth counterclockwise
  from x: ``x = cos(el)cos(az), y = cos(el)sin(az), z = sin(el)``,
  azimuth in [-180, 180) degrees, elevation in [-90, 90] degrees.
* Event metadata is CSV with rows ``frame,class,track,azimuth,elevation``
  (integers, no header, LF line endings) at 100 ms label frames by default.
"""

from __future__ import annotations

import csv
import io
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ToolkitError):
    """A file does not match the expected container format."""


class ValidationError(ToolkitError):
    """Inputs violate a documented invariant or precondition."""


class ConfigurationError(ToolkitError):
    """A configuration value is inconsistent or unusable."""


class SamplingError(ToolkitError):
    """A randomized sampler could not satisfy its constraints."""


DATASET_SAMPLE_RATE = 24000
DEFAULT_LABEL_RATE = 10.0  # label frames per second (100 ms frames)
DEFAULT_CLASS_COUNT = 12


@dataclass(frozen=True)
class FoaClip:
    """Immutable 4-channel first-order Ambisonic buffer (ACN [W, Y, Z, X])."""

    samples: np.ndarray  # (4, n_samples) float64
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] != 4:
            raise ValidationError(
                f"FOA clip needs shape (4, n), got {samples.shape}"
            )
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.ascontiguousarray(samples)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


@dataclass(frozen=True, order=True)
class Event:
    """One frame-wise sound-event annotation."""

    frame: int
    class_id: int
    track_id: int
    azimuth: int
    elevation: int


@dataclass(frozen=True)
class EventList:
    """Frame-wise event annotations plus the class vocabulary size."""

    events: tuple[Event, ...]
    class_count: int

    def __post_init__(self):
        events = tuple(sorted(self.events))
        keys = set()
        for ev in events:
            if not 0 <= ev.class_id < self.class_count:
                raise ValidationError(
                    f"class {ev.class_id} outside [0, {self.class_count})"
                )
            if not -180 <= ev.azimuth < 180:
                raise ValidationError(f"azimuth {ev.azimuth} outside [-180, 180)")
            if not -90 <= ev.elevation <= 90:
                raise ValidationError(f"elevation {ev.elevation} outside [-90, 90]")
            if ev.frame < 0:
                raise ValidationError(f"negative label frame {ev.frame}")
            key = (ev.frame, ev.class_id, ev.track_id)
            if key in keys:
                raise ValidationError(f"duplicate event row {key}")
            keys.add(key)
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def n_frames(self) -> int:
        """Highest annotated frame + 1 (0 for an empty list)."""
        return max((ev.frame for ev in self.events), default=-1) + 1

    def by_frame(self) -> dict[int, list[Event]]:
        out: dict[int, list[Event]] = {}
        for ev in self.events:
            out.setdefault(ev.frame, []).append(ev)
        return out


def azel_to_vec(azimuth_deg, elevation_deg) -> np.ndarray:
    """Unit direction vector(s) for azimuth/elevation in degrees.

    Broadcasts over array inputs; the last output axis holds (x, y, z).
    """
    az = np.radians(np.asarray(azimuth_deg, dtype=np.float64))
    el = np.radians(np.asarray(elevation_deg, dtype=np.float64))
    x = np.cos(el) * np.cos(az)
    y = np.cos(el) * np.sin(az)
    z = np.sin(el) * np.ones_like(az)
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def vec_to_azel(vec) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth/elevation in degrees for direction vector(s).

    The vector need not be unit length but must be nonzero. At the poles
    (|z| = 1) the azimuth is reported as 0. Azimuth 180 maps to -180 so the
    result stays in [-180, 180).
    """
    v = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(norm <= 0.0):
        raise ValidationError("cannot convert zero vector to azimuth/elevation")
    unit = v / norm[..., None]
    el = np.degrees(np.arcsin(np.clip(unit[..., 2], -1.0, 1.0)))
    az = np.degrees(np.arctan2(unit[..., 1], unit[..., 0]))
    az = np.where(az >= 180.0, az - 360.0, az)
    at_pole = np.abs(unit[..., 2]) >= 1.0 - 1e-12
    az = np.where(at_pole, 0.0, az)
    if az.ndim == 0:
        return float(az), float(el)
    return az, el


def angular_distance(u, v) -> np.ndarray:
    """Great-circle angle in degrees between direction vectors (broadcasts).

    Equals the arccos of the clamped dot product of the unit vectors, but is
    evaluated through atan2 so identical and antipodal inputs give exactly
    0 and 180.
    """
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    an = a / np.linalg.norm(a, axis=-1, keepdims=True)
    bn = b / np.linalg.norm(b, axis=-1, keepdims=True)
    dot = np.sum(an * bn, axis=-1)
    cross = np.linalg.norm(np.cross(an, bn), axis=-1)
    out = np.degrees(np.arctan2(cross, dot))
    return float(out) if out.ndim == 0 else out


def n_label_frames(n_samples: int, sample_rate: int, label_rate: float = DEFAULT_LABEL_RATE) -> int:
    """Number of whole label frames covered by a signal."""
    return int(n_samples * label_rate / sample_rate)


# ---------------------------------------------------------------------------
# WAV I/O


def read_wav(path) -> FoaClip:
    """Read a 4-channel PCM/float WAV into a FoaClip scaled to [-1, 1].

    Raises FormatError for non-4-channel files or unsupported encodings.
    """
    try:
        sample_rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise FormatError(f"{path}: unsupported WAV encoding ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != 4:
        nch = 1 if data.ndim == 1 else data.shape[1]
        raise FormatError(f"{path}: expected 4 channels, found {nch}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 2**15
    elif data.dtype == np.int32:
        # 24-bit PCM is promoted to int32 with the low byte zero
        samples = data.astype(np.float64) / 2**31
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise FormatError(f"{path}: unsupported sample dtype {data.dtype}")
    return FoaClip(samples=samples.T, sample_rate=int(sample_rate))


def write_wav(clip: FoaClip, path, bit_depth="float32") -> int:
    """Write a clip as WAV; returns how many samples had to be clipped.

    ``bit_depth`` is 16, 24, or "float32" (the default, which avoids
    quantizing pipeline intermediates). Samples are clipped to [-1, 1].
    """
    x = clip.samples
    clipped = int(np.count_nonzero((x > 1.0) | (x < -1.0)))
    x = np.clip(x, -1.0, 1.0).T  # (n, 4) interleaved layout
    if bit_depth == "float32":
        wavfile.write(str(path), clip.sample_rate, x.astype(np.float32))
    elif bit_depth == 16:
        q = np.clip(np.rint(x * 2**15), -(2**15), 2**15 - 1).astype(np.int16)
        wavfile.write(str(path), clip.sample_rate, q)
    elif bit_depth == 24:
        q = np.clip(np.rint(x * 2**23), -(2**23), 2**23 - 1).astype("<i4")
        raw = q.reshape(-1, 1).view(np.uint8)[:, :3].tobytes()
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(4)
            fh.setsampwidth(3)
            fh.setframerate(clip.sample_rate)
            fh.writeframes(raw)
    else:
        raise ConfigurationError(f"unsupported bit depth {bit_depth!r}")
    return clipped


# ---------------------------------------------------------------------------
# Metadata CSV I/O


def read_metadata(path, class_count: int) -> EventList:
    """Parse a ``frame,class,track,azimuth,elevation`` CSV into an EventList."""
    events = []
    with open(path, "r", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 5:
                raise ValidationError(
                    f"{path}:{lineno}: expected 5 fields, got {len(row)}"
                )
            try:
                frame, class_id, track, az, el = (int(v) for v in row)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-integer field ({exc})") from exc
            if class_id >= class_count:
                raise ValidationError(
                    f"{path}:{lineno}: class {class_id} >= class count {class_count}"
                )
            events.append(Event(frame, class_id, track, az, el))
    try:
        return EventList(events=tuple(events), class_count=class_count)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def write_metadata(events: EventList, path) -> None:
    """Write events as the dataset CSV convention (sorted, LF, no header)."""
    with open(path, "w", newline="\n") as fh:
        for ev in events:
            fh.write(f"{ev.frame},{ev.class_id},{ev.track_id},{ev.azimuth},{ev.elevation}\n")
