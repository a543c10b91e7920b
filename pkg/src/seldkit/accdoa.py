"""Activity-coupled Cartesian DOA representation.

An ACCDOA grid holds one 3-vector per (label frame, class): the direction
is the event DOA and the vector length is the event activity. Targets are
encoded from event lists, model outputs are decoded back by thresholding
the vector norm, and track-wise (SED + DOA per track) outputs convert to
the same representation for ensembling.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_LABEL_RATE,
    Event,
    EventList,
    FormatError,
    ValidationError,
    azel_to_vec,
    vec_to_azel,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AccdoaGrid:
    """Frames x classes x 3 activity-coupled DOA vector field."""

    vectors: np.ndarray
    frame_rate: float = DEFAULT_LABEL_RATE  # label frames per second

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 3:
            raise ValidationError(f"expected (frames, classes, 3), got {v.shape}")
        object.__setattr__(self, "vectors", v)

    @property
    def n_frames(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_classes(self) -> int:
        return self.vectors.shape[1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=-1)


@dataclass(frozen=True)
class Einv2Output:
    """Track-wise output: per-track class probabilities plus one DOA vector."""

    sed: np.ndarray  # (frames, tracks, classes) in [0, 1]
    doa: np.ndarray  # (frames, tracks, 3)
    frame_rate: float = DEFAULT_LABEL_RATE

    def __post_init__(self):
        sed = np.asarray(self.sed, dtype=np.float64)
        doa = np.asarray(self.doa, dtype=np.float64)
        if sed.ndim != 3:
            raise ValidationError(f"sed must be (frames, tracks, classes), got {sed.shape}")
        if doa.shape != sed.shape[:2] + (3,):
            raise ValidationError(f"doa shape {doa.shape} inconsistent with sed {sed.shape}")
        if sed.shape[1] < 1:
            raise ValidationError("need at least one track")
        if sed.size and (sed.min() < 0.0 or sed.max() > 1.0):
            raise ValidationError("sed probabilities must lie in [0, 1]")
        object.__setattr__(self, "sed", sed)
        object.__setattr__(self, "doa", doa)

    @property
    def n_frames(self) -> int:
        return self.sed.shape[0]

    @property
    def n_tracks(self) -> int:
        return self.sed.shape[1]

    @property
    def n_classes(self) -> int:
        return self.sed.shape[2]


def encode_labels(events: EventList, frames: int, classes: int,
                  frame_rate: float = DEFAULT_LABEL_RATE) -> AccdoaGrid:
    """Encode frame-wise event labels as target ACCDOA vectors.

    Active (frame, class) cells carry the unit DOA vector, inactive cells are
    zero. The representation holds one vector per class, so when two tracks of
    the same class collide in a frame the lowest track id wins and the
    collision is logged.
    """
    if classes != events.class_count:
        raise ValidationError(
            f"class count {classes} does not match event list ({events.class_count})"
        )
    grid = np.zeros((frames, classes, 3))
    occupied: dict[tuple[int, int], int] = {}
    collisions = 0
    for ev in events:
        if ev.frame >= frames:
            raise ValidationError(f"event frame {ev.frame} outside grid of {frames} frames")
        key = (ev.frame, ev.class_id)
        if key in occupied:
            collisions += 1
            if ev.track_id >= occupied[key]:
                continue
        occupied[key] = ev.track_id
        grid[ev.frame, ev.class_id] = azel_to_vec(ev.azimuth, ev.elevation)
    if collisions:
        logger.warning(
            "encode_labels: %d same-class track collisions resolved to lowest track id",
            collisions,
        )
    return AccdoaGrid(vectors=grid, frame_rate=frame_rate)


def decode(grid: AccdoaGrid, threshold: float, class_count: int | None = None) -> EventList:
    """Threshold vector norms into an event list (one event max per class/frame).

    A class is active in a frame when its vector norm strictly exceeds
    ``threshold``; its DOA is the normalized vector rounded to integer degrees.
    Decoded events always carry track id 0.
    """
    if threshold <= 0:
        raise ValidationError(f"threshold must be positive, got {threshold}")
    norms = grid.norms()
    active = norms > threshold
    events = []
    frames_idx, class_idx = np.nonzero(active)
    if frames_idx.size:
        vecs = grid.vectors[frames_idx, class_idx]
        az, el = vec_to_azel(vecs)
        az = np.atleast_1d(az)
        el = np.atleast_1d(el)
        az_i = np.rint(az).astype(int)
        el_i = np.rint(el).astype(int)
        az_i[az_i >= 180] -= 360
        az_i = np.where(np.abs(el_i) == 90, 0, az_i)
        for f, c, a, e in zip(frames_idx, class_idx, az_i, el_i):
            events.append(Event(int(f), int(c), 0, int(a), int(e)))
    return EventList(events=tuple(events),
                     class_count=class_count if class_count is not None else grid.n_classes)


def mse_loss(estimate: AccdoaGrid, target: AccdoaGrid) -> float:
    """Mean squared error over frames x classes x 3."""
    if estimate.vectors.shape != target.vectors.shape:
        raise ValidationError(
            f"shape mismatch {estimate.vectors.shape} vs {target.vectors.shape}"
        )
    diff = estimate.vectors - target.vectors
    return float(np.mean(diff * diff))


def einv2_to_accdoa(out: Einv2Output) -> AccdoaGrid:
    """Collapse track-wise output to one ACCDOA vector per class.

    Per frame and class, each track proposes ``sed * doa``; the proposal with
    the largest norm wins (ties go to the lowest track index).
    """
    # (frames, tracks, classes, 3)
    cand = out.sed[..., None] * out.doa[:, :, None, :]
    norms = np.linalg.norm(cand, axis=-1)
    best = norms.argmax(axis=1)  # first max = lowest track on ties
    f_idx, c_idx = np.meshgrid(
        np.arange(out.n_frames), np.arange(out.n_classes), indexing="ij"
    )
    vectors = cand[f_idx, best, c_idx]
    return AccdoaGrid(vectors=vectors, frame_rate=out.frame_rate)


# ---------------------------------------------------------------------------
# On-disk formats (little-endian, float32 payloads)

_GRID_MAGIC = b"SKGD"
_EINV2_MAGIC = b"SKE2"
_IO_VERSION = 1


def write_grid(grid: AccdoaGrid, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_GRID_MAGIC)
        fh.write(struct.pack("<HIId", _IO_VERSION, grid.n_frames, grid.n_classes,
                             grid.frame_rate))
        fh.write(np.ascontiguousarray(grid.vectors, dtype="<f4").tobytes())


def read_grid(path) -> AccdoaGrid:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _GRID_MAGIC:
            raise FormatError(f"{path}: not an ACCDOA grid file (magic {magic!r})")
        version, frames, classes, frame_rate = struct.unpack("<HIId", fh.read(18))
        if version != _IO_VERSION:
            raise FormatError(f"{path}: unsupported grid version {version}")
        data = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
    if data.size != frames * classes * 3:
        raise ValidationError(f"{path}: truncated grid payload")
    return AccdoaGrid(vectors=data.reshape(frames, classes, 3), frame_rate=frame_rate)


def write_einv2(out: Einv2Output, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_EINV2_MAGIC)
        fh.write(struct.pack("<HIHHd", _IO_VERSION, out.n_frames, out.n_tracks,
                             out.n_classes, out.frame_rate))
        fh.write(np.ascontiguousarray(out.sed, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(out.doa, dtype="<f4").tobytes())


def read_einv2(path) -> Einv2Output:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _EINV2_MAGIC:
            raise FormatError(f"{path}: not a track-wise output file (magic {magic!r})")
        version, frames, tracks, classes, frame_rate = struct.unpack("<HIHHd", fh.read(18))
        if version != _IO_VERSION:
            raise FormatError(f"{path}: unsupported format version {version}")
        sed_count = frames * tracks * classes
        raw = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
    if raw.size != sed_count + frames * tracks * 3:
        raise ValidationError(f"{path}: truncated payload")
    sed = raw[:sed_count].reshape(frames, tracks, classes)
    doa = raw[sed_count:].reshape(frames, tracks, 3)
    return Einv2Output(sed=sed, doa=doa, frame_rate=frame_rate)
