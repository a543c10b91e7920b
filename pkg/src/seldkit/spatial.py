"""FOA rotation group for augmentation and rotation test-time averaging.

First-order SN3D dipole channels transform exactly by a 3x3 orthogonal
matrix applied sample-wise to the (X, Y, Z) triple, with W untouched, so
rotations and reflections of the sound scene need no channel interpolation.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .accdoa import AccdoaGrid
from .core import (
    ConfigurationError,
    Event,
    EventList,
    FoaClip,
    ValidationError,
    azel_to_vec,
    vec_to_azel,
)

# ACN channel order is [W, Y, Z, X]; dipole rows in (x, y, z) vector order.
_ACN_DIPOLES = (3, 1, 2)  # X, Y, Z channel indices


def _check_orthogonal(matrix: np.ndarray) -> np.ndarray:
    rot = np.asarray(matrix, dtype=np.float64)
    if rot.shape != (3, 3):
        raise ValidationError(f"rotation must be 3x3, got {rot.shape}")
    if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
        raise ValidationError("rotation matrix is not orthogonal")
    return rot


def yaw_rotation(degrees: float) -> np.ndarray:
    """Rotation about +z by the given angle (counterclockwise azimuth)."""
    rad = np.radians(degrees)
    c, s = np.cos(rad), np.sin(rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def discrete_rotation_set() -> list[np.ndarray]:
    """The 16 exact FOA transforms: 4 yaws x optional y-reflection x optional z-flip."""
    out = []
    for yaw in (0.0, 90.0, 180.0, 270.0):
        base = np.rint(yaw_rotation(yaw))  # entries are exactly 0/±1
        for reflect in (False, True):
            mat = base @ np.diag([1.0, -1.0, 1.0]) if reflect else base
            for flip in (False, True):
                out.append(mat @ np.diag([1.0, 1.0, -1.0]) if flip else mat.copy())
    return out


def rotate_foa(clip: FoaClip, matrix) -> FoaClip:
    """Rotate/reflect the sound scene of an FOA clip by an orthogonal matrix."""
    rot = _check_orthogonal(matrix)
    dipoles = clip.samples[list(_ACN_DIPOLES), :]  # rows x, y, z
    rotated = rot @ dipoles
    out = np.array(clip.samples)
    for row, ch in enumerate(_ACN_DIPOLES):
        out[ch] = rotated[row]
    return FoaClip(samples=out, sample_rate=clip.sample_rate)


def rotate_labels(events: EventList, matrix) -> EventList:
    """Map every event DOA through the matrix, re-quantized to integer degrees."""
    rot = _check_orthogonal(matrix)
    moved = []
    for ev in events:
        vec = rot @ azel_to_vec(ev.azimuth, ev.elevation)
        az, el = vec_to_azel(vec)
        az_i, el_i = int(np.rint(az)), int(np.rint(el))
        if az_i >= 180:
            az_i -= 360
        if abs(el_i) == 90:
            az_i = 0
        moved.append(Event(ev.frame, ev.class_id, ev.track_id, az_i, el_i))
    return EventList(events=tuple(moved), class_count=events.class_count)


def rotate_grid(grid: AccdoaGrid, matrix) -> AccdoaGrid:
    """Apply the matrix to every ACCDOA vector (no re-quantization)."""
    rot = _check_orthogonal(matrix)
    return AccdoaGrid(vectors=grid.vectors @ rot.T, frame_rate=grid.frame_rate)


def tta_average(model: Callable[[FoaClip], AccdoaGrid], clip: FoaClip,
                rotations: Sequence[np.ndarray]) -> AccdoaGrid:
    """Rotation test-time averaging of a grid-producing model.

    Runs the model on each rotated copy of the clip, rotates the predicted
    vectors back, and averages. The mean is order-independent.
    """
    if len(rotations) == 0:
        raise ValidationError("need at least one rotation")
    total = None
    frame_rate = None
    for matrix in rotations:
        rot = _check_orthogonal(matrix)
        grid = model(rotate_foa(clip, rot))
        back = grid.vectors @ rot  # v @ R == R^T v per vector
        if total is None:
            total = back
            frame_rate = grid.frame_rate
        else:
            if back.shape != total.shape:
                raise ValidationError("model returned inconsistent grid shapes")
            total = total + back
    return AccdoaGrid(vectors=total / len(rotations), frame_rate=frame_rate)


def parse_rotation_flag(text: str) -> list[np.ndarray]:
    """Parse the CLI rotation selector: ``all16``, ``identity``, or ``list:i,j,...``."""
    full = discrete_rotation_set()
    if text == "all16":
        return full
    if text == "identity":
        return [np.eye(3)]
    if text.startswith("list:"):
        try:
            indices = [int(tok) for tok in text[5:].split(",") if tok]
        except ValueError as exc:
            raise ConfigurationError(f"bad rotation list {text!r}") from exc
        if not indices:
            raise ConfigurationError("rotation list is empty")
        for idx in indices:
            if not 0 <= idx < len(full):
                raise ConfigurationError(f"rotation index {idx} outside 0..{len(full) - 1}")
        return [full[idx] for idx in indices]
    raise ConfigurationError(f"unknown rotation selector {text!r}")
