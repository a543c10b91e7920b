"""Output-level combination: window stitching and multi-model averaging.

Inference runs on fixed-length windows that overlap (512 frames with a
20-frame shift by default); overlapping frames are averaged vector-wise.
Model ensembling averages ACCDOA vectors (track-wise outputs are converted
first), with uniform or per-model scalar weights, before thresholding.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .accdoa import (
    AccdoaGrid,
    decode,
    einv2_to_accdoa,
    read_einv2,
    read_grid,
)
from .config import load_config
from .core import EventList, ValidationError, write_metadata

logger = logging.getLogger(__name__)

INFERENCE_WINDOW_FRAMES = 512
INFERENCE_HOP_FRAMES = 20


@dataclass(frozen=True)
class EnsembleSpec:
    """Member grids plus normalized weights and the decoding threshold."""

    members: tuple[AccdoaGrid, ...]
    weights: np.ndarray
    threshold: float = 0.3

    def __post_init__(self):
        if not self.members:
            raise ValidationError("ensemble needs at least one member")
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.shape != (len(self.members),):
            raise ValidationError(
                f"{weights.size} weights for {len(self.members)} members"
            )
        if np.any(weights < 0):
            raise ValidationError("weights must be non-negative")
        total = weights.sum()
        if total <= 0:
            raise ValidationError("weights must not all be zero")
        object.__setattr__(self, "weights", weights / total)

    @classmethod
    def simple(cls, members, threshold: float = 0.3) -> "EnsembleSpec":
        members = tuple(members)
        return cls(members=members, weights=np.ones(len(members)), threshold=threshold)


def stitch_windows(window_outputs, total_frames: int) -> AccdoaGrid:
    """Average overlapping window grids into one grid of ``total_frames``.

    ``window_outputs`` is a sequence of ``(start_frame, AccdoaGrid)``. Every
    frame in ``[0, total_frames)`` must be covered by at least one window;
    frames covered by several windows take the mean over their actual
    coverage count.
    """
    windows = list(window_outputs)
    if not windows:
        raise ValidationError("no windows to stitch")
    n_classes = windows[0][1].n_classes
    frame_rate = windows[0][1].frame_rate
    total = np.zeros((total_frames, n_classes, 3))
    count = np.zeros(total_frames)
    for start, grid in windows:
        if grid.n_classes != n_classes:
            raise ValidationError("window grids disagree on class count")
        if start < 0 or start + grid.n_frames > total_frames:
            raise ValidationError(
                f"window [{start}, {start + grid.n_frames}) outside [0, {total_frames})"
            )
        total[start:start + grid.n_frames] += grid.vectors
        count[start:start + grid.n_frames] += 1
    if np.any(count == 0):
        gap = int(np.argmax(count == 0))
        raise ValidationError(f"coverage gap at frame {gap}")
    return AccdoaGrid(vectors=total / count[:, None, None], frame_rate=frame_rate)


def average(spec: EnsembleSpec) -> AccdoaGrid:
    """Weighted vector mean of the member grids (weights sum to one)."""
    shape = spec.members[0].vectors.shape
    for member in spec.members[1:]:
        if member.vectors.shape != shape:
            raise ValidationError(
                f"member shape {member.vectors.shape} != {shape}"
            )
    stacked = np.stack([m.vectors for m in spec.members])
    mixed = np.tensordot(spec.weights, stacked, axes=(0, 0))
    return AccdoaGrid(vectors=mixed, frame_rate=spec.members[0].frame_rate)


# ---------------------------------------------------------------------------
# Manifest-driven ensembling.
#
# Manifest is a key=value file:
#     average = simple | weighted
#     threshold = 0.3
#     weights = 0.5,0.25,0.25        (weighted only; one weight per member)
#     members = members.txt          (one member path per line, # comments ok)
# Member paths are directories (or single files) holding per-clip outputs:
# plain "<clip>.accdoa"/"<clip>.einv2" files, or window files named
# "<clip>@<start_frame>.accdoa" that are stitched before averaging.

_WINDOW_RE = re.compile(r"^(?P<clip>.+)@(?P<start>\d+)$")


@dataclass(frozen=True)
class Manifest:
    member_paths: tuple[Path, ...]
    weights: np.ndarray | None
    threshold: float


def parse_manifest(path) -> Manifest:
    path = Path(path)
    cfg = load_config(path)
    mode = cfg.get("average", "simple")
    if mode not in ("simple", "weighted"):
        raise ValidationError(f"average must be simple|weighted, got {mode!r}")
    threshold = float(cfg.get("threshold", "0.3"))
    members_file = cfg.get("members")
    if not members_file:
        raise ValidationError(f"{path}: manifest lacks a members list")
    members_path = (path.parent / members_file).resolve()
    member_paths = []
    for line in members_path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            member_paths.append((members_path.parent / line).resolve())
    if not member_paths:
        raise ValidationError(f"{members_path}: empty member list")
    weights = None
    if mode == "weighted":
        raw = cfg.get("weights", "")
        weights = np.array([float(tok) for tok in raw.split(",") if tok.strip()])
        if weights.size != len(member_paths):
            raise ValidationError(
                f"{weights.size} weights for {len(member_paths)} members"
            )
    return Manifest(member_paths=tuple(member_paths), weights=weights,
                    threshold=threshold)


def _load_member(path: Path) -> dict[str, AccdoaGrid]:
    """Load one member's per-clip grids, stitching window files."""
    if path.is_file():
        files = [path]
    else:
        files = sorted(list(path.glob("*.accdoa")) + list(path.glob("*.einv2")))
        if not files:
            raise ValidationError(f"{path}: no member output files")
    singles: dict[str, AccdoaGrid] = {}
    windows: dict[str, list[tuple[int, AccdoaGrid]]] = {}
    for file in files:
        grid = read_einv2(file) if file.suffix == ".einv2" else None
        grid = einv2_to_accdoa(grid) if grid is not None else read_grid(file)
        match = _WINDOW_RE.match(file.stem)
        if match:
            windows.setdefault(match.group("clip"), []).append(
                (int(match.group("start")), grid)
            )
        else:
            singles[file.stem] = grid
    for clip, parts in windows.items():
        if clip in singles:
            raise ValidationError(f"{path}: clip {clip} has both window and full outputs")
        total = max(start + g.n_frames for start, g in parts)
        singles[clip] = stitch_windows(parts, total)
    return singles


def run_manifest(manifest, out_dir) -> dict:
    """Stitch, average, decode, and write per-clip metadata CSVs.

    ``manifest`` is a path or a parsed Manifest. Returns a report dict with
    the decoded EventList per clip and the ensemble configuration used.
    """
    if not isinstance(manifest, Manifest):
        manifest = parse_manifest(manifest)
    members = []
    for member_path in manifest.member_paths:
        if not member_path.exists():
            raise ValidationError(f"missing member output: {member_path}")
        members.append(_load_member(member_path))
    clip_ids = set(members[0])
    for grids in members[1:]:
        if set(grids) != clip_ids:
            raise ValidationError("members disagree on the clip set")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    weights = manifest.weights if manifest.weights is not None else np.ones(len(members))
    decoded: dict[str, EventList] = {}
    for clip in sorted(clip_ids):
        spec = EnsembleSpec(
            members=tuple(m[clip] for m in members),
            weights=weights,
            threshold=manifest.threshold,
        )
        events = decode(average(spec), spec.threshold)
        write_metadata(events, out_dir / f"{clip}.csv")
        decoded[clip] = events
    report = {
        "members": len(members),
        "clips": len(decoded),
        "threshold": manifest.threshold,
        "weights": [float(w) for w in weights / np.sum(weights)],
        "events": decoded,
    }
    with open(out_dir / "ensemble_report.csv", "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["clip", "decoded_events"])
        for clip in sorted(decoded):
            writer.writerow([clip, len(decoded[clip])])
    logger.info(
        "ensemble: %d members, %d clips, threshold %.2f",
        len(members), len(decoded), manifest.threshold,
    )
    return report
