"""Source-segment mining from labeled recordings.

Candidates are maximal label-frame runs where exactly one event is active
and its direction never moves. Two filters then remove runs that are
dominated by unlabeled directional interference: an external per-candidate
classifier verdict (stage 1, pluggable) and a spatial-coherence test on
the low-frequency covariance eigenvalues (stage 2).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..core import DEFAULT_LABEL_RATE, EventList, FoaClip, ValidationError
from ..dsp import stft

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentCandidate:
    """A single-event, non-moving span of a source clip."""

    segment_id: str
    start_frame: int  # label frames, inclusive
    end_frame: int  # exclusive
    start_sample: int
    end_sample: int
    class_id: int
    azimuth: int
    elevation: int
    overlap_free: bool = True
    static: bool = True

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame

    @property
    def n_samples(self) -> int:
        return self.end_sample - self.start_sample


class EigenVerdict(NamedTuple):
    keep: bool
    flagged_fraction: float
    reason: str | None


def extract_segments(clip: FoaClip, events: EventList, min_len: int, max_len: int,
                     label_rate: float = DEFAULT_LABEL_RATE,
                     id_prefix: str = "seg") -> list[SegmentCandidate]:
    """Maximal single-event constant-DOA runs, clipped to [min_len, max_len] frames.

    Runs longer than ``max_len`` are truncated; moving events split runs at
    every direction change so only the constant sub-runs survive.
    """
    if min_len < 1 or max_len < min_len:
        raise ValidationError(f"bad length bounds [{min_len}, {max_len}]")
    hop = clip.sample_rate / label_rate
    total_frames = int(clip.n_samples / hop)
    by_frame = events.by_frame()
    candidates: list[SegmentCandidate] = []
    run_start = None
    run_key = None  # (class_id, track_id, azimuth, elevation)

    def close_run(start: int, stop: int, key):
        if stop - start < min_len:
            return
        stop = min(stop, start + max_len)
        class_id, _track, az, el = key
        start_sample = int(round(start * hop))
        end_sample = min(int(round(stop * hop)), clip.n_samples)
        if end_sample <= start_sample:
            return
        candidates.append(SegmentCandidate(
            segment_id=f"{id_prefix}{len(candidates):04d}",
            start_frame=start, end_frame=stop,
            start_sample=start_sample, end_sample=end_sample,
            class_id=class_id, azimuth=az, elevation=el,
        ))

    for frame in range(total_frames):
        active = by_frame.get(frame, [])
        if len(active) == 1:
            ev = active[0]
            key = (ev.class_id, ev.track_id, ev.azimuth, ev.elevation)
        else:
            key = None
        if key != run_key:
            if run_key is not None:
                close_run(run_start, frame, run_key)
            run_start = frame if key is not None else None
            run_key = key
    if run_key is not None:
        close_run(run_start, total_frames, run_key)
    return candidates


def stage1_filter(candidates: list[SegmentCandidate],
                  verdicts: dict[str, np.ndarray] | None,
                  score_threshold: float = 0.5) -> list[SegmentCandidate]:
    """Drop candidates an external classifier does not recognize as any class.

    ``verdicts`` maps segment id to per-class scores in [0, 1]; a candidate
    survives when its best score reaches ``score_threshold``. Passing None
    keeps everything (pass-through mode, logged).
    """
    if verdicts is None:
        logger.warning("stage1_filter: no verdicts supplied, passing all %d candidates",
                       len(candidates))
        return list(candidates)
    kept = []
    for cand in candidates:
        scores = verdicts.get(cand.segment_id)
        if scores is None:
            raise ValidationError(f"no verdict for segment {cand.segment_id}")
        if float(np.max(scores)) >= score_threshold:
            kept.append(cand)
    return kept


def stage2_eigen_filter(clip: FoaClip, candidate: SegmentCandidate,
                        max_freq: float = 2000.0, ratio: float = 0.30,
                        bin_fraction: float = 0.5,
                        frame_len: int = 480, hop: int = 240) -> EigenVerdict:
    """Spatial-coherence test on the segment's low-frequency covariance.

    Per frequency bin below ``max_freq``, the 4x4 covariance of the STFT
    vectors over the span is eigendecomposed; the candidate is dropped when
    the second eigenvalue exceeds ``ratio`` times the first in more than
    ``bin_fraction`` of those bins (a single dominant plane wave keeps the
    ratio near zero, diffuse or multi-source content pushes it up).
    """
    span = clip.samples[:, candidate.start_sample:candidate.end_sample]
    if span.shape[1] < frame_len:
        return EigenVerdict(False, 1.0, "too short for analysis")
    if not np.any(span):
        return EigenVerdict(False, 1.0, "silent")
    spec = stft(span, frame_len=frame_len, hop=hop, sample_rate=clip.sample_rate)
    bins = spec.bin_freqs < max_freq
    x = spec.data[:, :, bins]  # (4, T, B)
    cov = np.einsum("ptb,qtb->bpq", x, np.conj(x)) / x.shape[1]
    eigvals = np.linalg.eigvalsh(cov)  # ascending
    lam1 = eigvals[:, -1].real
    lam2 = eigvals[:, -2].real
    flagged = lam2 > ratio * lam1
    fraction = float(np.mean(flagged))
    if fraction > bin_fraction:
        return EigenVerdict(False, fraction, "spatially incoherent")
    return EigenVerdict(True, fraction, None)
