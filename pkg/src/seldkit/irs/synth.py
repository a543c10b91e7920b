"""Reverberant FOA clip synthesis from extracted source signals.

Each (mono signal, class) pair is convolved with one simulated FOA RIR,
placed at a random onset, gain-scaled, and summed; labels mark the frames
where the direct-path-aligned source envelope is active, carrying the
RIR's ground-truth direction. The mix is peak-normalized so clipping can
never occur.
"""

from __future__ import annotations

import numpy as np

from ..core import (
    DEFAULT_CLASS_COUNT,
    DEFAULT_LABEL_RATE,
    Event,
    EventList,
    FoaClip,
    ValidationError,
    vec_to_azel,
)
from ..dsp import fft_convolve
from .simulate import FoaRirSet

PEAK_NORM = 0.9
SOURCE_GAIN_DB = (-6.0, 0.0)


def _direct_delay_samples(rir: np.ndarray) -> int:
    """Arrival of the direct path, taken from the omni channel peak."""
    return int(np.argmax(np.abs(rir[0])))


def synthesize(sources, rirs: FoaRirSet, clip_len: int, rng: np.random.Generator,
               label_rate: float = DEFAULT_LABEL_RATE,
               class_count: int = DEFAULT_CLASS_COUNT,
               peak: float = PEAK_NORM,
               gain_db_range: tuple[float, float] = SOURCE_GAIN_DB) -> tuple[FoaClip, EventList]:
    """Convolve sources with their FOA RIRs into one labeled clip.

    ``sources`` is a sequence of (mono samples, class_id); source ``i`` uses
    ``rirs.rirs[i]``. Onsets are drawn so that each source's direct-path
    activity fits inside ``clip_len`` samples.
    """
    sources = list(sources)
    if len(sources) != rirs.n_sources:
        raise ValidationError(
            f"{len(sources)} sources for {rirs.n_sources} impulse responses"
        )
    if clip_len <= 0:
        raise ValidationError("clip length must be positive")
    sample_rate = rirs.sample_rate
    label_hop = sample_rate / label_rate
    total_frames = int(clip_len / label_hop)
    mix = np.zeros((4, clip_len))
    events: list[Event] = []
    for index, (signal, class_id) in enumerate(sources):
        signal = np.asarray(signal, dtype=np.float64).ravel()
        if signal.size == 0:
            raise ValidationError(f"source {index} is empty")
        if not 0 <= class_id < class_count:
            raise ValidationError(f"source {index} class {class_id} out of range")
        rir = rirs.rirs[index]
        delay = _direct_delay_samples(rir)
        max_onset = clip_len - signal.size - delay
        onset = int(rng.integers(0, max(max_onset, 0) + 1))
        gain = 10.0 ** (rng.uniform(*gain_db_range) / 20.0)
        wet = np.stack([fft_convolve(signal, rir[ch]) for ch in range(4)]) * gain
        stop = min(onset + wet.shape[1], clip_len)
        mix[:, onset:stop] += wet[:, :stop - onset]

        active_start = onset + delay
        active_stop = min(active_start + signal.size, clip_len)
        first = int(active_start // label_hop)
        last = int(-(-active_stop // label_hop))
        az, el = vec_to_azel(rirs.doas[index])
        az_i, el_i = int(np.rint(az)), int(np.rint(el))
        if az_i >= 180:
            az_i -= 360
        if abs(el_i) == 90:
            az_i = 0
        for frame in range(first, min(last, total_frames)):
            events.append(Event(frame, int(class_id), index, az_i, el_i))
    peak_value = np.abs(mix).max()
    if peak_value > 0:
        mix *= peak / peak_value
    clip = FoaClip(samples=mix, sample_rate=sample_rate)
    return clip, EventList(events=tuple(events), class_count=class_count)
