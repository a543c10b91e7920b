"""Waveform-domain event mixing and feature-domain multichannel masking.

The mixer overlays up to two extra labeled clips onto a base clip with
random gain, delay, and a peaking-EQ filter applied identically to all four
FOA channels (spatial cues are ratios between channels, so per-channel EQ
would corrupt them). The feature masker zeroes random time ranges,
frequency ranges, and occasionally a whole channel's feature maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .core import (
    DEFAULT_LABEL_RATE,
    Event,
    EventList,
    FoaClip,
    ValidationError,
)
from .dsp import FeatureTensor


@dataclass(frozen=True)
class EmdaConfig:
    max_mixed_events: int = 2
    gain_db: tuple[float, float] = (-12.0, 0.0)
    # delay range in samples; None upper bound means "anywhere in the clip"
    delay: tuple[int, int | None] = (0, None)
    eq_freq_hz: tuple[float, float] = (100.0, 8000.0)
    eq_gain_db: tuple[float, float] = (-6.0, 6.0)
    eq_q: float = 1.0

    def __post_init__(self):
        if self.max_mixed_events > 2:
            raise ValidationError("at most two extra events may be mixed")


@dataclass(frozen=True)
class EmdaParams:
    """Drawn mixing parameters for one extra clip."""

    gain_db: float
    delay_samples: int
    eq_freq_hz: float
    eq_gain_db: float
    eq_q: float


@dataclass(frozen=True)
class SpecAugmentConfig:
    n_time_masks: int = 2
    max_time_width: int = 64
    n_freq_masks: int = 2
    max_freq_width: int = 16
    channel_mask_prob: float = 0.1


def biquad_peaking(sample_rate: int, freq_hz: float, gain_db: float, q: float):
    """RBJ peaking-EQ biquad coefficients (b, a)."""
    amp = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * np.pi * freq_hz / sample_rate
    alpha = np.sin(w0) / (2.0 * q)
    cos_w0 = np.cos(w0)
    b = np.array([1.0 + alpha * amp, -2.0 * cos_w0, 1.0 - alpha * amp])
    a = np.array([1.0 + alpha / amp, -2.0 * cos_w0, 1.0 - alpha / amp])
    return b / a[0], a / a[0]


def draw_emda_params(rng: np.random.Generator, cfg: EmdaConfig, n_extras: int,
                     clip_len: int) -> list[EmdaParams]:
    """Draw the per-extra mixing parameters (separated for replayability)."""
    params = []
    hi = cfg.delay[1] if cfg.delay[1] is not None else clip_len
    for _ in range(n_extras):
        gain = rng.uniform(*cfg.gain_db)
        delay = int(rng.integers(cfg.delay[0], max(hi, cfg.delay[0] + 1)))
        log_lo, log_hi = np.log(cfg.eq_freq_hz[0]), np.log(cfg.eq_freq_hz[1])
        freq = float(np.exp(rng.uniform(log_lo, log_hi)))
        eq_gain = rng.uniform(*cfg.eq_gain_db)
        params.append(EmdaParams(gain, delay, freq, eq_gain, cfg.eq_q))
    return params


def process_extra(clip: FoaClip, params: EmdaParams, out_len: int) -> np.ndarray:
    """Gain/EQ/delay one extra clip into a length-``out_len`` buffer.

    The delayed signal is truncated at the buffer end (never wrapped). A
    weight of exactly zero yields silence.
    """
    weight = 10.0 ** (params.gain_db / 20.0) if np.isfinite(params.gain_db) else 0.0
    out = np.zeros((4, out_len))
    if weight == 0.0:
        return out
    b, a = biquad_peaking(clip.sample_rate, params.eq_freq_hz, params.eq_gain_db,
                          params.eq_q)
    shaped = lfilter(b, a, clip.samples, axis=1) * weight
    take = min(clip.n_samples, out_len - params.delay_samples)
    if take > 0:
        out[:, params.delay_samples:params.delay_samples + take] = shaped[:, :take]
    return out


def apply_emda(base: tuple[FoaClip, EventList], extras, params: list[EmdaParams],
               label_rate: float = DEFAULT_LABEL_RATE) -> tuple[FoaClip, EventList]:
    """Mix pre-drawn extras into the base clip and merge the label lists.

    Extra labels shift by ``round(delay / label_hop)`` frames; frames past
    the base clip's label span are dropped, and extra track ids are offset
    so merged rows stay unique. Zero-weight extras contribute no labels.
    """
    base_clip, base_events = base
    mix = np.array(base_clip.samples)
    merged = list(base_events)
    label_hop = base_clip.sample_rate / label_rate
    frame_limit = int(base_clip.n_samples / label_hop)
    next_track = max((ev.track_id for ev in base_events), default=-1) + 1
    for (extra_clip, extra_events), par in zip(extras, params):
        if extra_clip.sample_rate != base_clip.sample_rate:
            raise ValidationError("sample rates must match for mixing")
        mix += process_extra(extra_clip, par, base_clip.n_samples)
        weight = 10.0 ** (par.gain_db / 20.0) if np.isfinite(par.gain_db) else 0.0
        if weight == 0.0:
            continue
        shift = int(round(par.delay_samples / label_hop))
        offset = next_track
        for ev in extra_events:
            frame = ev.frame + shift
            if frame >= frame_limit:
                continue
            merged.append(Event(frame, ev.class_id, ev.track_id + offset,
                                ev.azimuth, ev.elevation))
            next_track = max(next_track, ev.track_id + offset + 1)
    clip = FoaClip(samples=mix, sample_rate=base_clip.sample_rate)
    events = EventList(events=tuple(merged), class_count=base_events.class_count)
    return clip, events


def emda(base: tuple[FoaClip, EventList], extras, rng: np.random.Generator,
         cfg: EmdaConfig = EmdaConfig(),
         label_rate: float = DEFAULT_LABEL_RATE) -> tuple[FoaClip, EventList]:
    """Equalized mixture augmentation: random gain/delay/EQ per extra clip."""
    extras = list(extras)
    if len(extras) > cfg.max_mixed_events:
        raise ValidationError(
            f"{len(extras)} extras exceed the limit of {cfg.max_mixed_events}"
        )
    params = draw_emda_params(rng, cfg, len(extras), base[0].n_samples)
    return apply_emda(base, extras, params, label_rate)


def spec_augment_mc(features: FeatureTensor, rng: np.random.Generator,
                    cfg: SpecAugmentConfig = SpecAugmentConfig()) -> FeatureTensor:
    """Multichannel hard masking: time and frequency stripes across all maps,
    plus (with some probability) one channel's feature maps zeroed entirely.

    A map belongs to the channel named by its layout tag's trailing digit
    (amp0, ipd2, cosipd1, ...). Masked cells are set to zero; everything
    else is preserved bit-exactly.
    """
    maps = np.array(features.maps)
    _, n_frames, n_bins = maps.shape
    for _ in range(cfg.n_time_masks):
        width = int(rng.integers(0, min(cfg.max_time_width, n_frames) + 1))
        if width:
            start = int(rng.integers(0, n_frames - width + 1))
            maps[:, start:start + width, :] = 0.0
    for _ in range(cfg.n_freq_masks):
        width = int(rng.integers(0, min(cfg.max_freq_width, n_bins) + 1))
        if width:
            start = int(rng.integers(0, n_bins - width + 1))
            maps[:, :, start:start + width] = 0.0
    if rng.random() < cfg.channel_mask_prob:
        channel = int(rng.integers(0, 4))
        for idx, tag in enumerate(features.layout):
            if tag and tag[-1].isdigit() and int(tag[-1]) == channel:
                maps[idx] = 0.0
    return FeatureTensor(maps=maps, layout=features.layout)
