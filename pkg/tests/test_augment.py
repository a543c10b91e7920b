import numpy as np
import pytest

from conftest import make_plane_wave
from seldkit.augment import (
    EmdaConfig,
    EmdaParams,
    SpecAugmentConfig,
    apply_emda,
    biquad_peaking,
    draw_emda_params,
    emda,
    process_extra,
    spec_augment_mc,
)
from seldkit.core import Event, EventList, FoaClip, ValidationError
from seldkit.dsp import FeatureTensor, extract_features, stft

SR = 24000
LABEL_HOP = 2400  # samples per label frame at 100 ms


def _labeled_clip(rng, az=0, el=0, frames=10, class_id=0):
    clip = make_plane_wave(az, el, frames * LABEL_HOP, rng=rng)
    events = EventList(
        events=tuple(Event(f, class_id, 0, az, el) for f in range(frames)),
        class_count=12,
    )
    return clip, events


class TestEmda:
    def test_zero_extras_identity(self, rng):
        base = _labeled_clip(rng)
        clip, events = emda(base, [], rng)
        assert np.array_equal(clip.samples, base[0].samples)
        assert events == base[1]

    def test_zero_weight_extra_contributes_nothing(self, rng):
        base = _labeled_clip(rng, class_id=0)
        extra = _labeled_clip(rng, az=90, class_id=1)
        params = [EmdaParams(gain_db=-np.inf, delay_samples=0,
                             eq_freq_hz=1000.0, eq_gain_db=0.0, eq_q=1.0)]
        clip, events = apply_emda(base, [extra], params)
        assert np.array_equal(clip.samples, base[0].samples)
        assert events == base[1]

    def test_delay_shifts_labels_by_label_hops(self, rng):
        base = _labeled_clip(rng, class_id=0, frames=12)
        extra_clip = make_plane_wave(45, 0, 3 * LABEL_HOP, rng=rng)
        extra_events = EventList(events=(Event(0, 5, 0, 45, 0),), class_count=12)
        params = [EmdaParams(gain_db=0.0, delay_samples=2 * LABEL_HOP,
                             eq_freq_hz=1000.0, eq_gain_db=0.0, eq_q=1.0)]
        _clip, events = apply_emda(base, [(extra_clip, extra_events)], params)
        shifted = [ev for ev in events if ev.class_id == 5]
        assert len(shifted) == 1
        assert shifted[0].frame == 2

    def test_labels_past_clip_end_dropped(self, rng):
        base = _labeled_clip(rng, frames=4)
        extra_clip = make_plane_wave(45, 0, 2 * LABEL_HOP, rng=rng)
        extra_events = EventList(events=(Event(1, 5, 0, 45, 0),), class_count=12)
        params = [EmdaParams(gain_db=0.0, delay_samples=3 * LABEL_HOP + 100,
                             eq_freq_hz=500.0, eq_gain_db=0.0, eq_q=1.0)]
        _clip, events = apply_emda(base, [(extra_clip, extra_events)], params)
        assert all(ev.class_id != 5 for ev in events)

    def test_mix_is_sum_of_processed_components(self, rng):
        base = _labeled_clip(rng, frames=8)
        extras = [_labeled_clip(rng, az=60, class_id=1, frames=6),
                  _labeled_clip(rng, az=-120, class_id=2, frames=5)]
        params = draw_emda_params(rng, EmdaConfig(), 2, base[0].n_samples)
        clip, _events = apply_emda(base, extras, params)
        manual = np.array(base[0].samples)
        for (extra_clip, _), par in zip(extras, params):
            manual += process_extra(extra_clip, par, base[0].n_samples)
        assert np.max(np.abs(clip.samples - manual)) < 1e-7

    def test_eq_preserves_interchannel_ratios(self, rng):
        # EQ applied identically to all four channels: the spatial cue (the
        # ratio of any dipole spectrum to W) must be untouched
        extra = make_plane_wave(70, 20, 8 * LABEL_HOP, rng=rng)
        par = EmdaParams(gain_db=-3.0, delay_samples=0,
                         eq_freq_hz=1200.0, eq_gain_db=5.0, eq_q=1.0)
        shaped = process_extra(extra, par, extra.n_samples)
        spec_in = stft(extra).data
        spec_out = stft(FoaClip(samples=shaped, sample_rate=SR)).data
        band = slice(10, 100)
        frames = slice(5, 25)
        ratio_in = spec_in[1, frames, band] / spec_in[0, frames, band]
        ratio_out = spec_out[1, frames, band] / spec_out[0, frames, band]
        assert np.max(np.abs(ratio_in - ratio_out)) < 1e-6

    def test_more_than_two_extras_rejected(self, rng):
        base = _labeled_clip(rng)
        extras = [_labeled_clip(rng)] * 3
        with pytest.raises(ValidationError):
            emda(base, extras, rng)

    def test_merged_tracks_stay_unique(self, rng):
        base = _labeled_clip(rng, az=0, class_id=3)
        extra = _labeled_clip(rng, az=0, class_id=3)  # same class, same frames
        params = [EmdaParams(gain_db=-6.0, delay_samples=0,
                             eq_freq_hz=800.0, eq_gain_db=0.0, eq_q=1.0)]
        _clip, events = apply_emda(base, [extra], params)
        keys = [(ev.frame, ev.class_id, ev.track_id) for ev in events]
        assert len(keys) == len(set(keys))
        assert len(events) == 2 * len(base[1])


class TestBiquad:
    def test_zero_gain_is_allpass(self):
        b, a = biquad_peaking(SR, 1000.0, 0.0, 1.0)
        assert np.allclose(b, a)

    def test_boost_at_center_frequency(self):
        from scipy.signal import freqz

        b, a = biquad_peaking(SR, 2000.0, 6.0, 1.0)
        w, h = freqz(b, a, worN=[2 * np.pi * 2000.0 / SR])
        assert 20 * np.log10(abs(h[0])) == pytest.approx(6.0, abs=0.01)


class TestSpecAugment:
    def test_disabled_config_is_identity(self, rng):
        feats = extract_features(make_plane_wave(0, 0, 6 * LABEL_HOP, rng=rng))
        cfg = SpecAugmentConfig(n_time_masks=0, n_freq_masks=0, channel_mask_prob=0.0)
        out = spec_augment_mc(feats, rng, cfg)
        assert np.array_equal(out.maps, feats.maps)

    def test_single_time_mask_width(self, rng):
        maps = np.ones((3, 50, 20))
        feats = FeatureTensor(maps=maps, layout=("amp0", "amp1", "ipd1"))
        cfg = SpecAugmentConfig(n_time_masks=1, max_time_width=8,
                                n_freq_masks=0, channel_mask_prob=0.0)
        out = spec_augment_mc(feats, np.random.default_rng(3), cfg)
        zero_cols = np.where(np.all(out.maps == 0.0, axis=(0, 2)))[0]
        assert 0 < len(zero_cols) <= 8
        assert np.array_equal(zero_cols, np.arange(zero_cols[0], zero_cols[-1] + 1))

    def test_masked_zero_unmasked_bit_identical(self, rng):
        feats = extract_features(make_plane_wave(30, 0, 6 * LABEL_HOP, rng=rng))
        out = spec_augment_mc(feats, np.random.default_rng(11), SpecAugmentConfig())
        changed = out.maps != feats.maps
        assert np.all(out.maps[changed] == 0.0)
        assert np.array_equal(out.maps[~changed], feats.maps[~changed])

    def test_never_increases_magnitude(self, rng):
        feats = extract_features(make_plane_wave(0, 45, 6 * LABEL_HOP, rng=rng))
        for seed in range(5):
            out = spec_augment_mc(feats, np.random.default_rng(seed),
                                  SpecAugmentConfig(channel_mask_prob=0.5))
            assert np.all(np.abs(out.maps) <= np.abs(feats.maps) + 1e-15)

    def test_channel_mask_hits_whole_channel(self, rng):
        feats = extract_features(make_plane_wave(10, 10, 6 * LABEL_HOP, rng=rng))
        cfg = SpecAugmentConfig(n_time_masks=0, n_freq_masks=0, channel_mask_prob=1.0)
        out = spec_augment_mc(feats, np.random.default_rng(0), cfg)
        masked = [i for i, tag in enumerate(feats.layout)
                  if np.all(out.maps[i] == 0.0) and np.any(feats.maps[i] != 0.0)]
        assert masked
        channels = {feats.layout[i][-1] for i in masked}
        assert len(channels) == 1
