import logging

import numpy as np
import pytest

from conftest import random_events
from seldkit.accdoa import (
    AccdoaGrid,
    Einv2Output,
    decode,
    einv2_to_accdoa,
    encode_labels,
    mse_loss,
    read_einv2,
    read_grid,
    write_einv2,
    write_grid,
)
from seldkit.core import Event, EventList, ValidationError, azel_to_vec


def _events(*rows, class_count=12):
    return EventList(events=tuple(Event(*r) for r in rows), class_count=class_count)


class TestEncode:
    def test_single_event(self):
        grid = encode_labels(_events((5, 2, 0, 0, 0)), frames=8, classes=12)
        assert np.allclose(grid.vectors[5, 2], (1, 0, 0))
        other = np.delete(grid.vectors.reshape(-1, 3), 5 * 12 + 2, axis=0)
        assert np.all(other == 0.0)

    def test_empty_list(self):
        grid = encode_labels(_events(), frames=4, classes=12)
        assert np.all(grid.vectors == 0.0)

    def test_same_class_collision_keeps_lowest_track(self, caplog):
        events = _events((3, 1, 0, 90, 0), (3, 1, 1, -90, 0))
        with caplog.at_level(logging.WARNING):
            grid = encode_labels(events, frames=5, classes=12)
        assert np.allclose(grid.vectors[3, 1], azel_to_vec(90, 0))
        assert any("collision" in r.message for r in caplog.records)

    def test_frame_out_of_range(self):
        with pytest.raises(ValidationError):
            encode_labels(_events((9, 0, 0, 0, 0)), frames=5, classes=12)

    def test_norm_invariant(self, rng):
        events = random_events(rng, frames=30)
        grid = encode_labels(events, frames=30, classes=12)
        assert grid.norms().max() <= 1.0 + 1e-3


class TestDecode:
    def test_active_above_threshold(self):
        vectors = np.zeros((1, 12, 3))
        vectors[0, 3] = (0.5, 0, 0)
        events = decode(AccdoaGrid(vectors=vectors), threshold=0.4)
        assert events.events == (Event(0, 3, 0, 0, 0),)

    def test_inactive_below_threshold(self):
        vectors = np.zeros((1, 12, 3))
        vectors[0, 3] = (0.2, 0, 0)
        assert len(decode(AccdoaGrid(vectors=vectors), threshold=0.3)) == 0

    def test_round_trip(self, rng):
        for _ in range(100):
            events = random_events(rng, frames=20, density=0.2)
            grid = encode_labels(events, frames=20, classes=12)
            for threshold in (0.3, 0.4):
                assert decode(grid, threshold) == events

    def test_monotone_in_threshold(self, rng):
        vectors = rng.standard_normal((15, 12, 3)) * 0.5
        grid = AccdoaGrid(vectors=vectors)
        sizes = [len(decode(grid, th)) for th in (0.1, 0.2, 0.3, 0.5, 0.8)]
        assert sizes == sorted(sizes, reverse=True)

    def test_bad_threshold(self):
        with pytest.raises(ValidationError):
            decode(AccdoaGrid(vectors=np.zeros((1, 2, 3))), threshold=0.0)


class TestMseLoss:
    def test_identical_grids(self, rng):
        grid = AccdoaGrid(vectors=rng.standard_normal((6, 12, 3)))
        assert mse_loss(grid, grid) == 0.0

    def test_single_unit_vector_on_1x1_grid(self):
        target = AccdoaGrid(vectors=azel_to_vec(37.0, -12.0).reshape(1, 1, 3))
        zero = AccdoaGrid(vectors=np.zeros((1, 1, 3)))
        assert mse_loss(zero, target) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_non_negative_and_symmetric(self, rng):
        a = AccdoaGrid(vectors=rng.standard_normal((5, 4, 3)))
        b = AccdoaGrid(vectors=rng.standard_normal((5, 4, 3)))
        assert mse_loss(a, b) >= 0.0
        assert mse_loss(a, b) == pytest.approx(mse_loss(b, a), abs=1e-15)

    def test_shape_mismatch(self):
        a = AccdoaGrid(vectors=np.zeros((2, 3, 3)))
        b = AccdoaGrid(vectors=np.zeros((2, 4, 3)))
        with pytest.raises(ValidationError):
            mse_loss(a, b)


class TestEinv2:
    def test_hand_example(self):
        sed = np.zeros((1, 2, 12))
        doa = np.zeros((1, 2, 3))
        sed[0, 0, 5] = 0.8
        doa[0, 0] = (1, 0, 0)
        sed[0, 1, 5] = 0.3
        doa[0, 1] = (0, 1, 0)
        grid = einv2_to_accdoa(Einv2Output(sed=sed, doa=doa))
        assert np.allclose(grid.vectors[0, 5], (0.8, 0, 0))

    def test_all_zero_sed(self):
        out = Einv2Output(sed=np.zeros((3, 2, 12)), doa=np.zeros((3, 2, 3)))
        assert np.all(einv2_to_accdoa(out).vectors == 0.0)

    def test_single_track_is_outer_product(self, rng):
        sed = rng.uniform(0, 1, size=(4, 1, 12))
        doa = rng.standard_normal((4, 1, 3))
        grid = einv2_to_accdoa(Einv2Output(sed=sed, doa=doa))
        assert np.allclose(grid.vectors, sed[:, 0, :, None] * doa[:, 0, None, :])

    def test_permutation_invariance(self, rng):
        sed = rng.uniform(0, 1, size=(6, 3, 12))
        doa = rng.standard_normal((6, 3, 3))
        grid = einv2_to_accdoa(Einv2Output(sed=sed, doa=doa))
        perm = [2, 0, 1]
        permuted = einv2_to_accdoa(Einv2Output(sed=sed[:, perm], doa=doa[:, perm]))
        assert np.allclose(grid.vectors, permuted.vectors)

    def test_sed_range_validated(self):
        with pytest.raises(ValidationError):
            Einv2Output(sed=np.full((1, 1, 2), 1.5), doa=np.zeros((1, 1, 3)))


class TestGridIO:
    def test_grid_round_trip(self, tmp_path, rng):
        grid = AccdoaGrid(vectors=rng.standard_normal((7, 12, 3)).astype(np.float32),
                          frame_rate=10.0)
        path = tmp_path / "g.accdoa"
        write_grid(grid, path)
        back = read_grid(path)
        assert back.frame_rate == 10.0
        assert np.array_equal(back.vectors, grid.vectors)

    def test_einv2_round_trip(self, tmp_path, rng):
        out = Einv2Output(sed=rng.uniform(0, 1, (5, 3, 12)).astype(np.float32),
                          doa=rng.standard_normal((5, 3, 3)).astype(np.float32))
        path = tmp_path / "o.einv2"
        write_einv2(out, path)
        back = read_einv2(path)
        assert np.array_equal(back.sed, out.sed)
        assert np.array_equal(back.doa, out.doa)
