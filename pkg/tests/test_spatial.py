import numpy as np
import pytest

from conftest import make_plane_wave, random_events
from seldkit.accdoa import AccdoaGrid, encode_labels
from seldkit.core import ConfigurationError, Event, EventList, ValidationError, angular_distance
from seldkit.spatial import (
    discrete_rotation_set,
    parse_rotation_flag,
    rotate_foa,
    rotate_grid,
    rotate_labels,
    tta_average,
    yaw_rotation,
)


class TestRotateFoa:
    def test_identity(self, rng):
        clip = make_plane_wave(40, 10, 2400, rng=rng)
        out = rotate_foa(clip, np.eye(3))
        assert np.array_equal(out.samples, clip.samples)

    def test_yaw_90_matches_direct_synthesis(self, rng):
        signal = rng.standard_normal(2400)
        clip0 = make_plane_wave(0, 0, 2400, signal=signal)
        clip90 = make_plane_wave(90, 0, 2400, signal=signal)
        rotated = rotate_foa(clip0, yaw_rotation(90.0))
        assert np.max(np.abs(rotated.samples - clip90.samples)) < 1e-6

    def test_dipole_energy_preserved(self, rng):
        clip = make_plane_wave(-75, 33, 2400, rng=rng)
        for matrix in discrete_rotation_set():
            out = rotate_foa(clip, matrix)
            before = np.sum(clip.samples[[1, 2, 3]] ** 2, axis=0)
            after = np.sum(out.samples[[1, 2, 3]] ** 2, axis=0)
            assert np.max(np.abs(before - after)) < 1e-9
            assert np.array_equal(out.samples[0], clip.samples[0])

    def test_composition(self, rng):
        clip = make_plane_wave(120, -20, 1200, rng=rng)
        r1 = yaw_rotation(90.0)
        r2 = np.diag([1.0, 1.0, -1.0])
        double = rotate_foa(rotate_foa(clip, r1), r2)
        combined = rotate_foa(clip, r2 @ r1)
        assert np.max(np.abs(double.samples - combined.samples)) < 1e-6

    def test_non_orthogonal_rejected(self, rng):
        clip = make_plane_wave(0, 0, 100, rng=rng)
        with pytest.raises(ValidationError):
            rotate_foa(clip, np.diag([2.0, 1.0, 1.0]))


class TestRotateLabels:
    def test_identity(self):
        events = EventList(events=(Event(1, 2, 0, 30, -40),), class_count=12)
        assert rotate_labels(events, np.eye(3)) == events

    def test_yaw_90(self):
        events = EventList(events=(Event(0, 0, 0, 0, 0),), class_count=12)
        out = rotate_labels(events, yaw_rotation(90.0))
        assert out.events[0].azimuth == 90
        assert out.events[0].elevation == 0

    def test_z_flip(self):
        events = EventList(events=(Event(0, 0, 0, 10, 30),), class_count=12)
        out = rotate_labels(events, np.diag([1.0, 1.0, -1.0]))
        assert out.events[0].elevation == -30
        assert out.events[0].azimuth == 10


class TestDiscreteSet:
    def test_sixteen_distinct_orthogonal(self):
        mats = discrete_rotation_set()
        assert len(mats) == 16
        seen = set()
        for m in mats:
            assert np.allclose(m.T @ m, np.eye(3), atol=1e-12)
            assert abs(abs(np.linalg.det(m)) - 1.0) < 1e-12
            seen.add(tuple(np.rint(m).astype(int).ravel()))
        assert len(seen) == 16

    def test_contains_identity(self):
        assert any(np.array_equal(m, np.eye(3)) for m in discrete_rotation_set())

    def test_closed_under_z_flip(self):
        mats = discrete_rotation_set()
        keys = {tuple(np.rint(m).astype(int).ravel()) for m in mats}
        flip = np.diag([1.0, 1.0, -1.0])
        for m in mats:
            assert tuple(np.rint(m @ flip).astype(int).ravel()) in keys

    def test_label_and_grid_rotation_commute_within_quantization(self, rng):
        events = random_events(rng, frames=12, density=0.1)
        grid = encode_labels(events, frames=12, classes=12)
        for matrix in discrete_rotation_set():
            from_labels = encode_labels(rotate_labels(events, matrix),
                                        frames=12, classes=12)
            from_grid = rotate_grid(grid, matrix)
            active = np.linalg.norm(from_grid.vectors, axis=-1) > 0.5
            a = from_labels.vectors[active]
            b = from_grid.vectors[active]
            assert np.all(angular_distance(a, b) <= 1.0)


class TestTta:
    def test_identity_only_is_model_output(self, rng):
        clip = make_plane_wave(10, 5, 2400, rng=rng)
        fixed = rng.standard_normal((6, 12, 3))

        def model(c):
            return AccdoaGrid(vectors=fixed + c.samples[0, 0])

        out = tta_average(model, clip, [np.eye(3)])
        assert np.array_equal(out.vectors, model(clip).vectors)

    def test_equivariant_model_recovers_fixed_vector(self, rng):
        # model reports the clip's plane-wave direction via the dipole/omni
        # correlation, i.e. it is exactly equivariant to scene rotations
        signal = rng.standard_normal(2400)
        clip = make_plane_wave(25, -10, 2400, signal=signal)

        def model(c):
            w = c.samples[0]
            denom = np.dot(w, w)
            direction = np.array([
                np.dot(c.samples[3], w), np.dot(c.samples[1], w),
                np.dot(c.samples[2], w),
            ]) / denom
            return AccdoaGrid(vectors=np.tile(direction, (4, 12, 1)))

        base = model(clip)
        averaged = tta_average(model, clip, discrete_rotation_set())
        assert np.max(np.abs(averaged.vectors - base.vectors)) < 1e-9

    def test_average_norm_bounded_by_max(self, rng):
        clip = make_plane_wave(0, 0, 2400, rng=rng)
        per_rotation = {}

        def model(c):
            g = np.random.default_rng(int(abs(c.samples[1, 7]) * 1e6) % 2**31)
            out = g.standard_normal((3, 12, 3))
            per_rotation[len(per_rotation)] = out
            return AccdoaGrid(vectors=out)

        rotations = discrete_rotation_set()[:4]
        averaged = tta_average(model, clip, rotations)
        max_norm = max(np.linalg.norm(v, axis=-1).max() for v in per_rotation.values())
        assert np.linalg.norm(averaged.vectors, axis=-1).max() <= max_norm + 1e-12

    def test_empty_rotation_list_rejected(self, rng):
        clip = make_plane_wave(0, 0, 100, rng=rng)
        with pytest.raises(ValidationError):
            tta_average(lambda c: AccdoaGrid(vectors=np.zeros((1, 1, 3))), clip, [])


class TestRotationFlag:
    def test_selectors(self):
        assert len(parse_rotation_flag("all16")) == 16
        assert np.array_equal(parse_rotation_flag("identity")[0], np.eye(3))
        subset = parse_rotation_flag("list:0,3,7")
        assert len(subset) == 3

    def test_bad_selectors(self):
        for text in ("everything", "list:", "list:99", "list:a"):
            with pytest.raises(ConfigurationError):
                parse_rotation_flag(text)
