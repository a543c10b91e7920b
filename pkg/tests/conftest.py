import numpy as np
import pytest

from seldkit.core import Event, EventList, FoaClip, azel_to_vec


def make_plane_wave(az_deg, el_deg, n_samples, sample_rate=24000, signal=None,
                    rng=None) -> FoaClip:
    """FOA clip of a far-field plane wave from the given direction.

    SN3D encoding of a single plane wave: W carries the signal, the dipole
    channels carry it scaled by the direction components (ACN [W, Y, Z, X]).
    """
    if signal is None:
        rng = rng or np.random.default_rng(0)
        signal = rng.standard_normal(n_samples)
    x, y, z = azel_to_vec(az_deg, el_deg)
    samples = np.stack([signal, y * signal, z * signal, x * signal])
    return FoaClip(samples=samples, sample_rate=sample_rate)


def random_events(rng, frames, class_count=12, density=0.15, el_limit=89):
    """Random single-track event list: at most one event per (frame, class)."""
    events = []
    for frame in range(frames):
        for class_id in range(class_count):
            if rng.random() < density:
                az = int(rng.integers(-180, 180))
                el = int(rng.integers(-el_limit, el_limit + 1))
                events.append(Event(frame, class_id, 0, az, el))
    return EventList(events=tuple(events), class_count=class_count)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
