"""Embedded invariant suite for the ``selftest`` subcommand.

Fast sanity checks over the core numerical paths; each check prints one
PASS/FAIL line. Returns True when everything passes.
"""

from __future__ import annotations

import numpy as np

from . import accdoa, dsp, ensemble, spatial
from .core import Event, EventList, FoaClip, angular_distance, azel_to_vec, vec_to_azel
from .metrics import EvalConfig, evaluate


def _checks():
    rng = np.random.default_rng(20210703)

    def azel_round_trip():
        vecs = rng.standard_normal((200, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        az, el = vec_to_azel(vecs)
        back = azel_to_vec(az, el)
        return np.max(np.abs(back - vecs)) < 1e-5

    def stft_round_trip():
        x = rng.standard_normal((4, 9600))
        clip = FoaClip(samples=x, sample_rate=24000)
        rec = dsp.istft(dsp.stft(clip))
        return np.max(np.abs(rec[:, 480:-480] - x[:, 480:-480])) < 1e-6

    def accdoa_round_trip():
        events = EventList(events=(Event(3, 2, 0, 45, -30),), class_count=12)
        grid = accdoa.encode_labels(events, frames=10, classes=12)
        return accdoa.decode(grid, 0.3) == events and accdoa.decode(grid, 0.4) == events

    def rotation_set_sane():
        mats = spatial.discrete_rotation_set()
        if len(mats) != 16:
            return False
        flat = {tuple(np.rint(m).astype(int).ravel()) for m in mats}
        orth = all(np.allclose(m.T @ m, np.eye(3), atol=1e-12) for m in mats)
        return len(flat) == 16 and orth

    def stitch_identity():
        grid = accdoa.AccdoaGrid(vectors=rng.standard_normal((40, 12, 3)))
        out = ensemble.stitch_windows([(0, grid)], 40)
        return np.array_equal(out.vectors, grid.vectors)

    def metrics_perfect():
        events = EventList(events=(Event(0, 1, 0, 10, 5), Event(1, 1, 0, 10, 5)),
                           class_count=12)
        er, f, le, lr = evaluate(events, events, EvalConfig())
        return (er, f, le, lr) == (0.0, 1.0, 0.0, 1.0)

    def distance_basics():
        a = azel_to_vec(0, 0)
        return (abs(angular_distance(a, a)) < 1e-12
                and abs(angular_distance(a, azel_to_vec(90, 0)) - 90) < 1e-9
                and abs(angular_distance(a, azel_to_vec(-180, 0)) - 180) < 1e-9)

    return [
        ("azimuth/elevation round trip", azel_round_trip),
        ("stft/istft round trip", stft_round_trip),
        ("accdoa encode/decode round trip", accdoa_round_trip),
        ("discrete rotation set", rotation_set_sane),
        ("window stitch identity", stitch_identity),
        ("metrics on identical lists", metrics_perfect),
        ("angular distance basics", distance_basics),
    ]


def run_selftest(out=print) -> bool:
    ok = True
    for name, check in _checks():
        try:
            passed = bool(check())
        except Exception as exc:  # pragma: no cover - defensive
            passed = False
            out(f"FAIL {name}: {exc}")
            ok = False
            continue
        out(f"{'PASS' if passed else 'FAIL'} {name}")
        ok = ok and passed
    return ok
