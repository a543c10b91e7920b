"""Shoebox room model: sampling, image-source enumeration, decay analysis.

Reverberation targets map to a uniform per-wall absorption through
Sabine's formula ``alpha = 0.161 V / (S RT60)`` (clamped below 1); image
sources are enumerated with the classic mirrored-lattice construction and
attenuated by ``sqrt(1 - alpha)`` per wall reflection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import SamplingError, ValidationError

SPEED_OF_SOUND = 343.0
WALL_MARGIN_M = 0.1
MAX_IMAGE_ORDER = 30


@dataclass(frozen=True)
class RoomSpec:
    """Box room with one array position, source positions, and a target RT60."""

    dims: np.ndarray  # (3,) meters
    rt60: float  # seconds
    array_pos: np.ndarray  # (3,) meters
    source_positions: np.ndarray  # (n_sources, 3) meters
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        dims = np.asarray(self.dims, dtype=np.float64)
        array_pos = np.asarray(self.array_pos, dtype=np.float64)
        sources = np.atleast_2d(np.asarray(self.source_positions, dtype=np.float64))
        if dims.shape != (3,) or np.any(dims <= 0):
            raise ValidationError(f"bad room dimensions {dims}")
        if self.rt60 <= 0:
            raise ValidationError(f"RT60 must be positive, got {self.rt60}")
        for name, pos in [("array", array_pos[None, :]), ("source", sources)]:
            if np.any(pos < WALL_MARGIN_M) or np.any(pos > dims - WALL_MARGIN_M):
                raise ValidationError(f"{name} position violates {WALL_MARGIN_M} m wall margin")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "array_pos", array_pos)
        object.__setattr__(self, "source_positions", sources)

    @property
    def n_sources(self) -> int:
        return self.source_positions.shape[0]

    def source_doas(self) -> np.ndarray:
        """Unit vectors from the array toward each source."""
        rel = self.source_positions - self.array_pos
        return rel / np.linalg.norm(rel, axis=1, keepdims=True)


@dataclass(frozen=True)
class RoomSamplerConfig:
    rt60_range: tuple[float, float] = (0.1, 0.5)
    length_range: tuple[float, float] = (4.0, 7.0)
    width_range: tuple[float, float] = (3.0, 6.0)
    height_range: tuple[float, float] = (2.5, 3.5)
    n_sources: int = 1
    array_margin: float = 1.0
    source_margin: float = 0.5
    min_source_distance: float = 0.5
    max_attempts: int = 100

    def __post_init__(self):
        for name in ("rt60_range", "length_range", "width_range", "height_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValidationError(f"bad {name}: ({lo}, {hi})")


def sample_room(rng: np.random.Generator,
                config: RoomSamplerConfig = RoomSamplerConfig()) -> RoomSpec:
    """Draw a random room; reproducible from the generator state.

    Positions are rejection-sampled inside margin-shrunk bounds; failure to
    place all sources within the attempt budget raises SamplingError.
    """
    rt60 = rng.uniform(*config.rt60_range)
    dims = np.array([
        rng.uniform(*config.length_range),
        rng.uniform(*config.width_range),
        rng.uniform(*config.height_range),
    ])
    lo = np.full(3, config.array_margin)
    hi = dims - config.array_margin
    if np.any(hi <= lo):
        raise SamplingError(f"room {dims} too small for array margin {config.array_margin}")
    array_pos = rng.uniform(lo, hi)
    s_lo = np.full(3, config.source_margin)
    s_hi = dims - config.source_margin
    sources = []
    for _ in range(config.n_sources):
        for _attempt in range(config.max_attempts):
            cand = rng.uniform(s_lo, s_hi)
            if np.linalg.norm(cand - array_pos) >= config.min_source_distance:
                sources.append(cand)
                break
        else:
            raise SamplingError(
                f"could not place source after {config.max_attempts} attempts"
            )
    return RoomSpec(dims=dims, rt60=rt60, array_pos=array_pos,
                    source_positions=np.array(sources))


def sabine_absorption(dims, rt60: float) -> float:
    """Uniform wall absorption for a target RT60, clamped below 1."""
    dims = np.asarray(dims, dtype=np.float64)
    volume = float(np.prod(dims))
    surface = 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2])
    return min(0.161 * volume / (surface * rt60), 0.99)


def auto_max_order(reflection_coeff: float, cap: int = MAX_IMAGE_ORDER) -> int:
    """Reflection order beyond which image amplitudes fall 60 dB below direct."""
    if reflection_coeff <= 0.0:
        return 0
    if reflection_coeff >= 1.0:
        return cap
    return min(cap, int(np.ceil(-3.0 / np.log10(reflection_coeff))))


def image_source_positions(dims, source, max_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Mirrored-lattice image positions and per-image total reflection counts.

    Along each axis the images are ``2 m L + (1 - 2 p) s`` for integer m and
    p in {0, 1}, contributing ``|m - p| + |m|`` wall reflections; triples are
    kept when the summed count is at most ``max_order``.
    """
    dims = np.asarray(dims, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    m_max = max_order // 2 + 1
    m = np.arange(-m_max, m_max + 1)
    axis_pos, axis_ord = [], []
    for axis in range(3):
        mm, pp = np.meshgrid(m, np.array([0, 1]), indexing="ij")
        pos = 2.0 * mm * dims[axis] + (1 - 2 * pp) * source[axis]
        order = np.abs(mm - pp) + np.abs(mm)
        keep = order.ravel() <= max_order
        axis_pos.append(pos.ravel()[keep])
        axis_ord.append(order.ravel()[keep])
    ox, oy, oz = np.meshgrid(axis_ord[0], axis_ord[1], axis_ord[2], indexing="ij")
    total = ox + oy + oz
    keep = total <= max_order
    px, py, pz = np.meshgrid(axis_pos[0], axis_pos[1], axis_pos[2], indexing="ij")
    positions = np.stack([px[keep], py[keep], pz[keep]], axis=1)
    return positions, total[keep].astype(np.int64)


def schroeder_t60(rir, sample_rate: int, fit_db: tuple[float, float] = (-5.0, -25.0)) -> float:
    """Backward-integrated decay time, extrapolated from a least-squares fit.

    Fits the Schroeder curve between the two dB levels (default -5..-25) and
    scales the slope to a 60 dB decay.
    """
    h = np.asarray(rir, dtype=np.float64).ravel()
    energy = np.cumsum(h[::-1] ** 2)[::-1]
    if energy[0] <= 0:
        raise ValidationError("impulse response carries no energy")
    curve = 10.0 * np.log10(np.maximum(energy / energy[0], 1e-30))
    hi_level, lo_level = fit_db
    start = int(np.argmax(curve <= hi_level))
    stop = int(np.argmax(curve <= lo_level))
    if stop <= start:
        raise ValidationError("decay range too short for the requested fit levels")
    t = np.arange(len(h), dtype=np.float64) / sample_rate
    coeffs = np.polyfit(t[start:stop + 1], curve[start:stop + 1], 1)
    slope = coeffs[0]
    if slope >= 0:
        raise ValidationError("non-decaying Schroeder curve")
    return float(-60.0 / slope)
