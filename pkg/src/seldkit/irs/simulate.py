"""Room impulse response synthesis for FOA output.

Two paths produce 4-channel FOA RIRs for each source in a RoomSpec:

* the rigid-sphere path simulates capsule pressure signals on the sphere
  (every image source contributing a scattered far-field plane wave), then
  encodes them to first order via a spherical-harmonic transform with
  regularized radial equalization;
* the direct path encodes every image source analytically to FOA — no
  sphere, no capsule step — which is cheap and serves as a cross-check.

Synthesis happens on the RFFT grid with exact fractional delays
(``exp(-i 2 pi f d / c)``); RIR length is the next power of two covering
the latest image arrival plus tail room.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..core import ConfigurationError, ValidationError, vec_to_azel
from .room import (
    MAX_IMAGE_ORDER,
    RoomSpec,
    auto_max_order,
    image_source_positions,
    sabine_absorption,
)
from .sphere import ArrayModel, real_sh_matrix, rigid_sphere_mode_strength, sh_order_of_index

logger = logging.getLogger(__name__)

RIR_TAIL_SAMPLES = 256
DEFAULT_MAX_GAIN_DB = 60.0
_IMAGE_CHUNK = 512


@dataclass(frozen=True)
class FoaRirSet:
    """Per-source 4-channel FOA impulse responses plus ground-truth DOAs."""

    rirs: np.ndarray  # (n_sources, 4, length)
    doas: np.ndarray  # (n_sources, 3) unit vectors, array -> source
    sample_rate: int

    def __post_init__(self):
        rirs = np.asarray(self.rirs, dtype=np.float64)
        doas = np.atleast_2d(np.asarray(self.doas, dtype=np.float64))
        if rirs.ndim != 3 or rirs.shape[1] != 4:
            raise ValidationError(f"rirs must be (sources, 4, length), got {rirs.shape}")
        if doas.shape != (rirs.shape[0], 3):
            raise ValidationError("one DOA vector per source required")
        if not np.all(np.isfinite(rirs)):
            raise ValidationError("RIR contains non-finite values")
        object.__setattr__(self, "rirs", rirs)
        object.__setattr__(self, "doas", doas)

    @property
    def n_sources(self) -> int:
        return self.rirs.shape[0]

    def doa_degrees(self) -> list[tuple[float, float]]:
        return [tuple(map(float, vec_to_azel(d))) for d in self.doas]


def _resolve_max_order(room: RoomSpec, max_order) -> tuple[int, float]:
    alpha = sabine_absorption(room.dims, room.rt60)
    beta = float(np.sqrt(1.0 - alpha))
    if max_order == "auto" or max_order is None:
        order = auto_max_order(beta)
    else:
        order = int(max_order)
        if order < 0 or order > MAX_IMAGE_ORDER:
            raise ConfigurationError(
                f"max_order must be in [0, {MAX_IMAGE_ORDER}], got {order}"
            )
    return order, beta


def _image_geometry(room: RoomSpec, source_idx: int, order: int, beta: float):
    """Distances, delays, amplitudes, and arrival directions of all images."""
    positions, counts = image_source_positions(
        room.dims, room.source_positions[source_idx], order
    )
    rel = positions - room.array_pos
    dist = np.linalg.norm(rel, axis=1)
    dist = np.maximum(dist, 1e-3)
    dirs = rel / dist[:, None]
    amp = beta ** counts.astype(np.float64) / dist
    delay = dist / room.speed_of_sound
    return dirs, amp, delay


def _rir_length(max_delay_s: float, sample_rate: int) -> int:
    need = int(np.ceil(max_delay_s * sample_rate)) + RIR_TAIL_SAMPLES
    return 1 << (need - 1).bit_length()


def _sh_spectrum(dirs, amp, delay, freqs, sh_order: int) -> np.ndarray:
    """Accumulated spherical-harmonic spectrum sum_img amp e^{-i w tau} Y(dir).

    Shape ((sh_order+1)^2, n_freqs); chunked over images to bound memory.
    """
    n_comp = (sh_order + 1) ** 2
    out = np.zeros((n_comp, freqs.size), dtype=np.complex128)
    for start in range(0, len(amp), _IMAGE_CHUNK):
        sl = slice(start, start + _IMAGE_CHUNK)
        phases = np.exp(-2j * np.pi * delay[sl, None] * freqs[None, :])
        phases *= amp[sl, None]
        out += real_sh_matrix(sh_order, dirs[sl]).T @ phases
    return out


def simulate_capsule_rirs(room: RoomSpec, array: ArrayModel, max_order="auto",
                          sample_rate: int = 24000) -> np.ndarray:
    """Capsule-domain RIRs on the rigid sphere, shape (sources, Q, length).

    Each image source contributes a plane wave scattered by the sphere; the
    wave field is expanded to the array's spherical-harmonic order, so the
    capsule signals are consistent with the later encoding step.
    """
    order, beta = _resolve_max_order(room, max_order)
    geometry = [_image_geometry(room, src, order, beta) for src in range(room.n_sources)]
    length = _rir_length(max(delay.max() for _, _, delay in geometry), sample_rate)
    freqs = np.fft.rfftfreq(length, 1.0 / sample_rate)
    ka = 2.0 * np.pi * freqs * array.radius / room.speed_of_sound
    degree = sh_order_of_index(np.arange((array.sh_order + 1) ** 2))
    mode = np.stack([rigid_sphere_mode_strength(n, ka) for n in range(array.sh_order + 1)])
    capsule_sh = real_sh_matrix(array.sh_order, array.capsule_dirs)
    rirs = []
    for dirs, amp, delay in geometry:
        coeffs = _sh_spectrum(dirs, amp, delay, freqs, array.sh_order)
        spectra = capsule_sh @ (mode[degree] * coeffs)
        rirs.append(np.fft.irfft(spectra, n=length, axis=-1))
    return np.stack(rirs)


def encode_foa(capsule_rirs: np.ndarray, array: ArrayModel,
               max_gain_db: float = DEFAULT_MAX_GAIN_DB,
               sample_rate: int = 24000,
               speed_of_sound: float = 343.0) -> np.ndarray:
    """Encode one source's capsule RIRs (Q, length) to a 4-channel FOA RIR.

    Capsule spectra are projected onto spherical harmonics with the
    pseudoinverse of the sampling matrix, radial equalization divides each
    degree by its mode strength through a regularized inverse whose boost is
    soft-limited at ``max_gain_db``, and degrees 0..1 are rescaled to the
    SN3D ACN [W, Y, Z, X] convention.
    """
    capsule_rirs = np.asarray(capsule_rirs, dtype=np.float64)
    if capsule_rirs.ndim != 2 or capsule_rirs.shape[0] != array.n_capsules:
        raise ValidationError(
            f"expected ({array.n_capsules}, length) capsule RIRs, got {capsule_rirs.shape}"
        )
    length = capsule_rirs.shape[1]
    capsule_sh = real_sh_matrix(array.sh_order, array.capsule_dirs)
    cond = np.linalg.cond(capsule_sh)
    if cond > 1e6:
        raise ConfigurationError(
            f"capsule sampling matrix is ill-conditioned (cond {cond:.1e})"
        )
    spectra = np.fft.rfft(capsule_rirs, axis=-1)
    coeffs = np.linalg.pinv(capsule_sh) @ spectra
    freqs = np.fft.rfftfreq(length, 1.0 / sample_rate)
    ka = 2.0 * np.pi * freqs * array.radius / speed_of_sound
    limit = 10.0 ** (-max_gain_db / 20.0)
    for n in (0, 1):
        mode = rigid_sphere_mode_strength(n, ka)
        lam = np.abs(mode).max() * limit
        inverse = np.conj(mode) / (np.abs(mode) ** 2 + lam**2)
        sl = slice(n**2, (n + 1) ** 2)
        coeffs[sl] *= inverse
    # orthonormal -> SN3D: W = sqrt(4 pi) c00; dipoles = sqrt(4 pi / 3) c1m
    w = np.sqrt(4.0 * np.pi) * coeffs[0]
    dip = np.sqrt(4.0 * np.pi / 3.0) * coeffs[1:4]
    foa = np.vstack([w[None, :], dip])  # ACN rows already [W, Y, Z, X]
    return np.fft.irfft(foa, n=length, axis=-1)


def simulate_foa_rirs(room: RoomSpec, array: ArrayModel | None = None,
                      mode: str = "eigenmike", max_order="auto",
                      sample_rate: int = 24000,
                      max_gain_db: float = DEFAULT_MAX_GAIN_DB) -> FoaRirSet:
    """FOA RIRs for every source in the room.

    ``mode`` selects the rigid-sphere capsule pipeline (``eigenmike``) or the
    analytic first-order fast path (``direct-foa``).
    """
    if mode == "eigenmike":
        if array is None:
            array = ArrayModel.default_32()
        capsule_sets = simulate_capsule_rirs(room, array, max_order, sample_rate)
        foa = np.stack([
            encode_foa(capsule_sets[src], array, max_gain_db, sample_rate,
                       room.speed_of_sound)
            for src in range(room.n_sources)
        ])
    elif mode == "direct-foa":
        order, beta = _resolve_max_order(room, max_order)
        geometry = [_image_geometry(room, src, order, beta)
                    for src in range(room.n_sources)]
        length = _rir_length(max(delay.max() for _, _, delay in geometry), sample_rate)
        freqs = np.fft.rfftfreq(length, 1.0 / sample_rate)
        out = []
        for dirs, amp, delay in geometry:
            # SN3D plane-wave encoding: W = 1, dipoles = (y, z, x)
            gains = np.column_stack([
                np.ones(len(amp)), dirs[:, 1], dirs[:, 2], dirs[:, 0]
            ])
            spectra = np.zeros((4, freqs.size), dtype=np.complex128)
            for start in range(0, len(amp), _IMAGE_CHUNK):
                sl = slice(start, start + _IMAGE_CHUNK)
                phases = np.exp(-2j * np.pi * delay[sl, None] * freqs[None, :])
                phases *= amp[sl, None]
                spectra += gains[sl].T @ phases
            out.append(np.fft.irfft(spectra, n=length, axis=-1))
        foa = np.stack(out)
    else:
        raise ConfigurationError(f"unknown simulation mode {mode!r}")
    return FoaRirSet(rirs=foa, doas=room.source_doas(), sample_rate=sample_rate)
