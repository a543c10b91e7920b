"""STFT analysis/synthesis, input features, and fast convolution.

Default analysis settings follow the dataset rate: 20 ms frames (480
samples at 24 kHz), 10 ms hop (240 samples), periodic Hann window, FFT
size 512 (next power of two, zero-padded). Signals are reflect-padded by
half a frame at both ends so frame ``t`` is centered at ``t * hop``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .core import ConfigurationError, FoaClip, FormatError, ValidationError

DEFAULT_FRAME_LEN = 480
DEFAULT_HOP = 240


@dataclass(frozen=True)
class SpectralTensor:
    """Complex STFT coefficients, shape (channels, frames, bins)."""

    data: np.ndarray
    frame_len: int
    hop: int
    sample_rate: int
    n_samples: int
    window: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValidationError(f"expected (channels, frames, bins), got {self.data.shape}")
        nfft = _fft_size(self.frame_len)
        if self.data.shape[2] != nfft // 2 + 1:
            raise ValidationError(
                f"bins {self.data.shape[2]} inconsistent with frame length {self.frame_len}"
            )

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]

    @property
    def bin_freqs(self) -> np.ndarray:
        return np.fft.rfftfreq(_fft_size(self.frame_len), 1.0 / self.sample_rate)


@dataclass(frozen=True)
class FeatureTensor:
    """Real feature maps, shape (maps, frames, bins), with per-map layout tags."""

    maps: np.ndarray
    layout: tuple[str, ...]

    def __post_init__(self):
        if self.maps.ndim != 3:
            raise ValidationError(f"expected (maps, frames, bins), got {self.maps.shape}")
        if len(self.layout) != self.maps.shape[0]:
            raise ValidationError(
                f"layout has {len(self.layout)} tags for {self.maps.shape[0]} maps"
            )


def _fft_size(frame_len: int) -> int:
    return 1 << (frame_len - 1).bit_length()


def _window(name, frame_len: int) -> np.ndarray:
    if isinstance(name, np.ndarray):
        if name.size != frame_len:
            raise ConfigurationError("window length does not match frame length")
        return name.astype(np.float64)
    return get_window(name, frame_len, fftbins=True).astype(np.float64)


def stft(clip, frame_len: int = DEFAULT_FRAME_LEN, hop: int = DEFAULT_HOP,
         window="hann", sample_rate: int | None = None) -> SpectralTensor:
    """Multichannel STFT of a FoaClip or a (channels, n) array.

    Frame count is ``floor(n_padded - frame_len) / hop + 1`` where the input
    is reflect-padded by ``frame_len // 2`` on both ends. A clip shorter than
    one frame yields an empty tensor.
    """
    if isinstance(clip, FoaClip):
        x = clip.samples
        sample_rate = clip.sample_rate
    else:
        x = np.atleast_2d(np.asarray(clip, dtype=np.float64))
        if sample_rate is None:
            raise ConfigurationError("sample_rate required for raw arrays")
    if not frame_len >= hop > 0:
        raise ConfigurationError(f"need frame_len >= hop > 0, got {frame_len}, {hop}")
    win = _window(window, frame_len)
    nfft = _fft_size(frame_len)
    n = x.shape[1]
    pad = frame_len // 2
    if n < frame_len:
        data = np.zeros((x.shape[0], 0, nfft // 2 + 1), dtype=np.complex128)
        return SpectralTensor(data, frame_len, hop, int(sample_rate), n, win)
    xp = np.pad(x, ((0, 0), (pad, pad)), mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(xp, frame_len, axis=1)[:, ::hop]
    data = np.fft.rfft(frames * win, n=nfft, axis=-1)
    return SpectralTensor(data, frame_len, hop, int(sample_rate), n, win)


def istft(spec: SpectralTensor) -> np.ndarray:
    """Weighted overlap-add synthesis; inverse of :func:`stft` in the interior.

    Raises ConfigurationError when the window/hop pair leaves synthesis gaps.
    """
    win = spec.window
    frame_len, hop = spec.frame_len, spec.hop
    if hop > frame_len:
        raise ConfigurationError("hop larger than frame length cannot reconstruct")
    nfft = _fft_size(frame_len)
    frames = np.fft.irfft(spec.data, n=nfft, axis=-1)[..., :frame_len]
    n_frames = spec.n_frames
    pad = frame_len // 2
    total = spec.n_samples + 2 * pad
    out = np.zeros((spec.data.shape[0], max(total, frame_len + hop * max(n_frames - 1, 0))))
    norm = np.zeros(out.shape[1])
    for t in range(n_frames):
        sl = slice(t * hop, t * hop + frame_len)
        out[:, sl] += frames[:, t] * win
        norm[sl] += win**2
    interior = norm[pad:pad + spec.n_samples]
    if interior.size and interior.max() > 0 and interior.min() < 1e-8 * interior.max():
        raise ConfigurationError("window/hop pair does not satisfy overlap-add coverage")
    norm = np.maximum(norm, 1e-12)
    out /= norm
    return out[:, pad:pad + spec.n_samples]


def amplitude(spec: SpectralTensor) -> FeatureTensor:
    """Per-channel amplitude spectrograms ``|x[t, f, p]|``."""
    mags = np.abs(spec.data)
    tags = tuple(f"amp{p}" for p in range(spec.n_channels))
    return FeatureTensor(maps=mags, layout=tags)


def ipd(spec: SpectralTensor, ref_channel: int = 0) -> FeatureTensor:
    """Inter-channel phase differences against a reference channel.

    One map per non-reference channel q, each ``angle(x_ref) - angle(x_q)``
    wrapped to (-pi, pi].
    """
    if spec.n_channels < 2:
        raise ValidationError("IPD needs at least 2 channels")
    ref = spec.data[ref_channel]
    maps, tags = [], []
    for q in range(spec.n_channels):
        if q == ref_channel:
            continue
        maps.append(np.angle(ref * np.conj(spec.data[q])))
        tags.append(f"ipd{q}")
    return FeatureTensor(maps=np.stack(maps), layout=tuple(tags))


def cos_sin_ipd(spec: SpectralTensor, ref_channel: int = 0) -> FeatureTensor:
    """Cosine and sine of every IPD map (wrap-free phase features)."""
    phases = ipd(spec, ref_channel)
    maps = np.concatenate([np.cos(phases.maps), np.sin(phases.maps)])
    tags = tuple(f"cos{t}" for t in phases.layout) + tuple(f"sin{t}" for t in phases.layout)
    return FeatureTensor(maps=maps, layout=tags)


def pcen(amplitude_features: FeatureTensor, s: float = 0.04, alpha: float = 0.98,
         delta: float = 2.0, r: float = 0.5, eps: float = 1e-6) -> FeatureTensor:
    """Per-channel energy normalization of amplitude maps.

    Uses a first-order IIR smoother over frames, ``M[t] = (1-s) M[t-1] + s E[t]``
    with ``M[0] = E[0]``, and returns ``(E / (eps + M)**alpha + delta)**r - delta**r``.
    """
    if not 0.0 < s <= 1.0:
        raise ConfigurationError(f"smoother coefficient must be in (0, 1], got {s}")
    if min(alpha, delta, r, eps) <= 0:
        raise ConfigurationError("pcen parameters must be positive")
    energy = amplitude_features.maps
    smooth = np.empty_like(energy)
    if energy.shape[1]:
        smooth[:, 0] = energy[:, 0]
        for t in range(1, energy.shape[1]):
            smooth[:, t] = (1.0 - s) * smooth[:, t - 1] + s * energy[:, t]
    out = (energy / (eps + smooth) ** alpha + delta) ** r - delta**r
    tags = tuple(t.replace("amp", "pcen", 1) for t in amplitude_features.layout)
    return FeatureTensor(maps=out, layout=tags)


def fft_convolve(signal, kernel) -> np.ndarray:
    """Full linear convolution via overlap-save partitioned FFT.

    Returns a length ``len(signal) + len(kernel) - 1`` array, matching direct
    convolution to floating-point accuracy.
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    h = np.asarray(kernel, dtype=np.float64).ravel()
    if x.size == 0 or h.size == 0:
        raise ValidationError("convolution inputs must be non-empty")
    if h.size > x.size:
        x, h = h, x
    tap = h.size
    n_out = x.size + tap - 1
    nfft = 1 << max(6, (4 * tap - 1).bit_length())
    step = nfft - (tap - 1)
    kernel_f = np.fft.rfft(h, nfft)
    n_blocks = -(-n_out // step)
    padded = np.zeros(tap - 1 + n_blocks * step + nfft)
    padded[tap - 1:tap - 1 + x.size] = x
    blocks = np.lib.stride_tricks.sliding_window_view(padded, nfft)[::step][:n_blocks]
    conv = np.fft.irfft(np.fft.rfft(blocks, axis=-1) * kernel_f, n=nfft, axis=-1)
    return conv[:, tap - 1:tap - 1 + step].reshape(-1)[:n_out]


def extract_features(clip: FoaClip, kind: str = "amp_ipd", log_amplitude: bool = False,
                     frame_len: int = DEFAULT_FRAME_LEN, hop: int = DEFAULT_HOP,
                     pcen_kwargs: dict | None = None) -> FeatureTensor:
    """Standard model-input feature stacks.

    ``amp_ipd`` stacks four amplitude maps and three IPD maps; ``pcen_ipd``
    stacks four PCEN maps with cosine/sine IPD maps. ``log_amplitude``
    switches the amplitude maps to log1p compression (tagged ``logamp``).
    """
    spec = stft(clip, frame_len=frame_len, hop=hop)
    amps = amplitude(spec)
    if kind == "amp_ipd":
        first = amps
        if log_amplitude:
            first = FeatureTensor(
                maps=np.log1p(amps.maps),
                layout=tuple(t.replace("amp", "logamp", 1) for t in amps.layout),
            )
        rest = ipd(spec)
    elif kind == "pcen_ipd":
        first = pcen(amps, **(pcen_kwargs or {}))
        rest = cos_sin_ipd(spec)
    else:
        raise ConfigurationError(f"unknown feature kind {kind!r}")
    return FeatureTensor(
        maps=np.concatenate([first.maps, rest.maps]),
        layout=first.layout + rest.layout,
    )


# ---------------------------------------------------------------------------
# Feature dump format: little-endian float32 with a self-describing header.

_FEATURE_MAGIC = b"SKFT"
_FEATURE_VERSION = 1


def write_features(features: FeatureTensor, path) -> None:
    layout_bytes = ",".join(features.layout).encode("utf-8")
    m, t, k = features.maps.shape
    with open(path, "wb") as fh:
        fh.write(_FEATURE_MAGIC)
        fh.write(struct.pack("<HHIIH", _FEATURE_VERSION, m, t, k, len(layout_bytes)))
        fh.write(layout_bytes)
        fh.write(np.ascontiguousarray(features.maps, dtype="<f4").tobytes())


def read_features(path) -> FeatureTensor:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _FEATURE_MAGIC:
            raise FormatError(f"{path}: not a feature dump (magic {magic!r})")
        version, m, t, k, layout_len = struct.unpack("<HHIIH", fh.read(14))
        if version != _FEATURE_VERSION:
            raise ConfigurationError(f"{path}: unsupported feature format version {version}")
        layout = tuple(fh.read(layout_len).decode("utf-8").split(",")) if layout_len else ()
        data = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
    if data.size != m * t * k:
        raise ValidationError(f"{path}: truncated feature payload")
    return FeatureTensor(maps=data.reshape(m, t, k), layout=layout)
