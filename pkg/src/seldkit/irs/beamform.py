"""Mask-based beamforming for source-signal extraction.

A two-component complex Gaussian mixture (target / everything else) is
fitted per frequency bin to the segment's STFT vectors by EM with a free
per-frame scale, the target steering is taken as the principal eigenvector
of the target component's covariance, and the distortionless minimum-
variance weights ``w = R_n^{-1} h / (h^H R_n^{-1} h)`` extract a mono
signal referenced to the omni channel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..core import FoaClip, ValidationError, azel_to_vec
from ..dsp import istft, stft
from .segments import SegmentCandidate

logger = logging.getLogger(__name__)

MIN_BEAMFORM_FRAMES = 10
_COV_REG = 1e-6


@dataclass(frozen=True)
class CgmmFit:
    """Per-frequency two-component mixture fit."""

    covariances: np.ndarray  # (F, 2, C, C), component 0 seeded as target
    weights: np.ndarray  # (F, 2) mixture weights
    posteriors: np.ndarray  # (F, T, 2)
    log_likelihoods: np.ndarray  # one value per EM iteration


@dataclass(frozen=True)
class BeamformResult:
    signal: np.ndarray  # mono samples
    weights: np.ndarray  # (F, C) MVDR weights
    steering: np.ndarray  # (F, C) steering vectors (unit W reference)
    log_likelihoods: np.ndarray
    fallback_bins: int


def cgmm_em(observations: np.ndarray, iters: int = 20,
            init_covariances: np.ndarray | None = None,
            reg: float = _COV_REG) -> CgmmFit:
    """Fit the two-component scaled complex Gaussian mixture per frequency.

    ``observations`` has shape (F, T, C). Each iteration updates, in order,
    the per-frame scales (their conditional maximum given the covariances),
    the posteriors, the covariances, and the mixture weights; the data
    log-likelihood is recorded once per iteration and is non-decreasing up
    to the small covariance regularization.
    """
    x = np.asarray(observations, dtype=np.complex128)
    if x.ndim != 3:
        raise ValidationError(f"expected (freqs, frames, channels), got {x.shape}")
    n_freq, n_frames, n_ch = x.shape
    if init_covariances is None:
        cov0 = np.einsum("ftc,ftd->fcd", x, np.conj(x)) / max(n_frames, 1)
        eigvals, eigvecs = np.linalg.eigh(cov0)
        top = eigvecs[..., -1]
        target = np.einsum("fc,fd->fcd", top, np.conj(top)) * eigvals[..., -1][:, None, None]
        trace = np.einsum("fcc->f", target).real
        target = target + (reg * trace + 1e-12)[:, None, None] * np.eye(n_ch)
        power = np.maximum(np.einsum("fcc->f", cov0).real / n_ch, 1e-12)
        noise = power[:, None, None] * np.eye(n_ch)[None]
        covariances = np.stack([target, noise.astype(np.complex128)], axis=1)
    else:
        covariances = np.array(init_covariances, dtype=np.complex128)
        if covariances.shape != (n_freq, 2, n_ch, n_ch):
            raise ValidationError(
                f"init covariances must be (F, 2, C, C), got {covariances.shape}"
            )
    weights = np.full((n_freq, 2), 0.5)
    lls = np.empty(iters)
    posteriors = np.full((n_freq, n_frames, 2), 0.5)
    for it in range(iters):
        inv = np.linalg.inv(covariances)
        quad = np.einsum("ftc,fkcd,ftd->ftk", np.conj(x), inv, x).real
        quad = np.maximum(quad, 1e-30)
        scale = quad / n_ch  # conditional ML per-frame scale
        _sign, logdet = np.linalg.slogdet(covariances)
        log_density = (-n_ch * np.log(np.pi) - n_ch * np.log(scale)
                       - logdet.real[:, None, :] - n_ch)
        log_joint = log_density + np.log(np.maximum(weights[:, None, :], 1e-300))
        peak = log_joint.max(axis=-1, keepdims=True)
        log_norm = peak[..., 0] + np.log(np.exp(log_joint - peak).sum(axis=-1))
        lls[it] = float(log_norm.sum())
        posteriors = np.exp(log_joint - log_norm[..., None])
        mass = posteriors.sum(axis=1)  # (F, 2)
        new_cov = np.einsum("ftk,ftc,ftd->fkcd", posteriors / scale, x, np.conj(x))
        new_cov /= np.maximum(mass, 1e-12)[:, :, None, None]
        trace = np.einsum("fkcc->fk", new_cov).real
        covariances = new_cov + (reg * trace + 1e-14)[:, :, None, None] * np.eye(n_ch)
        weights = mass / n_frames
    return CgmmFit(covariances=covariances, weights=weights,
                   posteriors=posteriors, log_likelihoods=lls)


def _labeled_steering(candidate: SegmentCandidate) -> np.ndarray:
    """FOA steering [W, Y, Z, X] of the candidate's labeled direction."""
    x, y, z = azel_to_vec(candidate.azimuth, candidate.elevation)
    vec = np.array([1.0, y, z, x])
    return vec / np.linalg.norm(vec)


def cgmm_mvdr(clip: FoaClip, candidate: SegmentCandidate, iters: int = 20,
              frame_len: int = 480, hop: int = 240) -> BeamformResult:
    """Extract the candidate's mono source signal from its clip span.

    The mixture's target component is seeded from the candidate's labeled
    direction (the omnidirectional component catches everything else); after
    EM the component whose principal eigenvector best matches the labeled
    steering is used for the distortionless constraint, the other supplies
    the noise covariance. Bins where a component collapses fall back to the
    omni channel.
    """
    span = clip.samples[:, candidate.start_sample:candidate.end_sample]
    spec = stft(span, frame_len=frame_len, hop=hop, sample_rate=clip.sample_rate)
    if spec.n_frames < MIN_BEAMFORM_FRAMES:
        raise ValidationError(
            f"segment has {spec.n_frames} frames, need >= {MIN_BEAMFORM_FRAMES}"
        )
    x = spec.data.transpose(2, 1, 0)  # (F, T, C)
    n_freq, n_frames, n_ch = x.shape
    steer_label = _labeled_steering(candidate)
    power = np.maximum((np.abs(x) ** 2).mean(axis=(1, 2)), 1e-12)
    target0 = power[:, None, None] * np.einsum("c,d->cd", steer_label,
                                               np.conj(steer_label))[None]
    target0 = target0 + (_COV_REG * power + 1e-14)[:, None, None] * np.eye(n_ch)
    noise0 = power[:, None, None] * np.eye(n_ch)[None]
    init = np.stack([target0.astype(np.complex128), noise0.astype(np.complex128)], axis=1)
    fit = cgmm_em(x, iters=iters, init_covariances=init)

    eigvals, eigvecs = np.linalg.eigh(fit.covariances)
    principals = eigvecs[..., -1]  # (F, 2, C)
    match = np.abs(np.einsum("fkc,c->fk", principals, np.conj(steer_label)))
    target_comp = int(np.argmax(match.mean(axis=0)))
    noise_comp = 1 - target_comp

    degenerate = (fit.weights.min(axis=1) < 1e-4) | (
        eigvals[:, noise_comp, -1].real <= 1e-20
    )
    steering = principals[:, target_comp, :].copy()
    w_ref = steering[:, 0]
    safe = np.abs(w_ref) > 1e-8
    degenerate |= ~safe
    steering[safe] = steering[safe] / w_ref[safe, None]

    weights_out = np.zeros((n_freq, n_ch), dtype=np.complex128)
    ok = ~degenerate
    if np.any(ok):
        noise_cov = fit.covariances[ok, noise_comp]
        h = steering[ok]
        num = np.einsum("fcd,fd->fc", np.linalg.inv(noise_cov), h)
        den = np.einsum("fc,fc->f", np.conj(h), num).real
        weights_out[ok] = num / np.maximum(den, 1e-20)[:, None]
    fallback = int(np.count_nonzero(degenerate))
    if fallback:
        logger.warning("cgmm_mvdr: %d/%d bins fell back to omni passthrough",
                       fallback, n_freq)
        weights_out[degenerate, 0] = 1.0
        steering[degenerate] = 0.0
        steering[degenerate, 0] = 1.0

    beamformed = np.einsum("fc,ctf->tf", np.conj(weights_out), spec.data)
    mono_spec = type(spec)(
        data=beamformed[None, :, :],
        frame_len=spec.frame_len, hop=spec.hop,
        sample_rate=spec.sample_rate, n_samples=spec.n_samples, window=spec.window,
    )
    signal = istft(mono_spec)[0]
    return BeamformResult(signal=signal, weights=weights_out, steering=steering,
                          log_likelihoods=fit.log_likelihoods, fallback_bins=fallback)
