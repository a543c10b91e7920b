"""Rigid-sphere array model, spherical harmonics, and mode strengths.

The array is a rigid sphere with pressure capsules on its surface. A far-
field plane wave arriving from direction ``s`` produces capsule pressure

    p(q) = sum_n b_n(ka) sum_m Y_nm(dir_q) Y_nm(s)

with real orthonormal spherical harmonics and the rigid-sphere mode
strength ``b_n(ka) = 4 pi i^n (j_n(ka) - j_n'(ka)/h_n'(ka) h_n(ka))``
using second-kind spherical Hankel functions, which pairs with the
``exp(-i 2 pi f tau)`` delay convention of the RFFT synthesis used here
(verified causal: shadow-side capsules lag, bright-side capsules lead).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from math import factorial

import numpy as np
from scipy.special import lpmv, spherical_jn, spherical_yn

from ..core import ValidationError, azel_to_vec

DEFAULT_SPHERE_RADIUS_M = 0.042
DEFAULT_SH_ORDER = 4


@dataclass(frozen=True)
class ArrayModel:
    """Rigid-sphere capsule array: radius, capsule directions, encoding order."""

    radius: float
    capsule_dirs: np.ndarray  # (Q, 3) unit vectors
    sh_order: int = DEFAULT_SH_ORDER

    def __post_init__(self):
        dirs = np.asarray(self.capsule_dirs, dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[1] != 3:
            raise ValidationError(f"capsule_dirs must be (Q, 3), got {dirs.shape}")
        norms = np.linalg.norm(dirs, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValidationError("capsule directions must be unit vectors")
        needed = (self.sh_order + 1) ** 2
        if dirs.shape[0] < needed:
            raise ValidationError(
                f"need >= {needed} capsules for order {self.sh_order}, got {dirs.shape[0]}"
            )
        if len(np.unique(np.round(dirs, 9), axis=0)) != dirs.shape[0]:
            raise ValidationError("capsule directions must be distinct")
        if self.radius <= 0:
            raise ValidationError("sphere radius must be positive")
        object.__setattr__(self, "capsule_dirs", dirs)

    @property
    def n_capsules(self) -> int:
        return self.capsule_dirs.shape[0]

    @classmethod
    def default_32(cls, radius: float = DEFAULT_SPHERE_RADIUS_M,
                   sh_order: int = DEFAULT_SH_ORDER) -> "ArrayModel":
        """The standard 32-capsule rigid-sphere layout shipped with the package."""
        with resources.files("seldkit.data").joinpath("capsules32.csv").open() as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
        az = np.array([float(r[0]) for r in rows])
        el = np.array([float(r[1]) for r in rows])
        return cls(radius=radius, capsule_dirs=azel_to_vec(az, el), sh_order=sh_order)


def rigid_sphere_mode_strength(order: int, ka) -> np.ndarray:
    """Mode strength b_n(ka) of a plane wave on a rigid sphere (complex)."""
    ka = np.atleast_1d(np.asarray(ka, dtype=np.float64))
    out = np.zeros(ka.shape, dtype=np.complex128)
    small = ka < 1e-9
    if np.any(small):
        out[small] = 4.0 * np.pi if order == 0 else 0.0
    if np.any(~small):
        x = ka[~small]
        jn = spherical_jn(order, x)
        jnp = spherical_jn(order, x, derivative=True)
        yn = spherical_yn(order, x)
        ynp = spherical_yn(order, x, derivative=True)
        h2 = jn - 1j * yn
        h2p = jnp - 1j * ynp
        out[~small] = 4.0 * np.pi * (1j**order) * (jn - (jnp / h2p) * h2)
    return out


def _dirs_to_angles(dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(azimuth, colatitude) in radians for unit direction vectors."""
    az = np.arctan2(dirs[..., 1], dirs[..., 0])
    colat = np.arccos(np.clip(dirs[..., 2], -1.0, 1.0))
    return az, colat


def real_sh_matrix(order: int, dirs) -> np.ndarray:
    """Real orthonormal spherical harmonics in ACN order, shape (Q, (order+1)^2).

    First-order components are proportional to (y, z, x), so ACN indices
    1..3 line up with the FOA dipole convention.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    az, colat = _dirs_to_angles(dirs)
    cos_colat = np.cos(colat)
    out = np.empty((dirs.shape[0], (order + 1) ** 2))
    idx = 0
    for n in range(order + 1):
        for m in range(-n, n + 1):
            ma = abs(m)
            norm = np.sqrt((2 * n + 1) / (4.0 * np.pi)
                           * factorial(n - ma) / factorial(n + ma))
            leg = lpmv(ma, n, cos_colat)  # includes Condon-Shortley phase
            if m == 0:
                out[:, idx] = norm * leg
            elif m > 0:
                out[:, idx] = np.sqrt(2.0) * (-1.0) ** ma * norm * leg * np.cos(ma * az)
            else:
                out[:, idx] = np.sqrt(2.0) * (-1.0) ** ma * norm * leg * np.sin(ma * az)
            idx += 1
    return out


def sh_order_of_index(acn: np.ndarray) -> np.ndarray:
    """Spherical-harmonic degree n for ACN component indices."""
    return np.floor(np.sqrt(np.asarray(acn))).astype(int)
