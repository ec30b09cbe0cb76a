"""Minkowski four-vectors and rank-2 tensors, signature (+,-,-,-).

Four-vectors are plain ``numpy`` arrays whose last axis has length 4 and
holds contravariant components; leading axes broadcast.  Rank-2 tensors are
arrays with trailing shape ``(4, 4)``, both indices up unless a function says
otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FrameError, InvariantError

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
_SIGN = np.array([1.0, -1.0, -1.0, -1.0])

TOL_FLOOR = 1e-14


def four_vector(components) -> np.ndarray:
    v = np.asarray(components, dtype=float)
    if v.shape[-1] != 4:
        raise ValueError(f"expected trailing dimension 4, got shape {v.shape}")
    return v


def lower(v: np.ndarray) -> np.ndarray:
    """Lower the (single) index of a four-vector."""
    return np.asarray(v, dtype=float) * _SIGN


raise_index = lower  # eta is its own inverse


def lower_tensor(t: np.ndarray) -> np.ndarray:
    """Lower both indices of a rank-2 tensor."""
    t = np.asarray(t, dtype=float)
    return t * _SIGN[:, None] * _SIGN[None, :]


raise_tensor = lower_tensor


def dot(a, b) -> np.ndarray | float:
    """Minkowski product a^0 b^0 - a.b (broadcasts over leading axes)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] - np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def norm2(v) -> np.ndarray | float:
    return dot(v, v)


def outer(a, b) -> np.ndarray:
    return np.asarray(a, dtype=float)[..., :, None] * np.asarray(b, dtype=float)[..., None, :]


def scale_of(t) -> float:
    """Magnitude used for relative tolerances: largest |entry|, floored."""
    return max(float(np.max(np.abs(t))) if np.size(t) else 0.0, TOL_FLOOR)


def check_tensor(t, symmetric=False, antisymmetric=False, rtol=1e-12) -> np.ndarray:
    """Validate a declared (anti)symmetric tensor and return it as an array."""
    t = np.asarray(t, dtype=float)
    if t.shape[-2:] != (4, 4):
        raise ValueError(f"expected trailing shape (4, 4), got {t.shape}")
    tol = rtol * scale_of(t)
    tt = np.swapaxes(t, -1, -2)
    if symmetric and np.max(np.abs(t - tt)) > tol:
        raise InvariantError("symmetry", f"max |t - t^T| = {np.max(np.abs(t - tt)):.3e}")
    if antisymmetric and np.max(np.abs(t + tt)) > tol:
        raise InvariantError("antisymmetry", f"max |t + t^T| = {np.max(np.abs(t + tt)):.3e}")
    return t


@dataclass(frozen=True)
class Boost:
    """Proper orthochronous Lorentz transformation acting on contravariant vectors."""

    matrix: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", lam)
        resid = np.max(np.abs(lam.T @ ETA @ lam - ETA))
        if resid > 1e-12 * max(1.0, scale_of(lam) ** 2):
            raise InvariantError("lorentz", f"|L^T eta L - eta| = {resid:.3e}")
        if lam[0, 0] < 1.0 - 1e-12 or np.linalg.det(lam) < 0:
            raise InvariantError("proper-orthochronous")

    @classmethod
    def from_velocity(cls, v) -> "Boost":
        """Boost into a frame moving with 3-velocity ``v`` (|v| < 1)."""
        v = np.asarray(v, dtype=float)
        v2 = float(v @ v)
        if v2 >= 1.0:
            raise FrameError(f"superluminal frame velocity |v|^2 = {v2}")
        lam = np.eye(4)
        if v2 == 0.0:
            return cls(lam)
        g = 1.0 / np.sqrt(1.0 - v2)
        lam[0, 0] = g
        lam[0, 1:] = lam[1:, 0] = -g * v
        lam[1:, 1:] += (g - 1.0) * np.outer(v, v) / v2
        return cls(lam)

    @classmethod
    def from_rapidity(cls, rapidity: float, axis=(1.0, 0.0, 0.0)) -> "Boost":
        n = np.asarray(axis, dtype=float)
        n = n / np.linalg.norm(n)
        ch, sh = np.cosh(rapidity), np.sinh(rapidity)
        lam = np.eye(4)
        lam[0, 0] = ch
        lam[0, 1:] = lam[1:, 0] = -sh * n
        lam[1:, 1:] += (ch - 1.0) * np.outer(n, n)
        return cls(lam)

    def __call__(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.matrix.T

    def __matmul__(self, other: "Boost") -> "Boost":
        return Boost(self.matrix @ other.matrix)

    def inverse(self) -> "Boost":
        # L^{-1} = eta L^T eta
        return Boost(ETA @ self.matrix.T @ ETA)


def boost_to_rest(w) -> Boost:
    """Boost taking the timelike vector ``w`` to (sqrt(w.w), 0, 0, 0)."""
    w = four_vector(w)
    w2 = float(norm2(w))
    if not w2 > 0.0 or w[0] <= 0.0:
        raise FrameError(f"frame vector must be future timelike, got w.w = {w2:.6g}, w^0 = {w[0]:.6g}")
    return Boost.from_velocity(w[1:] / w[0])


def transform_tensor(boost: Boost, t) -> np.ndarray:
    """Contravariant law L t L^T (broadcasts over leading axes of ``t``)."""
    lam = boost.matrix
    return lam @ np.asarray(t, dtype=float) @ lam.T


def unit_timelike(rapidity: float, direction=(1.0, 0.0, 0.0)) -> np.ndarray:
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    return np.concatenate([[np.cosh(rapidity)], np.sinh(rapidity) * n])


def random_boost(rng: np.random.Generator, max_rapidity: float = 3.0) -> Boost:
    """Boost along a uniformly random axis with rapidity uniform in [0, max_rapidity]."""
    axis = rng.normal(size=3)
    return Boost.from_rapidity(rng.uniform(0.0, max_rapidity), axis)


def on_shell(p_spatial, m) -> np.ndarray:
    """Future mass-shell four-momentum for spatial momentum ``p_spatial``."""
    ps = np.asarray(p_spatial, dtype=float)
    p0 = np.sqrt(m * m + np.sum(ps * ps, axis=-1))
    return np.concatenate([np.asarray(p0)[..., None], ps], axis=-1)
