"""Momentum-space diffusion tensor, friction drift and noise factorization.

Every function broadcasts over leading axes of the momentum array, so the
same code serves single phase points and whole ensembles.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import minkowski as mk
from .errors import InvalidBathError, InvariantError, OffShellError
from .spectral import BathParams


class AccuracyWarning(RuntimeWarning):
    pass


def _mass2(p):
    p2 = mk.norm2(p)
    if np.any(~(p2 > 0)):
        raise OffShellError("momentum must be timelike (p.p > 0)")
    return p2


def projector(p) -> np.ndarray:
    """P^{mu nu} = eta^{mu nu} - p^mu p^nu / p^2."""
    p = mk.four_vector(p)
    p2 = _mass2(p)
    return mk.ETA - mk.outer(p, p) / np.asarray(p2)[..., None, None]


def c_tensor(p, bath: BathParams) -> np.ndarray:
    """C_{sigma rho} (lower indices) whose projection P C P is the diffusion tensor."""
    p = mk.four_vector(p)
    p2 = _mass2(p)
    wl = mk.lower(bath.w)
    pw2 = mk.dot(p, bath.w) ** 2 / p2
    eta = np.broadcast_to(mk.ETA, p.shape[:-1] + (4, 4))
    return (2.0 * bath.pi_eps - (bath.eps + bath.pi_eps) * np.asarray(pw2)[..., None, None]) * eta \
        - (bath.eps + bath.pi_eps) * np.outer(wl, wl)


def alpha_array(p, bath: BathParams) -> np.ndarray:
    """alpha^{mu nu}(p) as a bare array, no invariant checks."""
    p = mk.four_vector(p)
    p2 = np.asarray(_mass2(p))[..., None, None]
    w = bath.w
    pw = np.asarray(mk.dot(p, w))[..., None, None]
    wp = mk.outer(w, p)
    bracket = pw**2 * mk.ETA - pw * (wp + np.swapaxes(wp, -1, -2)) + p2 * np.outer(w, w)
    a = 2.0 * bath.pi_eps * (mk.ETA - mk.outer(p, p) / p2) - (bath.eps + bath.pi_eps) * bracket / p2
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class DiffusionTensor:
    alpha: np.ndarray
    p: np.ndarray
    w: np.ndarray
    bath: BathParams

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.alpha)


def verify_alpha(a, p, bath: BathParams):
    """Raise InvariantError if symmetry, degeneracy or positivity fails."""
    a = np.asarray(a)
    scale = mk.scale_of(a)
    if np.any(a != np.swapaxes(a, -1, -2)):
        raise InvariantError("symmetry")
    deg = np.max(np.abs(np.einsum("...m,...mn->...n", mk.lower(p), a)))
    pscale = max(float(np.max(np.abs(p))), mk.TOL_FLOOR)
    if deg > 1e-12 * scale * pscale:
        raise InvariantError("degeneracy", f"max |p_mu alpha^mu nu| = {deg:.3e}")
    if bath.eps >= bath.pi_eps >= 0:
        lo = np.min(np.linalg.eigvalsh(a))
        if lo < -1e-10 * scale:
            raise InvariantError("positivity", f"min eigenvalue {lo:.3e}")


def alpha(p, bath: BathParams) -> DiffusionTensor:
    """Diffusion tensor at momentum ``p`` with all invariants verified."""
    p = mk.four_vector(p)
    a = alpha_array(p, bath)
    verify_alpha(a, p, bath)
    return DiffusionTensor(a, p.copy(), bath.w.copy(), bath)


def quadratic_form(a, p, bath: BathParams) -> np.ndarray | float:
    """a_mu a_nu alpha^{mu nu}; ``a`` is given by its contravariant components."""
    al = mk.lower(a)
    return np.einsum("...m,...mn,...n->...", al, alpha_array(p, bath), al)


def hat_w(p, w) -> np.ndarray:
    """P^{mu nu} w_nu = w^mu - (p.w) p^mu / p^2."""
    p = mk.four_vector(p)
    p2 = _mass2(p)
    return w - (np.asarray(mk.dot(p, w)) / p2)[..., None] * p


def friction_drift(p, bath: BathParams) -> np.ndarray:
    """Friction drift +lam P w (flux-zero convention) or its negative (paper-eq56)."""
    return bath.signed_friction * hat_w(p, bath.w)


def alpha_divergence(p, bath: BathParams, h=None) -> tuple[np.ndarray, np.ndarray]:
    """(d_nu alpha^{nu mu})(p) by central differences with one Richardson level.

    Returns the extrapolated divergence and the error estimate
    ``|D(h/2) - D(h)| / 3`` (the leading error of the half-step difference).
    """
    p = mk.four_vector(p)
    if h is None:
        # off-shell excursions change p^2 by ~2 p0 h; keep that small against p^2
        mass = np.sqrt(_mass2(p))
        big = np.maximum(mass, np.max(np.abs(p), axis=-1))
        h = 1e-4 * mass * np.minimum(1.0, mass / big)
    h = np.asarray(h, dtype=float)[..., None]

    def central(step):
        d = np.zeros(p.shape)
        for nu in range(4):
            e = np.zeros(4)
            e[nu] = 1.0
            ap = alpha_array(p + step * e, bath)
            am = alpha_array(p - step * e, bath)
            d += (ap[..., nu, :] - am[..., nu, :]) / (2.0 * step)
        return d

    d1 = central(h)
    d2 = central(h / 2.0)
    return (4.0 * d2 - d1) / 3.0, np.abs(d2 - d1) / 3.0


def alpha_divergence_exact(p, bath: BathParams) -> np.ndarray:
    """Closed form [(eps - 5 pi) p + 2 (eps + pi)(p.w) w] / p^2 of the divergence."""
    p = mk.four_vector(p)
    p2 = np.asarray(_mass2(p))[..., None]
    s = np.asarray(mk.dot(p, bath.w))[..., None]
    return ((bath.eps - 5.0 * bath.pi_eps) * p + 2.0 * (bath.eps + bath.pi_eps) * s * bath.w) / p2


def ito_drift(p, bath: BathParams, h=None, warn: bool = True, method: str = "fd") -> np.ndarray:
    """Ito drift (d_nu alpha^{nu mu}) + friction; the momentum generator in first-order form.

    ``method="fd"`` differentiates alpha numerically; ``"exact"`` uses the closed
    form, which stays accurate when p0 >> m where p^2 suffers cancellation.
    """
    if method == "exact":
        return alpha_divergence_exact(p, bath) + friction_drift(p, bath)
    if method != "fd":
        raise ValueError(f"unknown divergence method {method!r}")
    div, err = alpha_divergence(p, bath, h)
    drift = div + friction_drift(p, bath)
    if warn:
        mag = np.max(np.abs(drift), axis=-1)
        if np.any(np.max(err, axis=-1) > 1e-6 * np.maximum(mag, mk.scale_of(bath.eps))):
            warnings.warn("finite-difference step too large for the Ito drift", AccuracyWarning, stacklevel=2)
    return drift


def _shell_frame_terms(p, bath: BathParams):
    """Quantities of the closed-form square root of alpha.

    In the rest frame of u = p/m, alpha restricted to the spatial block is
    (eps - pi) n n^T + c (1 - n n^T) with c = (eps + pi) gamma^2 - 2 pi,
    gamma = u.w and n the direction of w seen from u.
    """
    p = mk.four_vector(p)
    m = np.sqrt(_mass2(p))
    u = p / m[..., None]
    w = bath.w
    gam = np.asarray(mk.dot(u, w))
    us = u[..., 1:]
    # spatial part of w in the rest frame of u
    v = w[1:] - us * w[0] + us * (np.sum(us * w[1:], -1) / (1.0 + u[..., 0]))[..., None]
    c = np.maximum((bath.eps + bath.pi_eps) * gam**2 - 2.0 * bath.pi_eps, 0.0)
    lo = math.sqrt(max(bath.eps - bath.pi_eps, 0.0))
    rc = np.sqrt(c)
    den = lo + rc
    # sqrt(M) = rc I - k v v^T, smooth as gamma -> 1
    k = np.where(den > 0, (bath.eps + bath.pi_eps) / np.where(den > 0, den, 1.0), 0.0)
    return u, v, rc, k


def _boost_spatial(u, y):
    """Apply the pure boost taking (1,0,0,0) to u to the spatial vector (0, y)."""
    us = u[..., 1:]
    uy = np.sum(us * y, -1)
    out = np.empty(y.shape[:-1] + (4,))
    out[..., 0] = uy
    out[..., 1:] = y + us * (uy / (1.0 + u[..., 0]))[..., None]
    return out


def noise_apply(p, bath: BathParams, xi) -> np.ndarray:
    """sigma xi for the closed-form factor with sigma sigma^T = 2 alpha; xi has shape (..., 3)."""
    u, v, rc, k = _shell_frame_terms(p, bath)
    xi = np.asarray(xi, dtype=float)
    y = rc[..., None] * xi - (k * np.sum(v * xi, -1))[..., None] * v
    return math.sqrt(2.0) * _boost_spatial(u, y)


def noise_closed_form(p, bath: BathParams) -> np.ndarray:
    """The matrix behind ``noise_apply``, shape (..., 4, 3)."""
    p = mk.four_vector(p)
    cols = [noise_apply(p, bath, np.broadcast_to(e, p.shape[:-1] + (3,))) for e in np.eye(3)]
    return np.stack(cols, -1)


@dataclass(frozen=True)
class NoiseFactor:
    sigma: np.ndarray
    eigenvalues: np.ndarray
    clamped: np.ndarray


def noise_matrix(a, clamp_rtol: float = 1e-12, fail_rtol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Batched factor sigma (..., 4, 3) with sigma sigma^T = 2 alpha, and the eigenvalues used.

    The smallest eigenvalue belongs to the null direction p_mu and is dropped.
    """
    a2 = 2.0 * np.asarray(a)
    lam, vec = np.linalg.eigh(a2)
    scale = np.max(np.abs(a2), axis=(-1, -2), keepdims=False)
    scale = np.maximum(scale, mk.TOL_FLOOR)
    if np.any(lam[..., 0] < -fail_rtol * scale):
        raise InvalidBathError(f"diffusion tensor is indefinite (eigenvalue {np.min(lam[..., 0]):.3e})")
    lam = np.where(lam < clamp_rtol * scale[..., None], 0.0, lam)
    sigma = vec[..., :, 1:] * np.sqrt(lam[..., None, 1:])
    return sigma, lam


def noise_factor(dt: DiffusionTensor) -> NoiseFactor:
    """Eigen-factorization of 2 alpha restricted to its non-zero channels."""
    a2 = 2.0 * dt.alpha
    raw = np.linalg.eigvalsh(a2)
    scale = mk.scale_of(a2)
    sigma, lam = noise_matrix(dt.alpha)
    keep = lam[1:] > 0
    clamped = raw[(raw < 1e-12 * scale)]
    sigma = sigma[:, keep]
    resid = np.max(np.abs(sigma @ sigma.T - a2))
    if resid > 1e-10 * scale:
        raise InvariantError("factorization", f"|sigma sigma^T - 2 alpha| = {resid:.3e}")
    return NoiseFactor(sigma, lam, clamped)
