"""Juttner equilibrium, flux residual and the detailed-balance drift."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import minkowski as mk
from .diffusion import alpha_array, friction_drift, hat_w
from .errors import DomainError
from .spectral import REST, BathParams, QuadratureWarning

MEASURES = ("invariant", "d3p")


@dataclass(frozen=True)
class JuttnerParams:
    beta: float
    gamma: float = 0.0
    w: np.ndarray = field(default_factory=lambda: REST.copy())
    norm: float = 1.0

    def __post_init__(self):
        w = mk.four_vector(self.w)
        object.__setattr__(self, "w", w)
        if not self.beta > 0:
            raise DomainError("Juttner beta must be positive")
        if abs(mk.norm2(w) - 1.0) > 1e-12:
            raise DomainError("Juttner frame vector must satisfy w.w = 1")

    @classmethod
    def for_bath(cls, bath: BathParams, gamma: float = 0.0) -> "JuttnerParams":
        return cls(beta=bath.beta, gamma=gamma, w=bath.w)


def juttner_density(p, params: JuttnerParams) -> np.ndarray | float:
    """norm * exp(-beta w.p - gamma p.p)."""
    return params.norm * np.exp(-params.beta * mk.dot(p, params.w) - params.gamma * mk.norm2(p))


def log_gradient(p, params: JuttnerParams) -> np.ndarray:
    """d_nu ln Omega_E (lower index) = -beta w_nu - 2 gamma p_nu."""
    return -params.beta * mk.lower(params.w) - 2.0 * params.gamma * mk.lower(p)


def flux_residual(p, bath: BathParams, params: JuttnerParams | None = None) -> np.ndarray:
    """alpha^{mu nu} d_nu Omega_E - b_fric^mu Omega_E.

    This is the probability flux of the transport equation evaluated on the
    Juttner density; it vanishes identically in the flux-zero convention with
    lam = beta (eps - pi_eps).
    """
    params = JuttnerParams.for_bath(bath) if params is None else params
    p = mk.four_vector(p)
    om = np.asarray(juttner_density(p, params))[..., None]
    a = alpha_array(p, bath)
    grad = log_gradient(p, params)
    return np.einsum("...mn,...n->...m", a, grad) * om - friction_drift(p, bath) * om


def reversible_drift(p, bath: BathParams, params: JuttnerParams | None = None) -> np.ndarray:
    """alpha^{mu nu} d_nu ln Omega_E, the friction of the reversible diffusion."""
    params = JuttnerParams.for_bath(bath) if params is None else params
    return np.einsum("...mn,...n->...m", alpha_array(p, bath), log_gradient(p, params))


def reversible_drift_closed_form(p, bath: BathParams) -> np.ndarray:
    """beta (eps - pi_eps) P^{mu nu} w_nu."""
    return bath.beta * (bath.eps - bath.pi_eps) * hat_w(p, bath.w)


def shell_weight(pabs, m: float, beta: float, measure: str = "invariant"):
    """Unnormalized radial weight 4 pi |p|^2 exp(-beta p0) [/ p0] on the mass shell."""
    pabs = np.asarray(pabs, dtype=float)
    p0 = np.sqrt(m * m + pabs * pabs)
    # shift by m so large beta*m does not underflow
    base = 4.0 * np.pi * pabs * pabs * np.exp(-beta * (p0 - m))
    if measure == "invariant":
        return base / p0
    if measure == "d3p":
        return base
    raise DomainError(f"unknown measure {measure!r}; choose from {MEASURES}")


def _pmax(m, beta):
    return math.sqrt((m + 60.0 / beta) ** 2 - m * m)


def juttner_moment(m: float, beta: float, order: int, measure: str = "invariant",
                   observable: str = "momentum") -> float:
    """Normalized shell average of |p|^order (or p0^order, or (p0 - m)^order).

    ``measure`` is ``"invariant"`` (d^3p / p0, the stationary measure found by
    the Fokker-Planck solver) or ``"d3p"``.
    """
    if not (m > 0 and beta > 0):
        raise DomainError("juttner_moment needs m > 0 and beta > 0")
    obs = {
        "momentum": lambda r: r**order,
        "energy": lambda r: np.sqrt(m * m + r * r) ** order,
        "kinetic": lambda r: (np.sqrt(m * m + r * r) - m) ** order,
    }[observable]
    top = _pmax(m, beta)
    scale = 1.0 / beta + math.sqrt(m / beta)
    pts = [scale * c for c in (1.0, 4.0, 16.0) if scale * c < top]
    num, e1 = integrate.quad(lambda r: obs(r) * shell_weight(r, m, beta, measure), 0.0, top,
                             epsrel=1e-12, epsabs=0.0, limit=400, points=pts)
    den, e2 = integrate.quad(lambda r: shell_weight(r, m, beta, measure), 0.0, top,
                             epsrel=1e-12, epsabs=0.0, limit=400, points=pts)
    if e1 > 1e-8 * abs(num) + 1e-300 or e2 > 1e-8 * den:
        warnings.warn("juttner_moment quadrature tolerance exceeded", QuadratureWarning, stacklevel=2)
    return num / den
