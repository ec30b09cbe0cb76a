"""Spectral densities of the thermal field and the bath scalars built from them.

A density is described in its own rest frame ``u`` (default: lab rest frame).
On-shell densities of mass ``mu`` (``mu = 0`` for photons) carry a radial
function ``g(|k|)`` with respect to ``d^3k`` and ``k^0 = sqrt(|k|^2 + mu^2)``;
a general isotropic forward-cone density is a superposition of such shells,
which is what :class:`Mixture` provides.

All integrals run in the density rest frame: composite Gauss-Legendre in
|k| over panels that are halved until the rule agrees with itself, times a
Gauss-Legendre (cos theta) by trapezoid (phi) angular rule whose error is
estimated by node doubling.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate, special

from . import minkowski as mk
from .errors import ConfigError, DomainError, InconsistencyError, InvalidBathError, SamplerError

REST = np.array([1.0, 0.0, 0.0, 0.0])
PLANCK_CUTOFF = 1e-16
QUAD_RTOL = 1e-10
MAX_REFINE = 6  # panel halvings before giving up


class QuadratureWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class QuadResult:
    value: np.ndarray | float
    error: float
    converged: bool


@dataclass(frozen=True)
class BathParams:
    """Thermal bath seen by the particle.

    ``friction_sign`` selects the drift convention: ``"flux-zero"`` makes the
    Juttner flux vanish, ``"paper-eq56"`` flips the friction to the printed
    sign of the equilibrium constant for comparison runs.
    """

    beta: float
    eps: float
    pi_eps: float
    lam: float | None = None
    tau_c: float = 1.0
    w: np.ndarray = field(default_factory=lambda: REST.copy())
    friction_sign: str = "flux-zero"

    def __post_init__(self):
        w = mk.four_vector(self.w).copy()
        object.__setattr__(self, "w", w)
        if self.lam is None:
            object.__setattr__(self, "lam", self.beta * (self.eps - self.pi_eps))
        if not self.beta > 0:
            raise InvalidBathError(f"beta must be positive, got {self.beta}")
        if not self.tau_c > 0:
            raise InvalidBathError(f"tau_c must be positive, got {self.tau_c}")
        if not (self.eps >= self.pi_eps >= 0.0):
            raise InvalidBathError(f"need eps >= pi_eps >= 0, got eps={self.eps}, pi_eps={self.pi_eps}")
        if self.lam < 0:
            raise InvalidBathError(f"friction magnitude must be >= 0, got {self.lam}")
        if abs(mk.norm2(w) - 1.0) > 1e-12 or w[0] <= 0:
            raise InvalidBathError(f"w must be a future unit timelike vector, w.w = {mk.norm2(w)!r}")
        if self.friction_sign not in ("flux-zero", "paper-eq56"):
            raise ConfigError(f"unknown friction sign convention {self.friction_sign!r}")

    @property
    def signed_friction(self) -> float:
        return self.lam if self.friction_sign == "flux-zero" else -self.lam

    def with_(self, **changes) -> "BathParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "eps": self.eps,
            "pi_eps": self.pi_eps,
            "lam": self.lam,
            "tau_c": self.tau_c,
            "w": [float(x) for x in self.w],
            "friction_sign": self.friction_sign,
        }


# ---------------------------------------------------------------------------
# angular rule


def _subdivide(edges, n: int) -> np.ndarray:
    if n == 1:
        return edges
    t = np.arange(n) / n
    inner = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * t
    return np.append(inner.ravel(), edges[-1])


def _sphere_rule(n_theta: int, n_phi: int):
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    ct = np.repeat(x, n_phi)
    st = np.sqrt(1.0 - ct**2)
    ph = np.tile(phi, n_theta)
    dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1)
    weights = np.repeat(wx, n_phi) * (2.0 * np.pi / n_phi)
    return dirs, weights


class SpectralDensity:
    """Base class: a non-negative isotropic measure on the forward cone."""

    frame: np.ndarray = REST

    def shells(self):
        """Yield ``(shell, weight)`` pairs of elementary on-shell components."""
        raise NotImplementedError

    # -- quadrature -------------------------------------------------------
    def integrate(self, func, n_angle: int = 16, rtol: float = QUAD_RTOL) -> QuadResult:
        """Integrate ``func(k)`` against the density.

        ``func`` receives lab-frame four-vectors with shape ``(n, 4)`` and
        returns an array of shape ``(n, ...)``.
        """
        value, err, ok = 0.0, 0.0, True
        for shell, c in self.shells():
            r = shell.integrate(func, n_angle=n_angle, rtol=rtol)
            value = value + c * np.asarray(r.value)
            err += abs(c) * r.error
            ok = ok and r.converged
        return QuadResult(value, err, ok)

    def total_mass(self) -> float:
        return float(self.integrate(lambda k: np.ones(len(k)), n_angle=2).value)

    def moment_tensor(self, **kw) -> QuadResult:
        """T_{mu nu}(0) = int dk G(k) k_mu k_nu (lower indices)."""
        return self.integrate(lambda k: mk.outer(mk.lower(k), mk.lower(k)), **kw)

    def check(self, n: int = 257):
        for shell, c in self.shells():
            if c < 0:
                raise DomainError("negative mixture weight")
            shell.check(n)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw lab-frame wave four-vectors from the normalized density."""
        comps = list(self.shells())
        masses = np.array([c * s.total_mass() for s, c in comps])
        z = masses.sum()
        if not z > 0:
            raise SamplerError("spectral density has zero total mass")
        which = rng.choice(len(comps), size=size, p=masses / z) if len(comps) > 1 else np.zeros(size, int)
        out = np.empty((size, 4))
        for i, (s, _) in enumerate(comps):
            sel = which == i
            out[sel] = s.sample(rng, int(sel.sum()))
        return out

    def boosted(self, boost: mk.Boost) -> "SpectralDensity":
        raise NotImplementedError

    def frequency_stats(self, w) -> tuple[float, float]:
        """Mean and standard deviation of k.w under the normalized density."""
        z = self.total_mass()
        if z <= 0:
            return 0.0, 0.0
        m1 = float(self.integrate(lambda k: mk.dot(k, w)).value) / z
        m2 = float(self.integrate(lambda k: mk.dot(k, w) ** 2).value) / z
        return m1, math.sqrt(max(m2 - m1 * m1, 0.0))


@dataclass(frozen=True, eq=False)
class Shell(SpectralDensity):
    """Isotropic on-shell density ``g(|k|) d^3k`` of mass ``mu`` in frame ``frame``.

    Subclasses provide ``radial`` (vectorized) and the integration range.
    A radial point mass (``monochromatic``) is handled by :class:`Monochromatic`.
    """

    mu: float = 0.0
    frame: np.ndarray = field(default_factory=lambda: REST.copy())
    kmin: float = 0.0
    kmax: float = 1.0

    breakpoints: tuple = ()

    def radial(self, kabs):
        raise NotImplementedError

    def weight(self, kabs):
        """Radial weight |k|^2 g(|k|) of the d^3k measure."""
        kabs = np.asarray(kabs, dtype=float)
        return kabs * kabs * self.radial(kabs)

    def shells(self):
        yield self, 1.0

    @cached_property
    def _to_lab(self) -> mk.Boost:
        return mk.boost_to_rest(self.frame).inverse()

    def _k4(self, kabs, dirs):
        kabs = np.atleast_1d(kabs)
        k0 = np.sqrt(kabs**2 + self.mu**2)
        ks = kabs[:, None, None] * dirs[None, :, :]
        k = np.concatenate([np.broadcast_to(k0[:, None, None], ks.shape[:2] + (1,)), ks], axis=-1)
        return self._to_lab(k)

    def _angular(self, func, kabs, n):
        dirs, wts = _sphere_rule(n, 2 * n)
        k = self._k4(kabs, dirs)
        vals = np.asarray(func(k.reshape(-1, 4)))
        vals = vals.reshape(k.shape[:2] + vals.shape[1:])
        return np.tensordot(wts, vals, axes=([0], [1]))

    # radial Gauss nodes per panel for the coarse and refined composite rules
    panel_nodes = (8, 16)

    def _panels(self, level: int = 0):
        if self.breakpoints:
            inner = [p for p in self.breakpoints if self.kmin < p < self.kmax]
            edges = np.array([self.kmin, *inner, self.kmax])
        else:
            edges = np.linspace(self.kmin, self.kmax, 17)
        return _subdivide(edges, 2**level)

    def _composite(self, func, n_nodes, n_angle, level=0):
        edges = self._panels(level)
        x, wx = np.polynomial.legendre.leggauss(n_nodes)
        a, b = edges[:-1], edges[1:]
        ks = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x).ravel()
        wk = (0.5 * (b - a)[:, None] * wx).ravel() * self.weight(ks)
        # bound the (radial x angular) batch size
        step = max(1, 2**17 // (2 * n_angle * n_angle))
        total = 0.0
        for i in range(0, len(ks), step):
            total = total + np.tensordot(wk[i:i + step], self._angular(func, ks[i:i + step], n_angle),
                                         axes=([0], [0]))
        return total

    def integrate(self, func, n_angle: int = 16, rtol: float = QUAD_RTOL) -> QuadResult:
        """Composite Gauss rule over radial panels, halving the panels until it agrees with itself.

        The radial and angular errors are estimated separately, by doubling
        the nodes per panel and the angular resolution.
        """
        lo, hi = self.panel_nodes
        va = self._composite(func, lo, 2 * n_angle)
        for level in range(MAX_REFINE + 1):
            v1 = self._composite(func, lo, n_angle, level)
            v2 = self._composite(func, hi, n_angle, level)
            err = float(np.max(np.abs(v2 - v1))) + float(np.max(np.abs(va - v1)))
            scale = max(float(np.max(np.abs(v2))), 1e-300)
            if err <= rtol * scale:
                return QuadResult(v2, err, True)
            if level < MAX_REFINE:
                va = self._composite(func, lo, 2 * n_angle, level + 1)
        converged = err <= 1e-6 * scale
        if not converged:
            warnings.warn(f"quadrature error estimate {err:.3e} exceeds tolerance", QuadratureWarning, stacklevel=3)
        return QuadResult(v2, err, converged)

    def check(self, n: int = 257):
        ks = np.linspace(self.kmin, self.kmax, n)
        if np.any(self.radial(ks) < 0):
            raise DomainError("spectral density is negative somewhere on its support")
        if self.mu < 0:
            raise DomainError("shell mass must be non-negative")

    @cached_property
    def _cdf_table(self):
        ks = np.unique(np.concatenate([np.linspace(self.kmin, self.kmax, 8193), self.breakpoints]))
        pdf = self.weight(ks)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(ks))])
        return ks, cdf

    def total_mass(self) -> float:
        pts = [p for p in self.breakpoints if self.kmin < p < self.kmax] or None
        v, _ = integrate.quad(lambda s: self.weight(np.array([s]))[0], self.kmin, self.kmax,
                              epsrel=1e-12, limit=400, points=pts)
        return 4.0 * np.pi * v

    def sample(self, rng, size):
        ks, cdf = self._cdf_table
        u = rng.random(size) * cdf[-1]
        kabs = np.interp(u, cdf, ks)
        n = rng.normal(size=(size, 3))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        k0 = np.sqrt(kabs**2 + self.mu**2)
        k = np.concatenate([k0[:, None], kabs[:, None] * n], axis=-1)
        return self._to_lab(k)


@dataclass(frozen=True, eq=False)
class Planck(Shell):
    """Photon gas: g(|k|) = norm / (|k| (exp(beta |k|) - 1))."""

    beta: float = 1.0
    norm: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("Planck density needs beta > 0")
        # integrand k^3/(e^{beta k}-1) below PLANCK_CUTOFF of its peak
        kmax = (-math.log(PLANCK_CUTOFF) + 4.0 * math.log(40.0)) / self.beta
        object.__setattr__(self, "kmax", kmax)
        object.__setattr__(self, "mu", 0.0)

    def radial(self, kabs):
        kabs = np.asarray(kabs, dtype=float)
        with np.errstate(divide="ignore"):
            return self.norm / (kabs * np.expm1(self.beta * kabs))

    def weight(self, kabs):
        kabs = np.asarray(kabs, dtype=float)
        x = self.beta * kabs
        safe = np.where(x > 0, x, 1.0)
        # k / (e^{beta k} - 1) -> 1/beta as k -> 0
        return self.norm * np.where(x > 0, kabs / np.expm1(safe), 1.0 / self.beta)

    def check(self, n: int = 257):
        pass

    def boosted(self, boost):
        return replace(self, frame=boost(self.frame))


@dataclass(frozen=True, eq=False)
class Tabulated(Shell):
    """Radial density given as (|k|, g) pairs with linear interpolation."""

    k_table: tuple = ()
    g_table: tuple = ()

    def __post_init__(self):
        k = np.asarray(self.k_table, dtype=float)
        g = np.asarray(self.g_table, dtype=float)
        if k.ndim != 1 or k.shape != g.shape or len(k) < 2:
            raise ConfigError("custom table needs matching 1D columns with at least 2 rows")
        if np.any(np.diff(k) <= 0) or k[0] < 0:
            raise ConfigError("custom table |k| column must be non-negative and increasing")
        if np.any(g < 0):
            raise DomainError("custom table has negative spectral density entries")
        object.__setattr__(self, "k_table", tuple(k))
        object.__setattr__(self, "g_table", tuple(g))
        object.__setattr__(self, "kmin", float(k[0]))
        object.__setattr__(self, "kmax", float(k[-1]))
        object.__setattr__(self, "breakpoints", tuple(k))

    # g is linear per interval, so few radial nodes suffice
    panel_nodes = (4, 8)

    def radial(self, kabs):
        return np.interp(kabs, self.k_table, self.g_table, left=0.0, right=0.0)

    def boosted(self, boost):
        return replace(self, frame=boost(self.frame))

    @classmethod
    def from_csv(cls, path, mu: float = 0.0, frame=None) -> "Tabulated":
        rows = []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    continue  # header line
        if not rows:
            raise ConfigError(f"no numeric rows in {path}")
        k, g = zip(*rows)
        return cls(mu=mu, frame=REST.copy() if frame is None else mk.four_vector(frame), k_table=k, g_table=g)


@dataclass(frozen=True, eq=False)
class Profile(Shell):
    """Shell with a user-supplied vectorized radial function (tests, sweeps)."""

    func: object = None

    def radial(self, kabs):
        return np.asarray(self.func(np.asarray(kabs, dtype=float)), dtype=float)

    def boosted(self, boost):
        return replace(self, frame=boost(self.frame))


@dataclass(frozen=True, eq=False)
class Monochromatic(SpectralDensity):
    """All weight on the sphere |k| = ``k_radius`` of mass ``mu`` (k^0 = sqrt(k_r^2 + mu^2))."""

    k_radius: float = 1.0
    weight: float = 1.0
    mu: float = 0.0
    frame: np.ndarray = field(default_factory=lambda: REST.copy())

    def __post_init__(self):
        if self.weight < 0 or self.k_radius < 0 or self.mu < 0:
            raise DomainError("monochromatic density needs non-negative radius, mass and weight")
        if self.k_radius == 0 and self.mu == 0 and self.weight > 0:
            raise DomainError("zero wave vector carries no field")

    def shells(self):
        yield self, 1.0

    @cached_property
    def _to_lab(self):
        return mk.boost_to_rest(self.frame).inverse()

    def integrate(self, func, n_angle=16, rtol=QUAD_RTOL):
        k0 = math.hypot(self.k_radius, self.mu)

        def avg(n):
            dirs, wts = _sphere_rule(n, 2 * n)
            k = np.concatenate([np.full((len(dirs), 1), k0), self.k_radius * dirs], axis=-1)
            vals = np.asarray(func(self._to_lab(k)))
            return np.tensordot(wts, vals, axes=([0], [0])) / (4.0 * np.pi)

        v1, v2 = avg(n_angle), avg(2 * n_angle)
        err = float(np.max(np.abs(v2 - v1))) * self.weight
        return QuadResult(self.weight * v2, err, err <= 1e-6 * max(float(np.max(np.abs(v2))) * self.weight, 1e-300))

    def total_mass(self):
        return self.weight

    def check(self, n=0):
        pass

    def sample(self, rng, size):
        if self.weight <= 0:
            raise SamplerError("spectral density has zero total mass")
        n = rng.normal(size=(size, 3))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        k0 = math.hypot(self.k_radius, self.mu)
        k = np.concatenate([np.full((size, 1), k0), self.k_radius * n], axis=-1)
        return self._to_lab(k)

    def boosted(self, boost):
        return replace(self, frame=boost(self.frame))

    def scaled(self, factor: float) -> "Monochromatic":
        return replace(self, k_radius=self.k_radius * factor, mu=self.mu * factor)


@dataclass(frozen=True, eq=False)
class Mixture(SpectralDensity):
    """Non-negative combination of elementary densities (any forward-cone density)."""

    components: tuple = ()
    weights: tuple = ()

    def shells(self):
        for comp, c in zip(self.components, self.weights):
            for s, c2 in comp.shells():
                yield s, c * c2

    def boosted(self, boost):
        return Mixture(tuple(c.boosted(boost) for c in self.components), self.weights)


@dataclass(frozen=True, eq=False)
class Null(SpectralDensity):
    """The zero density (no field)."""

    def shells(self):
        return iter(())

    def integrate(self, func, n_angle=16, rtol=QUAD_RTOL):
        v = np.asarray(func(np.tile(REST, (1, 1))))[0] * 0.0
        return QuadResult(v, 0.0, True)

    def total_mass(self):
        return 0.0

    def boosted(self, boost):
        return self


# ---------------------------------------------------------------------------
# bath scalars


def _check_w(w):
    w = mk.four_vector(w)
    if abs(mk.norm2(w) - 1.0) > 1e-12 or w[0] <= 0:
        raise DomainError(f"w must be a future unit timelike vector (w.w = {mk.norm2(w)!r})")
    return w


def energy_density_q(G: SpectralDensity, w, **kw) -> QuadResult:
    w = _check_w(w)
    return G.integrate(lambda k: mk.dot(k, w) ** 2, **kw)


def pressure_q(G: SpectralDensity, w, **kw) -> QuadResult:
    w = _check_w(w)
    r = G.integrate(lambda k: (mk.dot(k, w) ** 2 - mk.norm2(k)) / 3.0, **kw)
    return r


def energy_density(G: SpectralDensity, w=REST, **kw) -> float:
    """eps = int dk G(k) (k.w)^2."""
    return float(energy_density_q(G, w, **kw).value)


def pressure(G: SpectralDensity, w=REST, **kw) -> float:
    """pi_eps = (1/3) int dk G(k) ((k.w)^2 - k^2)."""
    return float(pressure_q(G, w, **kw).value)


def _bose_integrand(beta, w, norm):
    def f(k):
        kw = mk.dot(k, w)
        nb = 1.0 / np.expm1(beta * kw)
        # measure d^3k / k0 and factor k_mu
        return -norm * (mk.lower(k) / k[:, :1]) * nb[:, None]

    return f


def bose_current(beta: float, w=REST, norm: float = 1.0, n_angle: int = 48,
                 rtol: float = 1e-11) -> tuple[np.ndarray, float]:
    """Current J_mu = -norm * int d^3k k_mu / (k^0 (exp(beta k.w) - 1)) and its charge constant r.

    Returns the covariant current (lower index) and ``r`` from the least-squares
    fit J = -(3 r / 2) w_mu.  The integral runs over lab-frame massless momenta.
    """
    if not beta > 0:
        raise DomainError("bose_current needs beta > 0")
    w = _check_w(w)
    # integrand k^2/(e^{beta a k}-1) with a >= w0 - |w|; cut where it is 1e-16 of peak
    a_min = w[0] - np.linalg.norm(w[1:])
    kmax = (-math.log(PLANCK_CUTOFF) + 2.0 * math.log(60.0)) / (beta * a_min)
    dirs, wts = _sphere_rule(n_angle, 2 * n_angle)
    dirs2, wts2 = _sphere_rule(2 * n_angle, 4 * n_angle)
    f = _bose_integrand(beta, w, norm)

    def radial(kabs, d, ww):
        k = np.concatenate([np.full((len(d), 1), kabs), kabs * d], axis=-1)
        return kabs * kabs * np.tensordot(ww, f(k), axes=([0], [0]))

    j1, _ = integrate.quad_vec(lambda s: radial(s, dirs, wts), 0.0, kmax, epsrel=rtol, epsabs=0.0)
    j2, qerr = integrate.quad_vec(lambda s: radial(s, dirs2, wts2), 0.0, kmax, epsrel=rtol, epsabs=0.0)
    j = np.asarray(j2)
    wl = mk.lower(w)
    r = float(-(2.0 / 3.0) * (j @ wl) / (wl @ wl))
    resid = np.linalg.norm(j + 1.5 * r * wl) / np.linalg.norm(j)
    if resid > 1e-6:
        raise InconsistencyError(f"current not proportional to w: relative residual {resid:.3e}")
    if np.max(np.abs(j2 - j1)) > 1e-6 * np.max(np.abs(j)):
        warnings.warn("bose_current angular rule not converged", QuadratureWarning, stacklevel=2)
    return j, r


def bose_current_closed_form(beta: float, norm: float = 1.0) -> float:
    """r for the massless Bose current: 16 pi zeta(3) / (3 beta^3) * norm."""
    return 16.0 * math.pi * special.zeta(3.0) / (3.0 * beta**3) * norm


def bath_from_spectral(G: SpectralDensity, beta: float, w=REST, tau_c: float = 1.0,
                       friction_sign: str = "flux-zero") -> BathParams:
    """Bath scalars from quadrature; friction magnitude lam = beta (eps - pi_eps)."""
    if not beta > 0 or not tau_c > 0:
        raise InvalidBathError("bath_from_spectral needs beta > 0 and tau_c > 0")
    w = _check_w(w)
    G.check()
    e = energy_density_q(G, w)
    p = pressure_q(G, w)
    eps, pi_eps = float(e.value), float(p.value)
    tol = 1e-9 * max(abs(eps), 1e-300)
    if pi_eps < 0 and pi_eps > -tol:
        pi_eps = 0.0
    if eps - pi_eps <= tol:
        raise InvalidBathError(f"spectral bath needs eps > pi_eps, got eps={eps}, pi_eps={pi_eps}")
    return BathParams(beta=beta, eps=eps, pi_eps=pi_eps, tau_c=tau_c, w=w, friction_sign=friction_sign)


# ---------------------------------------------------------------------------
# config presets


def density_from_config(cfg: dict, base_dir: Path | None = None) -> SpectralDensity:
    """Build a density from ``{"preset": ..., ...}``.

    Presets: ``planck`` (beta, norm), ``monochromatic`` (k, weight, mu),
    ``custom-table`` (path to CSV of |k|,g rows, or inline ``table``; mu),
    ``null``.
    """
    cfg = dict(cfg)
    preset = cfg.pop("preset", "planck")
    frame = mk.four_vector(cfg.pop("frame", REST))
    try:
        if preset == "planck":
            return Planck(beta=float(cfg.get("beta", 1.0)), norm=float(cfg.get("norm", 1.0)), frame=frame)
        if preset == "monochromatic":
            return Monochromatic(k_radius=float(cfg.get("k", 1.0)), weight=float(cfg.get("weight", 1.0)),
                                 mu=float(cfg.get("mu", 0.0)), frame=frame)
        if preset == "custom-table":
            if "table" in cfg:
                k, g = zip(*cfg["table"])
                return Tabulated(mu=float(cfg.get("mu", 0.0)), frame=frame, k_table=k, g_table=g)
            path = Path(cfg["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return Tabulated.from_csv(path, mu=float(cfg.get("mu", 0.0)), frame=frame)
        if preset == "null":
            return Null()
    except KeyError as exc:
        raise ConfigError(f"spectral preset {preset!r} missing parameter {exc}") from None
    raise ConfigError(f"unknown spectral preset {preset!r}")
