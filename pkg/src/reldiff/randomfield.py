"""Gaussian random electromagnetic fields built from transverse vector potentials.

A realization is a finite sum of plane-wave modes.  Each mode carries a wave
vector ``k`` drawn from the normalized spectral density, polarizations
orthogonal to ``k`` (two for massless modes, three for massive ones; the gauge
frame is the bath velocity ``w``), complex Gaussian amplitudes and an
importance weight.  Arrays carry optional leading realization axes so that
whole ensembles are evaluated in one pass.

Covariance convention: with ``E|c|^2 = 1/2`` the coincident-point covariance is

    <F_{mu nu} F_{sigma rho}> = -(eta_{mu sigma} T_{nu rho} - eta_{mu rho} T_{nu sigma}
                                  + eta_{nu rho} T_{mu sigma} - eta_{nu sigma} T_{mu rho}),

i.e. minus the structure tensor of T, which is the sign that gives positive
electric and magnetic variances and reproduces the diffusion tensor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.integrate import cumulative_simpson

from . import minkowski as mk
from . import rng as krng
from .diffusion import alpha_array
from .errors import DomainError, SamplerError
from .spectral import REST, SpectralDensity, bath_from_spectral, BathParams


class MCWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FieldRealization:
    """Plane-wave modes of one realization (or a batch, via leading axes).

    ``tensor_k`` is the wave vector entering the field-strength bivector; it
    equals ``k`` for every field derived from a potential and differs only in
    deliberately corrupted realizations used to exercise the Bianchi check.
    """

    k: np.ndarray  # (..., N, 4) contravariant
    pol: np.ndarray  # (..., N, P, 4) contravariant
    amp: np.ndarray  # (..., N, P) complex
    weight: np.ndarray  # (..., N)
    seed: int = 0
    tensor_k: np.ndarray | None = None
    index: int = 0

    @property
    def n_modes(self) -> int:
        return self.k.shape[-2]

    @property
    def kt(self) -> np.ndarray:
        return self.k if self.tensor_k is None else self.tensor_k

    def __getitem__(self, item) -> "FieldRealization":
        kt = None if self.tensor_k is None else self.tensor_k[item]
        return FieldRealization(self.k[item], self.pol[item], self.amp[item], self.weight[item],
                                self.seed, kt, self.index)

    def _phase(self, x):
        # k.x for every mode; x broadcasts against the leading axes
        x = np.asarray(x, dtype=float)
        return mk.dot(self.k, x[..., None, :])

    def _coeffs(self, x):
        """s = -2 sqrt(w) Im(c e^{ik.x}) per (mode, polarization)."""
        e = np.exp(1j * self._phase(x))
        return -2.0 * np.sqrt(self.weight)[..., None] * np.imag(self.amp * e[..., None])


def _polarizations(k, w):
    """Polarization vectors orthogonal to k, spacelike, unit; frame fixed by w.

    Massless modes get two vectors (third slot zero), massive modes three.
    """
    to_rest = mk.boost_to_rest(w)
    kr = to_rest(k)
    ks = kr[..., 1:]
    kabs = np.linalg.norm(ks, axis=-1)
    n = np.where(kabs[..., None] > 0, ks / np.where(kabs > 0, kabs, 1.0)[..., None], np.array([0.0, 0.0, 1.0]))
    helper = np.where(np.abs(n[..., :1]) < 0.9, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(n, e1)
    mu2 = kr[..., 0] ** 2 - kabs**2
    massive = mu2 > 1e-12 * kr[..., 0] ** 2
    mu = np.sqrt(np.where(massive, mu2, 1.0))
    e3 = np.concatenate([kabs[..., None], kr[..., :1] * n], axis=-1) / mu[..., None]
    e3 = np.where(massive[..., None], e3, 0.0)
    z = np.zeros(kabs.shape + (1,))
    pols = np.stack([np.concatenate([z, e1], -1), np.concatenate([z, e2], -1), e3], axis=-2)
    back = to_rest.inverse()
    return back(pols), massive


def _draw_block(G: SpectralDensity, n_modes: int, seed: int, block: int, w, z: float):
    gen = krng.block_generator(seed, krng.STREAM_MODES, block)
    size = krng.BLOCK * n_modes
    k = G.sample(gen, size).reshape(krng.BLOCK, n_modes, 4)
    pol, massive = _polarizations(k, w)
    a = gen.normal(size=(krng.BLOCK, n_modes, 3, 2))
    amp = 0.5 * (a[..., 0] + 1j * a[..., 1])
    amp[..., 2] = np.where(massive, amp[..., 2], 0.0)
    weight = np.full((krng.BLOCK, n_modes), z / n_modes)
    return k, pol, amp, weight


def sample_ensemble(G: SpectralDensity, n_modes: int, realizations: int, seed: int, w=REST,
                    start: int = 0) -> FieldRealization:
    """Realizations ``start .. start+realizations-1`` of the keyed ensemble."""
    if n_modes < 1 or realizations < 1:
        raise DomainError("need at least one mode and one realization")
    z = G.total_mass()
    if not z > 0:
        raise SamplerError("cannot sample a spectral density with zero total mass")
    w = mk.four_vector(w)
    parts = []
    stop = start + realizations
    for b in range(start // krng.BLOCK, (stop - 1) // krng.BLOCK + 1):
        lo, hi = max(start - b * krng.BLOCK, 0), min(stop - b * krng.BLOCK, krng.BLOCK)
        parts.append([arr[lo:hi] for arr in _draw_block(G, n_modes, seed, b, w, z)])
    k, pol, amp, weight = (np.concatenate(x) for x in zip(*parts))
    return FieldRealization(k, pol, amp, weight, seed=seed, index=start)


def sample_modes(G: SpectralDensity, n_modes: int, seed: int, w=REST, index: int = 0) -> FieldRealization:
    """One realization with ``n_modes`` modes; ``index`` selects it within the keyed ensemble."""
    return sample_ensemble(G, n_modes, 1, seed, w, start=index)[0]


def field_strength(real: FieldRealization, x) -> np.ndarray:
    """F_{mu nu}(x) with lower indices; real and antisymmetric."""
    s = real._coeffs(x)
    kl = mk.lower(real.kt)[..., None, :]
    el = mk.lower(real.pol)
    biv = kl[..., :, None] * el[..., None, :]
    biv = biv - np.swapaxes(biv, -1, -2)
    return np.einsum("...np,...npij->...ij", s, biv)


def force(real: FieldRealization, x, p) -> np.ndarray:
    """Contravariant dp/dtau = F^mu_nu p^nu / sqrt(p^2) without forming F."""
    s = real._coeffs(x)
    p = np.asarray(p, dtype=float)
    m = np.sqrt(mk.norm2(p))
    ep = mk.dot(real.pol, p[..., None, None, :])
    kp = mk.dot(real.kt, p[..., None, :])[..., None]
    term = real.kt[..., None, :] * ep[..., None] - real.pol * kp[..., None]
    return np.einsum("...np,...npi->...i", s, term) / m[..., None]


def bianchi_residual(real: FieldRealization, x) -> float:
    """max |d_s F_{mn} + d_n F_{sm} + d_m F_{ns}| with exact mode derivatives."""
    e = np.exp(1j * real._phase(x))
    d = -2.0 * np.sqrt(real.weight)[..., None] * np.real(real.amp * e[..., None])
    kl = mk.lower(real.k)
    ktl = mk.lower(real.kt)[..., None, :]
    el = mk.lower(real.pol)
    biv = ktl[..., :, None] * el[..., None, :]
    biv = biv - np.swapaxes(biv, -1, -2)
    dF = np.einsum("...np,...ns,...npab->...sab", d, kl, biv)
    cyc = dF + np.transpose(dF, _axes(dF, (2, 0, 1))) + np.transpose(dF, _axes(dF, (1, 2, 0)))
    return float(np.max(np.abs(cyc)))


def bianchi_scale(real: FieldRealization) -> float:
    """Natural size of dF: sum over modes of |amplitude| |k| |k^e|."""
    amp = 2.0 * np.sqrt(real.weight)[..., None] * np.abs(real.amp)
    kmag = np.max(np.abs(real.k), axis=-1)[..., None]
    emag = np.max(np.abs(real.pol), axis=-1)
    return max(float(np.sum(amp * kmag * kmag * emag)), mk.TOL_FLOOR)


def _axes(arr, perm):
    lead = arr.ndim - 3
    return tuple(range(lead)) + tuple(lead + q for q in perm)


# ---------------------------------------------------------------------------
# exact particle dynamics


@dataclass
class Trajectory:
    tau: np.ndarray
    x: np.ndarray  # (steps+1, ..., 4)
    p: np.ndarray
    max_step_drift: float
    advice: str = ""


def _rhs(real, x, p):
    m = np.sqrt(mk.norm2(p))[..., None]
    return p / m, force(real, x, p)


def rk4_step(real, x, p, h):
    k1x, k1p = _rhs(real, x, p)
    k2x, k2p = _rhs(real, x + 0.5 * h * k1x, p + 0.5 * h * k1p)
    k3x, k3p = _rhs(real, x + 0.5 * h * k2x, p + 0.5 * h * k2p)
    k4x, k4p = _rhs(real, x + h * k3x, p + h * k3p)
    return (x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
            p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p))


def liouville_trajectory(real: FieldRealization, x0, p0, tau_max: float, steps: int) -> Trajectory:
    """Classical RK4 integration of dx/dtau = p/sqrt(p^2), dp/dtau = F p / sqrt(p^2).

    A negative ``tau_max`` integrates backwards.  Steps whose relative drift
    of p^2 exceeds 1e-6 trigger refinement advice in the result.
    """
    if steps < 1:
        raise DomainError("need at least one step")
    x = np.asarray(x0, dtype=float)
    p = np.asarray(p0, dtype=float)
    if np.any(mk.norm2(p) <= 0):
        raise DomainError("initial momentum must be timelike")
    lead = np.broadcast_shapes(x.shape, p.shape, real.k.shape[:-2] + (4,))
    x = np.broadcast_to(x, lead).copy()
    p = np.broadcast_to(p, lead).copy()
    h = tau_max / steps
    xs, ps = [x], [p]
    m2 = mk.norm2(p)
    worst = 0.0
    for _ in range(steps):
        x, p = rk4_step(real, x, p, h)
        m2n = mk.norm2(p)
        worst = max(worst, float(np.max(np.abs(m2n - m2) / m2)))
        m2 = m2n
        xs.append(x)
        ps.append(p)
    advice = f"p^2 drift {worst:.2e} per step; increase steps" if worst > 1e-6 else ""
    return Trajectory(np.linspace(0.0, tau_max, steps + 1), np.array(xs), np.array(ps), worst, advice)


# ---------------------------------------------------------------------------
# Kubo estimators


@dataclass
class KuboEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    realizations: int
    tau: float
    seed: int
    analytic: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def z_scores(self) -> np.ndarray:
        ref = np.zeros_like(self.mean) if self.analytic is None else self.analytic
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (self.mean - ref) / self.stderr
        return np.where(self.stderr > 0, z, np.where(np.isclose(self.mean, ref, atol=1e-300), 0.0, np.inf))

    def relative_error(self) -> float:
        """Largest standard error relative to the largest |analytic| entry."""
        ref = self.analytic if self.analytic is not None else self.mean
        return float(np.max(self.stderr) / max(np.max(np.abs(ref)), 1e-300))


def correlation_time_estimate(G: SpectralDensity, w=REST) -> float:
    """1 / (spread of k.w); infinite for a single frequency."""
    _, sd = G.frequency_stats(w)
    return math.inf if sd <= 1e-12 else 1.0 / sd


def _reduce_blocks(parts):
    n = sum(q[0] for q in parts)
    s1 = sum(q[1] for q in parts)
    s2 = sum(q[2] for q in parts)
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0) * n / max(n - 1, 1)
    return n, mean, np.sqrt(var / n)


def kubo_alpha_estimate(G: SpectralDensity, p, w=REST, tau: float = 1e-3, ensembles: int = 10000,
                        seed: int = 0, n_modes: int = 8, steps: int = 4, threads: int = 1,
                        override: bool = False, beta: float = 1.0) -> KuboEstimate:
    """Short-time estimate <dp dp>/tau^2 over field realizations, particle started at x = 0.

    The increments are recorded at tau/2 and tau on the same trajectory and
    combined by Richardson extrapolation, which removes the O(tau^2) bias of
    the raw quotient (odd powers of tau vanish in the ensemble mean).
    """
    p = mk.four_vector(p)
    w = mk.four_vector(w)
    if steps % 2:
        raise DomainError("steps must be even (the half-time increment is recorded)")
    if G.total_mass() <= 0:
        zero = np.zeros((4, 4))
        return KuboEstimate(zero, zero.copy(), ensembles, tau, seed, zero.copy(), {"null_field": True})
    t_corr = correlation_time_estimate(G, w)
    if tau > t_corr / 10 and not override:
        raise DomainError(f"tau = {tau} exceeds a tenth of the field correlation time {t_corr:.4g}")
    h = tau / steps

    def work(b, start, stop):
        real = sample_ensemble(G, n_modes, stop - start, seed, w, start=start)
        x = np.zeros((stop - start, 4))
        q = np.broadcast_to(p, x.shape).copy()
        half = None
        for i in range(steps):
            x, q = rk4_step(real, x, q, h)
            if i + 1 == steps // 2:
                half = q - p
        d1 = q - p
        x1 = mk.outer(d1, d1) / tau**2
        x2 = mk.outer(half, half) / (tau / 2) ** 2
        est = (4.0 * x2 - x1) / 3.0
        return len(est), est.sum(0), (est**2).sum(0)

    n, mean, se = _reduce_blocks(krng.map_blocks(work, ensembles, threads))
    analytic = None
    meta = {"tau_corr_estimate": t_corr, "n_modes": n_modes, "steps": steps}
    try:
        bath = bath_from_spectral(G, beta, w)
        analytic = alpha_array(p, bath)
        meta.update(eps=bath.eps, pi_eps=bath.pi_eps)
    except DomainError:
        pass
    return KuboEstimate(0.5 * (mean + mean.T), se, n, tau, seed, analytic, meta)


@dataclass
class TimeIntegratedKubo:
    tensor: np.ndarray
    stderr: np.ndarray
    tau_c: float
    tau_c_stderr: float
    tail_ratio: float
    truncated: bool
    s_grid: np.ndarray
    running: np.ndarray
    meta: dict = field(default_factory=dict)


def kubo_alpha_time_integrated(G: SpectralDensity, p, w=REST, s_max: float = 20.0, ensembles: int = 4000,
                               seed: int = 0, n_modes: int = 8, n_s: int | None = None,
                               threads: int = 1, beta: float = 1.0) -> TimeIntegratedKubo:
    """int_0^s_max ds <F^{mu nu}(x) F^{sigma rho}(x - s p/m)> p_nu p_rho / p^2 by MC and Simpson.

    ``tau_c`` is the projection of this tensor onto the analytic short-time
    tensor alpha, i.e. the ratio of the two Kubo estimators.  A tail whose
    last-quarter variation exceeds 5% of the running maximum raises a warning.
    """
    p = mk.four_vector(p)
    w = mk.four_vector(w)
    m = math.sqrt(mk.norm2(p))
    bath = bath_from_spectral(G, beta, w)
    ref = alpha_array(p, bath)
    ref_norm = float(np.sum(ref * ref))
    if n_s is None:
        kmax = G.frequency_stats(w)[0] + 6.0 * G.frequency_stats(w)[1]
        gamma = float(np.max(np.abs(p))) / m
        n_s = int(max(200, 40 * s_max * kmax * gamma / (2 * math.pi))) | 1
    s = np.linspace(0.0, s_max, n_s)

    def work(b, start, stop):
        real = sample_ensemble(G, n_modes, stop - start, seed, w, start=start)
        r = stop - start
        v0 = force(real, np.zeros((r, 4)), np.broadcast_to(p, (r, 4)))
        acc = np.empty((n_s, r, 4, 4))
        for i, si in enumerate(s):
            xs = np.broadcast_to(-si * p / m, (r, 4))
            vs = force(real, xs, np.broadcast_to(p, (r, 4)))
            acc[i] = mk.outer(v0, vs)
        integ = cumulative_simpson(acc, x=s, axis=0, initial=0.0)
        total = integ[-1]
        total = 0.5 * (total + np.swapaxes(total, -1, -2))
        proj = np.einsum("rij,ij->r", total, ref) / ref_norm
        return (r, total.sum(0), (total**2).sum(0), integ.mean(1) * r, proj.sum(), (proj**2).sum())

    parts = krng.map_blocks(work, ensembles, threads)
    n = sum(q[0] for q in parts)
    s1 = sum(q[1] for q in parts)
    s2 = sum(q[2] for q in parts)
    running = sum(q[3] for q in parts) / n
    mean = s1 / n
    se = np.sqrt(np.maximum(s2 / n - mean**2, 0.0) / max(n - 1, 1))
    t1 = sum(q[4] for q in parts) / n
    t2 = sum(q[5] for q in parts) / n
    t_se = math.sqrt(max(t2 - t1 * t1, 0.0) / max(n - 1, 1))
    norms = np.max(np.abs(running), axis=(-1, -2))
    last = running[int(0.75 * (n_s - 1)):]
    tail = float(np.max(np.abs(last - running[-1]))) / max(float(np.max(norms)), 1e-300)
    truncated = tail > 0.05
    if truncated:
        warnings.warn(f"time integral not converged at s_max = {s_max}: tail ratio {tail:.3f}", MCWarning, stacklevel=2)
    meta = {"tau_c_definition": "projection of the time-integrated tensor on the short-time alpha",
            "n_s": n_s, "realizations": n}
    return TimeIntegratedKubo(mean, se, t1, t_se, tail, truncated, s, running, meta)


# ---------------------------------------------------------------------------
# covariance checks


def structure_tensor(X) -> np.ndarray:
    """S[X]_{mu nu sigma rho} = eta_ms X_nr - eta_mr X_ns + eta_nr X_ms - eta_ns X_mr."""
    e = mk.ETA
    X = np.asarray(X, dtype=float)
    return (np.einsum("ms,nr->mnsr", e, X) - np.einsum("mr,ns->mnsr", e, X)
            + np.einsum("nr,ms->mnsr", e, X) - np.einsum("ns,mr->mnsr", e, X))


def levi_civita() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for perm in permutations(range(4)):
        inv = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        eps[perm] = -1.0 if inv % 2 else 1.0
    return eps


def covariance_model(T) -> np.ndarray:
    """Coincident-point covariance of F for moment tensor T (lower indices)."""
    return -structure_tensor(T)


@dataclass
class CovarianceEstimate:
    mean: np.ndarray  # (4,4,4,4) lower indices
    stderr: np.ndarray
    samples: int
    mean_field: np.ndarray
    mean_field_stderr: np.ndarray


def covariance_estimate(G: SpectralDensity, n_modes: int, realizations: int, seed: int, w=REST,
                        x=None, threads: int = 1) -> CovarianceEstimate:
    """Empirical <F_{mu nu}(x) F_{sigma rho}(x)> and <F(x)> over keyed realizations."""
    x = np.zeros(4) if x is None else mk.four_vector(x)

    def work(b, start, stop):
        real = sample_ensemble(G, n_modes, stop - start, seed, w, start=start)
        F = field_strength(real, x)
        FF = np.einsum("rij,rkl->rijkl", F, F)
        return len(F), FF.sum(0), (FF**2).sum(0), F.sum(0), (F**2).sum(0)

    parts = krng.map_blocks(work, realizations, threads)
    n, mean, se = _reduce_blocks([(q[0], q[1], q[2]) for q in parts])
    _, fm, fse = _reduce_blocks([(q[0], q[3], q[4]) for q in parts])
    return CovarianceEstimate(mean, se, n, fm, fse)


def fit_covariance_structure(cov: CovarianceEstimate, T, w=REST) -> dict:
    """Least-squares fit  C = a1 (-S[T]) + a_w S[w w] + a0 epsilon.

    For a Bianchi-consistent field a1 = 1 and the w-structure (the only
    coincident-point remnant of the a2/a3 terms) and pseudoscalar parts vanish.
    """
    wl = mk.lower(mk.four_vector(w))
    basis = [covariance_model(T), structure_tensor(np.outer(wl, wl)), levi_civita()]
    sel = cov.stderr.ravel() > 0
    A = np.stack([b.ravel()[sel] for b in basis], axis=1)
    y = cov.mean.ravel()[sel]
    sw = 1.0 / cov.stderr.ravel()[sel]
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    cov_coef = np.linalg.inv((A * sw[:, None]).T @ (A * sw[:, None]))
    err = np.sqrt(np.diag(cov_coef))
    return {"a1": coef[0], "a1_err": err[0], "a_w": coef[1], "a_w_err": err[1], "a0": coef[2], "a0_err": err[2]}
