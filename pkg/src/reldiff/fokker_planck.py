"""Finite-volume solver for the transport equation restricted to the mass shell.

On functions of the spatial momentum alone the generator reduces to a 3D
diffusion with matrix ``A = alpha^{ij}`` and drift ``B = (Ito drift)^i``.  The
density ``f`` (per d^3p) then obeys ``df/dt = div J`` with

    J = A grad f + (div A - B) f,

discretized conservatively with zero-flux outer boundaries.  Time is the
evolution parameter of the momentum generator scaled by ``tau_c``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse, special

from . import minkowski as mk
from .diffusion import alpha_array, ito_drift
from .errors import ConvergenceError, DomainError
from .spectral import BathParams

TAIL = 1e-12


class NegativityWarning(UserWarning):
    """Cross-diffusion terms let the explicit update dip slightly below zero."""


class StabilityError(ConvergenceError):
    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


def reduce_to_shell(p_spatial, m: float, bath: BathParams, method: str = "exact") -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (A, B) of the autonomous 3D momentum process at ``p_spatial``.

    The 4D operator acts on functions extended constantly in p^0; the result is
    then restricted to p^0 = sqrt(m^2 + |p|^2).
    """
    if not m > 0:
        raise DomainError("mass must be positive")
    p = mk.on_shell(p_spatial, m)
    a = alpha_array(p, bath)
    b = ito_drift(p, bath, warn=False, method=method)
    return a[..., 1:, 1:], b[..., 1:]


def shell_divergence(p_spatial, m: float, bath: BathParams, h: float = 1e-4) -> np.ndarray:
    """sum_j d/dp^j A^{ij} along the shell (central differences + Richardson)."""
    ps = np.asarray(p_spatial, dtype=float)
    step = h * np.maximum(m, np.linalg.norm(ps, axis=-1))[..., None]

    def central(s):
        d = np.zeros(ps.shape)
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            ap = alpha_array(mk.on_shell(ps + s * e, m), bath)[..., 1:, 1:]
            am = alpha_array(mk.on_shell(ps - s * e, m), bath)[..., 1:, 1:]
            d += (ap[..., :, j] - am[..., :, j]) / (2.0 * s)
        return d

    return (4.0 * central(step / 2.0) - central(step)) / 3.0


def flux_coefficients(p_spatial, m: float, bath: BathParams) -> tuple[np.ndarray, np.ndarray]:
    """(A, c) with J = A grad f + c f; both scaled by tau_c."""
    A, B = reduce_to_shell(p_spatial, m, bath)
    c = shell_divergence(p_spatial, m, bath) - B
    return bath.tau_c * A, bath.tau_c * c


# ---------------------------------------------------------------------------
# grids


def shell_pmax(m: float, beta: float, tail: float = TAIL) -> float:
    """|p| where exp(-beta p0) has dropped to ``tail`` of its value at rest."""
    e = m - math.log(tail) / beta
    return math.sqrt(e * e - m * m)


@dataclass
class MomentumGrid:
    """Radial (isotropic, bath rest frame) or axisymmetric (|p_perp|, p_par) grid."""

    geometry: str
    m: float
    faces: tuple  # radial: (r faces,); axisymmetric: (rho faces, z faces)
    w: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def radial(cls, m: float, beta: float, n: int = 512, spacing: str = "rapidity",
               p_max: float | None = None) -> "MomentumGrid":
        """``n`` cells on [0, p_max]; rapidity spacing makes the radial diffusion uniform."""
        p_max = shell_pmax(m, beta) if p_max is None else p_max
        if spacing == "rapidity":
            faces = m * np.sinh(np.linspace(0.0, math.asinh(p_max / m), n + 1))
        elif spacing == "uniform":
            faces = np.linspace(0.0, p_max, n + 1)
        else:
            raise DomainError(f"unknown spacing {spacing!r}")
        return cls("radial", m, (faces,))

    @classmethod
    def axisymmetric(cls, m: float, beta: float, rapidity: float, n_rho: int = 32, n_z: int = 64) -> "MomentumGrid":
        """Lab-frame grid for a bath moving with ``rapidity`` along +z."""
        umax = math.asinh(shell_pmax(m, beta) / m)
        rho = m * np.sinh(np.linspace(0.0, umax, n_rho + 1))
        z = m * np.sinh(np.linspace(rapidity - umax, rapidity + umax, n_z + 1))
        w = np.array([math.cosh(rapidity), 0.0, 0.0, math.sinh(rapidity)])
        return cls("axisymmetric", m, (rho, z), w)

    @property
    def shape(self):
        return tuple(len(f) - 1 for f in self.faces)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def centers(self):
        if self.geometry == "radial":
            r = self.faces[0]
            return (_mapped_centers(r, self.m),)
        rho, z = self.faces
        return _mapped_centers(rho, self.m), _mapped_centers(z, self.m)

    def volumes(self) -> np.ndarray:
        if self.geometry == "radial":
            r = self.faces[0]
            return 4.0 * np.pi / 3.0 * np.diff(r**3)
        rho, z = self.faces
        return (np.pi * np.diff(rho**2))[:, None] * np.diff(z)[None, :]

    def points(self) -> np.ndarray:
        """Spatial momenta of cell centers, shape (size, 3)."""
        if self.geometry == "radial":
            (r,) = self.centers()
            return np.stack([r, 0 * r, 0 * r], -1)
        rho, z = self.centers()
        R, Z = np.meshgrid(rho, z, indexing="ij")
        return np.stack([R.ravel(), 0 * R.ravel(), Z.ravel()], -1)

    def energies(self) -> np.ndarray:
        return np.sqrt(self.m**2 + np.sum(self.points() ** 2, -1))


def _mapped_centers(faces, m):
    # midpoint in rapidity-like variable asinh(p/m)
    return m * np.sinh(0.5 * (np.arcsinh(faces[1:] / m) + np.arcsinh(faces[:-1] / m)))


@dataclass
class GridState:
    density: np.ndarray  # per d^3p, flattened over cells
    time: float = 0.0

    def total(self, grid: MomentumGrid) -> float:
        return float(np.sum(grid.volumes().ravel() * self.density))


# ---------------------------------------------------------------------------
# operator assembly


def _face_weights(a, c, d):
    """Exponentially fitted two-point flux J = lo f_left + hi f_right.

    Exact for constant coefficients; lo <= 0 <= hi at any cell Peclet
    number c d / a, and it reduces to central differences as that goes to 0.
    """
    pe = c * d / a
    return -(a / d) / special.exprel(pe), (a / d) / special.exprel(-pe)


def _radial_operator(grid, coeffs):
    r = grid.faces[0]
    (rc,) = grid.centers()
    n = len(rc)
    V = grid.volumes()
    rf = r[1:-1]
    pts = np.stack([rf, 0 * rf, 0 * rf], -1)
    A, c = coeffs(pts)
    a = A[:, 0, 0]
    cx = c[:, 0]
    d = np.diff(rc)
    S = 4.0 * np.pi * rf**2
    lo, hi = _face_weights(a, cx, d)
    i = np.arange(n - 1)
    rows = np.concatenate([i, i, i + 1, i + 1])
    cols = np.concatenate([i, i + 1, i, i + 1])
    vals = np.concatenate([S * lo / V[i], S * hi / V[i], -S * lo / V[i + 1], -S * hi / V[i + 1]])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _axisym_operator(grid, coeffs):
    rho, z = grid.faces
    rc, zc = grid.centers()
    nr, nz = len(rc), len(zc)
    V = grid.volumes()
    idx = np.arange(nr * nz).reshape(nr, nz)
    rows, cols, vals = [], [], []

    def emit(left, right, S, terms):
        # J = sum coef * f[col]; +S J / V_left on left row, -S J / V_right on right row
        for col, coef in terms:
            rows.extend([left.ravel(), right.ravel()])
            cols.extend([col.ravel(), col.ravel()])
            vals.extend([(S * coef / V.ravel()[left]).ravel(), (-S * coef / V.ravel()[right]).ravel()])

    # centered gradients per cell in z and rho, as (column, coefficient) stencils
    def z_grad(i_arr, j_arr):
        jm = np.clip(j_arr - 1, 0, nz - 1)
        jp = np.clip(j_arr + 1, 0, nz - 1)
        dz = zc[jp] - zc[jm]
        return [(idx[i_arr, jp], 1.0 / dz), (idx[i_arr, jm], -1.0 / dz)]

    def rho_grad(i_arr, j_arr):
        ip = np.clip(i_arr + 1, 0, nr - 1)
        im = np.clip(i_arr - 1, 0, nr - 1)
        # reflection at the axis: f(-rho_0) = f(rho_0)
        lo = np.where(i_arr == 0, -rc[0], rc[im])
        dr = rc[ip] - lo
        return [(idx[ip, j_arr], 1.0 / dr), (idx[im, j_arr], -1.0 / dr)]

    # rho faces
    I, J = np.meshgrid(np.arange(nr - 1), np.arange(nz), indexing="ij")
    rf = rho[1:-1][I]
    zz = zc[J]
    A, c = coeffs(np.stack([rf.ravel(), 0 * rf.ravel(), zz.ravel()], -1))
    A = A.reshape(I.shape + (3, 3))
    c = c.reshape(I.shape + (3,))
    S = 2.0 * np.pi * rf * np.diff(z)[J]
    d = (rc[I + 1] - rc[I])
    left, right = idx[I, J], idx[I + 1, J]
    terms = list(zip((left, right), _face_weights(A[..., 0, 0], c[..., 0], d)))
    for col, coef in z_grad(I, J) + z_grad(I + 1, J):
        terms.append((col, 0.5 * A[..., 0, 2] * coef))
    emit(left, right, S, terms)

    # z faces
    I, J = np.meshgrid(np.arange(nr), np.arange(nz - 1), indexing="ij")
    zf = z[1:-1][J]
    rr = rc[I]
    A, c = coeffs(np.stack([rr.ravel(), 0 * rr.ravel(), zf.ravel()], -1))
    A = A.reshape(I.shape + (3, 3))
    c = c.reshape(I.shape + (3,))
    S = np.pi * np.diff(rho**2)[I]
    d = (zc[J + 1] - zc[J])
    left, right = idx[I, J], idx[I, J + 1]
    terms = list(zip((left, right), _face_weights(A[..., 2, 2], c[..., 2], d)))
    for col, coef in rho_grad(I, J) + rho_grad(I, J + 1):
        terms.append((col, 0.5 * A[..., 2, 0] * coef))
    emit(left, right, S, terms)

    n = nr * nz
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def build_operator(grid: MomentumGrid, bath: BathParams | None = None, coeffs=None) -> sparse.csr_matrix:
    """Sparse L with df/dt = L f.  ``coeffs(p_spatial) -> (A, c)`` overrides the bath."""
    if coeffs is None:
        if bath is None:
            raise DomainError("need a bath or explicit coefficients")
        if grid.geometry == "axisymmetric" and not np.allclose(bath.w, grid.w):
            raise DomainError("axisymmetric grid was built for a different bath velocity")
        if grid.geometry == "radial":
            # the radial grid lives in the bath rest frame
            bath = bath.with_(w=np.array([1.0, 0.0, 0.0, 0.0]))
        coeffs = lambda ps: flux_coefficients(ps, grid.m, bath)  # noqa: E731
    if grid.geometry == "radial":
        return _radial_operator(grid, coeffs)
    return _axisym_operator(grid, coeffs)


def stability_bound(L) -> float:
    """Largest explicit step keeping the diagonal of I + dt L non-negative."""
    return 1.0 / float(np.max(np.abs(L.diagonal())))


def _propagator(L, dt, steps):
    """(I + dt L)^steps; dense binary powering when the grid is small."""
    n = L.shape[0]
    if n <= 4096:
        M = np.eye(n) + dt * L.toarray()
        return np.linalg.matrix_power(M, steps)
    return None


def time_march(grid: MomentumGrid, state: GridState, bath: BathParams | None, dt: float, steps: int,
               L=None, coeffs=None) -> GridState:
    """Explicit Euler steps of the finite-volume scheme with zero-flux boundaries."""
    L = build_operator(grid, bath, coeffs) if L is None else L
    bound = stability_bound(L)
    if dt > bound * (1 + 1e-12):
        raise StabilityError(f"dt = {dt:.3e} exceeds the stability bound {bound:.3e}", 0.9 * bound)
    P = _propagator(L, dt, steps)
    if P is not None:
        f = P @ state.density
    else:
        M = sparse.identity(L.shape[0], format="csr") + dt * L
        f = state.density
        for _ in range(steps):
            f = M @ f
    _check_sign(f)
    return GridState(f, state.time + dt * steps)


def _check_sign(f):
    if np.min(f) < -1e-12 * np.max(np.abs(f)):
        warnings.warn(f"density reached {np.min(f):.3e} (max {np.max(f):.3e})", NegativityWarning, stacklevel=3)


def initial_state(grid: MomentumGrid, beta: float, kind: str = "d3p") -> GridState:
    """Normalized starting profile: ``d3p`` Juttner, ``invariant`` Juttner or ``gaussian``."""
    p0 = grid.energies()
    pts = grid.points()
    if grid.geometry == "radial":
        e = p0
    else:
        e = grid.w[0] * p0 - pts @ grid.w[1:]
    if kind == "d3p":
        f = np.exp(-beta * (e - grid.m))
    elif kind == "invariant":
        f = np.exp(-beta * (e - grid.m)) / p0
    elif kind == "gaussian":
        f = np.exp(-0.5 * beta * np.sum(pts**2, -1) / grid.m)
    else:
        raise DomainError(f"unknown initial profile {kind!r}")
    f = f / np.sum(grid.volumes().ravel() * f)
    return GridState(f)


@dataclass
class StationaryResult:
    state: GridState
    history: list
    fits: dict
    dt: float
    flux_residual: float
    min_density: float
    grid: MomentumGrid


def candidate_profile(grid: MomentumGrid, beta: float, measure: str) -> np.ndarray:
    p0 = grid.energies()
    pts = grid.points()
    e = p0 if grid.geometry == "radial" else grid.w[0] * p0 - pts @ grid.w[1:]
    f = np.exp(-beta * (e - grid.m))
    if measure == "invariant":
        f = f / p0
    elif measure != "d3p":
        raise DomainError(f"unknown measure {measure!r}")
    return f / np.sum(grid.volumes().ravel() * f)


def l1_distance(grid, f, g) -> float:
    return float(np.sum(grid.volumes().ravel() * np.abs(f - g)))


def fit_candidates(grid: MomentumGrid, f: np.ndarray, beta: float) -> dict:
    """L1 distance to exp(-beta p0)/p0 and exp(-beta p0), plus a best-fit beta for each."""
    out = {}
    for measure in ("invariant", "d3p"):
        dist = l1_distance(grid, f, candidate_profile(grid, beta, measure))
        res = optimize.minimize_scalar(lambda b: l1_distance(grid, f, candidate_profile(grid, b, measure)),
                                       bounds=(0.2 * beta, 5.0 * beta), method="bounded",
                                       options={"xatol": 1e-7 * beta})
        out[measure] = {"l1": dist, "fitted_beta": float(res.x), "l1_at_fit": float(res.fun)}
    return out


def cell_fluxes(grid: MomentumGrid, L, f) -> float:
    """Largest face flux magnitude implied by state ``f`` (radial grids)."""
    # with zero boundary flux, the flux through face i+1/2 is the cumulative volume-weighted rate
    V = grid.volumes().ravel()
    rate = V * (L @ f)
    return float(np.max(np.abs(np.cumsum(rate)[:-1])))


def stationary_profile(grid: MomentumGrid, bath: BathParams, tol: float = 1e-8, init: str = "d3p",
                       max_time: float | None = None, coeffs=None, safety: float = 0.9) -> StationaryResult:
    """March until the L1 change per unit time drops below ``tol``.

    Reports the fits against both shell-measure candidates.  Raises
    ConvergenceError (with the residual history) if ``max_time`` runs out.
    """
    L = build_operator(grid, bath, coeffs)
    dt = safety * stability_bound(L)
    state = initial_state(grid, bath.beta, init)
    V = grid.volumes().ravel()
    # friction relaxation rate of a thermal particle sets the chunk length and time budget
    kappa = bath.tau_c * bath.beta * max(bath.eps - bath.pi_eps, 1e-300) / max(grid.m, 3.0 / bath.beta)
    chunk = 1
    while chunk * dt < 0.02 / kappa and chunk < 2**24:
        chunk *= 2
    if max_time is None:
        max_time = 400.0 / kappa
    P = _propagator(L, dt, chunk)
    M = None if P is not None else sparse.identity(L.shape[0], format="csr") + dt * L
    history = []
    f = state.density
    t = 0.0
    while t < max_time:
        if P is not None:
            g = P @ f
        else:
            g = f
            for _ in range(chunk):
                g = M @ g
        rate = float(np.sum(V * np.abs(g - f))) / (chunk * dt)
        f, t = g, t + chunk * dt
        history.append((t, rate))
        if rate < tol:
            break
    else:
        raise ConvergenceError(f"stationary profile not reached by t = {max_time:.3g} (rate {rate:.3e})", history)
    _check_sign(f)
    flux = cell_fluxes(grid, L, f) if grid.geometry == "radial" else float(np.max(np.abs(V * (L @ f))))
    final = GridState(f, t)
    return StationaryResult(final, history, fit_candidates(grid, f, bath.beta), dt, flux, float(np.min(f)), grid)


def radial_probabilities(grid: MomentumGrid, f: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Probability of each |p| bin; mass is spread uniformly in volume inside each cell."""
    V = grid.volumes()
    cdf_r = grid.faces[0]
    cdf = np.concatenate([[0.0], np.cumsum(V * f)])
    # cumulative mass at arbitrary radius: interpolate in r^3 inside each cell
    x = cdf_r**3
    return np.diff(np.interp(np.asarray(edges) ** 3, x, cdf))


def refinement_study(m: float, bath: BathParams, n: int = 128, tol: float = 1e-8) -> dict:
    """Stationary profiles on n, 2n and 4n radial cells compared on the coarse cells.

    The observed order is log2 of the ratio of successive L1 differences.
    """
    coarse = MomentumGrid.radial(m, bath.beta, n)
    edges = coarse.faces[0]
    probs = []
    for k in (1, 2, 4):
        g = MomentumGrid.radial(m, bath.beta, n * k)
        res = stationary_profile(g, bath, tol=tol)
        probs.append(radial_probabilities(g, res.state.density, edges))
    d1 = float(np.sum(np.abs(probs[0] - probs[1])))
    d2 = float(np.sum(np.abs(probs[1] - probs[2])))
    return {"cells": [n, 2 * n, 4 * n], "l1_diff": [d1, d2], "order": math.log2(d1 / d2) if d2 > 0 else float("inf")}
