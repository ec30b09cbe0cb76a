"""Euler-Maruyama simulation of the momentum diffusion and its relaxation.

The momentum obeys dp = tau_c (div alpha + b_fric) ds + sqrt(tau_c) sigma dW
with sigma sigma^T = 2 alpha; positions stream along the four-velocity.  After
each step p^0 is re-solved from the mass shell (configurable).  Ensembles are
split into keyed blocks so results do not depend on the thread count.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import fokker_planck as fp
from . import minkowski as mk
from .diffusion import alpha_divergence_exact, friction_drift, noise_apply
from .equilibrium import shell_weight
from .errors import ConfigError, DomainError, OffShellError
from .rng import STREAM_BRIDGE, STREAM_INIT, STREAM_SDE, block_generator, map_blocks
from .spectral import BathParams

PROJECTIONS = ("resolve-p0", "rescale-spatial", "off")
ADVECTIONS = ("velocity", "momentum")
MOMENT_NAMES = ("energy", "abs_p", "p1", "p2", "p3", "p_sq", "x0")
MIN_SAMPLES = 10_000
ESCAPE_GAMMA = 1e6  # p0 / m beyond which a trajectory is frozen as escaped


class SimulationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    p: np.ndarray
    mass: float = field(default=float("nan"))

    def __post_init__(self):
        x = mk.four_vector(self.x)
        p = mk.four_vector(self.p)
        p2 = float(mk.norm2(p))
        if not p2 > 0:
            raise OffShellError("phase point needs p.p > 0")
        m = math.sqrt(p2)
        if math.isnan(self.mass):
            object.__setattr__(self, "mass", m)
        elif abs(self.mass - m) > 1e-12 * m:
            raise OffShellError(f"cached mass {self.mass} differs from sqrt(p.p) = {m}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)


@dataclass
class SimConfig:
    dt: float = 1e-3
    steps: int = 1000
    ensemble: int = 1000
    seed: int = 0
    projection: str = "resolve-p0"
    tau_c: float | None = None  # None keeps bath.tau_c
    record_every: int = 10
    burn_in: int = 0  # steps before histogram pooling starts
    advection: str = "velocity"
    threads: int = 1
    block_size: int = 1024
    radial_edges: list | None = None
    hist3d_bins: int = 24
    max_halvings: int = 12
    dump_trajectories: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.ensemble < 1 or self.steps < 0 or self.record_every < 1 or self.block_size < 1:
            raise ConfigError("ensemble, record_every and block_size must be >= 1; steps >= 0")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"projection must be one of {PROJECTIONS}")
        if self.advection not in ADVECTIONS:
            raise ConfigError(f"advection must be one of {ADVECTIONS}")
        if self.tau_c is not None and not self.tau_c > 0:
            raise ConfigError("tau_c must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def drift(p, bath: BathParams) -> np.ndarray:
    """Ito drift with the closed-form divergence (no tau_c factor)."""
    return alpha_divergence_exact(p, bath) + friction_drift(p, bath)


def _project(p_new, m, sign, mode):
    """Return projected momenta and a mask of failures."""
    p2 = mk.norm2(p_new)
    bad = ~(p2 > 0)
    if mode == "off":
        return p_new, bad
    out = p_new.copy()
    if mode == "resolve-p0":
        out[..., 0] = sign * np.sqrt(m * m + np.sum(p_new[..., 1:] ** 2, -1))
        return out, bad
    # rescale-spatial keeps p^0
    room = p_new[..., 0] ** 2 - m * m
    bad = bad | (room < 0)
    s = np.linalg.norm(p_new[..., 1:], axis=-1)
    fac = np.sqrt(np.maximum(room, 0.0)) / np.where(s > 0, s, 1.0)
    out[..., 1:] = p_new[..., 1:] * fac[..., None]
    return out, bad


def _raw_step(x, p, m, bath, tau_c, dt, xi, advection):
    if advection == "velocity":
        xv = x + p / np.sqrt(mk.norm2(p))[..., None] * dt
    else:
        xv = x + p * dt
    dp = tau_c * drift(p, bath) * dt + math.sqrt(tau_c * dt) * noise_apply(p, bath, xi)
    return xv, p + dp


def em_step_batch(x, p, m, bath: BathParams, dt: float, xi, projection="resolve-p0", advection="velocity",
                  tau_c=None, bridge_rng=None, max_halvings: int = 12, on_limit: str = "raise"):
    """Vectorized step; returns (x, p, rejected_count).

    Steps that push p.p <= 0 are redone as two half steps whose noises
    (xi +/- eta)/sqrt(2) reproduce the original Brownian increment.
    With ``on_limit="nan"`` rows that exhaust the halving budget come back
    as NaN instead of raising.
    """
    tau_c = bath.tau_c if tau_c is None else tau_c
    sign = np.sign(p[..., 0])
    xn, pn = _raw_step(x, p, m, bath, tau_c, dt, xi, advection)
    pn, bad = _project(pn, m, sign, projection)
    rejected = int(np.count_nonzero(bad))
    if rejected:
        if max_halvings <= 0:
            if on_limit != "nan":
                raise DomainError("step halving limit reached while keeping p.p > 0")
            xn[bad], pn[bad] = np.nan, np.nan
            return xn, pn, rejected
        if bridge_rng is None:
            bridge_rng = np.random.default_rng(0)
        idx = np.nonzero(bad)
        eta = bridge_rng.standard_normal(xi[idx].shape)
        x1, p1, r1 = em_step_batch(x[idx], p[idx], m[idx], bath, dt / 2, (xi[idx] + eta) / math.sqrt(2),
                                   projection, advection, tau_c, bridge_rng, max_halvings - 1, on_limit)
        live = np.isfinite(p1).all(-1)
        x2, p2 = x1.copy(), p1.copy()
        x2[live], p2[live], r2 = em_step_batch(x1[live], p1[live], m[idx][live], bath, dt / 2,
                                               ((xi[idx] - eta) / math.sqrt(2))[live], projection, advection,
                                               tau_c, bridge_rng, max_halvings - 1, on_limit)
        xn[idx], pn[idx] = x2, p2
        rejected += r1 + r2
    return xn, pn, rejected


def em_step(state: PhasePoint, bath: BathParams, dt: float, noise, projection="resolve-p0",
            advection="velocity", tau_c=None) -> PhasePoint:
    """One Euler-Maruyama step of a single phase point; ``noise`` is 3 standard normals."""
    x, p, _ = em_step_batch(state.x[None], state.p[None], np.array([state.mass]), bath, dt,
                            np.asarray(noise, dtype=float)[None], projection, advection, tau_c)
    if projection == "off":
        return PhasePoint(x[0], p[0])
    return PhasePoint(x[0], p[0], state.mass)


# ---------------------------------------------------------------------------
# initial distributions


@dataclass
class DeltaInit:
    """Every trajectory starts at the same phase point."""

    p: np.ndarray
    x: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def sample(self, rng, n):
        p = mk.four_vector(self.p)
        if not mk.norm2(p) > 0:
            raise OffShellError("initial momentum must be timelike")
        return np.tile(mk.four_vector(self.x), (n, 1)), np.tile(p, (n, 1))

    def describe(self):
        return {"kind": "delta", "p": list(map(float, self.p)), "x": list(map(float, self.x))}


@dataclass
class ProfileInit:
    """Isotropic |p| drawn from a radial grid profile in the frame of ``w``, boosted to the lab."""

    grid: fp.MomentumGrid
    density: np.ndarray
    w: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def sample(self, rng, n):
        r = self.grid.faces[0]
        cdf = np.concatenate([[0.0], np.cumsum(self.grid.volumes() * self.density)])
        cdf /= cdf[-1]
        u = rng.random(n)
        # uniform in volume inside the chosen cell
        rad = np.cbrt(np.interp(u, cdf, r**3))
        d = rng.standard_normal((n, 3))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        p_rest = mk.on_shell(rad[:, None] * d, self.grid.m)
        p = mk.boost_to_rest(self.w).inverse()(p_rest)
        return np.zeros((n, 4)), p

    def describe(self):
        return {"kind": "profile", "cells": int(self.grid.size), "m": float(self.grid.m)}


def juttner_init(m: float, beta: float, w=None, measure: str = "invariant", cells: int = 4096) -> ProfileInit:
    grid = fp.MomentumGrid.radial(m, beta, cells)
    w = np.array([1.0, 0.0, 0.0, 0.0]) if w is None else mk.four_vector(w)
    return ProfileInit(grid, fp.candidate_profile(grid, beta, measure), w)


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleResult:
    times: np.ndarray
    moments: dict
    moment_stderr: dict
    radial_edges: np.ndarray
    radial_counts: np.ndarray
    radial_overflow: int
    hist3d_edges: np.ndarray
    hist3d_counts: np.ndarray
    rejected: int
    p2_drift: np.ndarray  # max |p.p - m^2| / m^2 per record
    p2_mean_drift: np.ndarray  # mean (p.p - m^2) / m^2 per record
    escaped: int
    samples: int
    config: dict
    bath: dict
    init: dict
    trajectories: np.ndarray | None = None
    warnings: list = field(default_factory=list)


def default_edges(m: float, beta: float, bins: int = 60) -> np.ndarray:
    return np.linspace(0.0, fp.shell_pmax(m, beta, 1e-7), bins + 1)


def _records(cfg: SimConfig) -> np.ndarray:
    return np.arange(cfg.record_every, cfg.steps + 1, cfg.record_every)


def _block(cfg: SimConfig, bath: BathParams, init, edges, edges3, b, start, stop):
    n = stop - start
    rng = block_generator(cfg.seed, STREAM_SDE, b)
    bridge = block_generator(cfg.seed, STREAM_BRIDGE, b)
    x, p = init.sample(block_generator(cfg.seed, STREAM_INIT, b), n)
    m = np.sqrt(mk.norm2(p))
    to_rest = mk.boost_to_rest(bath.w)
    recs = _records(cfg)
    nrec = len(recs)
    sums = np.zeros((nrec, len(MOMENT_NAMES)))
    sumsq = np.zeros_like(sums)
    drift2 = np.zeros(nrec)
    mean2 = np.zeros(nrec)
    alive = np.ones(n, dtype=bool)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    counts3 = np.zeros((len(edges3) - 1,) * 3, dtype=np.int64)
    overflow = 0
    pooled = 0
    keep = min(cfg.dump_trajectories - start, n) if cfg.dump_trajectories > start else 0
    dump = np.zeros((nrec, keep, 8)) if keep > 0 else None
    rejected = 0
    k = 0
    for step in range(1, cfg.steps + 1):
        xi = rng.standard_normal((n, 3))
        xa, pa, r = em_step_batch(x[alive], p[alive], m[alive], bath, cfg.dt, xi[alive], cfg.projection,
                                  cfg.advection, bridge_rng=bridge, max_halvings=cfg.max_halvings,
                                  on_limit="nan")
        rejected += r
        # unresolvable or runaway rows keep their last state and stop evolving
        ok = np.isfinite(pa).all(-1) & np.isfinite(xa).all(-1)
        rows = np.nonzero(alive)[0]
        x[rows[ok]], p[rows[ok]] = xa[ok], pa[ok]
        alive[rows[~ok]] = False
        alive &= np.abs(p[:, 0]) < ESCAPE_GAMMA * m
        if k < nrec and step == recs[k]:
            pr = to_rest(p)
            pabs = np.linalg.norm(pr[:, 1:], axis=-1)
            vals = np.stack([pr[:, 0], pabs, pr[:, 1], pr[:, 2], pr[:, 3], pabs**2, x[:, 0]], -1)
            sums[k] = vals.sum(0)
            sumsq[k] = (vals**2).sum(0)
            rel2 = (mk.norm2(p) - m * m) / (m * m)
            drift2[k] = float(np.max(np.abs(rel2)))
            mean2[k] = float(np.sum(rel2))
            if dump is not None:
                dump[k] = np.concatenate([x[:keep], p[:keep]], -1)
            if step > cfg.burn_in:
                c, _ = np.histogram(pabs, edges)
                counts += c
                overflow += int(np.count_nonzero(pabs >= edges[-1]))
                c3, _ = np.histogramdd(pr[:, 1:], (edges3,) * 3)
                counts3 += c3.astype(np.int64)
                pooled += n
            k += 1
    return sums, sumsq, drift2, counts, counts3, overflow, pooled, rejected, dump, mean2, int(np.count_nonzero(~alive))


def run_ensemble(config: SimConfig, bath: BathParams, init) -> EnsembleResult:
    """Simulate ``config.ensemble`` trajectories; deterministic given the seed and block size."""
    if config.tau_c is not None:
        bath = bath.with_(tau_c=config.tau_c)
    if config.radial_edges is not None:
        edges = np.asarray(config.radial_edges, dtype=float)
    else:
        _, p0 = init.sample(block_generator(config.seed, STREAM_INIT, 0), 1)
        edges = default_edges(float(np.sqrt(mk.norm2(p0[0]))), bath.beta)
    if np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise ConfigError("radial_edges must be increasing and non-negative")
    edges3 = np.linspace(-edges[-1], edges[-1], config.hist3d_bins + 1)
    parts = map_blocks(lambda b, s, e: _block(config, bath, init, edges, edges3, b, s, e),
                       config.ensemble, config.threads, config.block_size)
    n = config.ensemble
    sums = sum(pt[0] for pt in parts)
    sumsq = sum(pt[1] for pt in parts)
    mean = sums / n
    var = np.maximum(sumsq / n - mean**2, 0.0)
    se = np.sqrt(var / max(n - 1, 1))
    dumps = [pt[8] for pt in parts if pt[8] is not None]
    notes = []
    rejected = int(sum(pt[7] for pt in parts))
    if rejected:
        notes.append(f"{rejected} steps rejected and retried at half size")
    pooled = int(sum(pt[6] for pt in parts))
    overflow = int(sum(pt[5] for pt in parts))
    escaped = int(sum(pt[10] for pt in parts))
    if escaped:
        notes.append(f"{escaped} trajectories ran away (p0 above {ESCAPE_GAMMA:g} m or step halving exhausted) and were frozen")
    if pooled and overflow > 1e-3 * pooled:
        notes.append(f"{overflow} of {pooled} pooled samples beyond the last radial edge")
    for msg in notes:
        warnings.warn(msg, SimulationWarning, stacklevel=2)
    return EnsembleResult(
        times=_records(config) * config.dt,
        moments={k: mean[:, i] for i, k in enumerate(MOMENT_NAMES)},
        moment_stderr={k: se[:, i] for i, k in enumerate(MOMENT_NAMES)},
        radial_edges=edges,
        radial_counts=sum(pt[3] for pt in parts),
        radial_overflow=overflow,
        hist3d_edges=edges3,
        hist3d_counts=sum(pt[4] for pt in parts),
        rejected=rejected,
        p2_drift=np.max([pt[2] for pt in parts], axis=0) if parts else np.zeros(0),
        p2_mean_drift=sum(pt[9] for pt in parts) / n,
        escaped=escaped,
        samples=pooled,
        config=config.to_dict(),
        bath=bath.to_dict(),
        init=init.describe(),
        trajectories=np.concatenate(dumps, axis=1) if dumps else None,
        warnings=notes,
    )


# ---------------------------------------------------------------------------
# comparison with the stationary profile


@dataclass
class StationarityReport:
    distance: float  # L1 to the reference profile at the bath beta
    fitted_beta: float
    distance_at_fit: float
    candidates: dict  # analytic measure candidates -> L1
    samples: int
    low_confidence: bool

    def to_dict(self):
        return asdict(self)


def _profile_family(grid, f, beta):
    """exp(-b (p0 - m)) mu(p) with mu read off the reference profile."""
    p0 = grid.energies()
    log_mu = np.log(np.maximum(f, 1e-300)) + beta * (p0 - grid.m)
    return lambda b: np.exp(log_mu - b * (p0 - grid.m))


def stationarity_distance(edges, counts, m: float, bath: BathParams, reference=None,
                          overflow: int = 0, samples: int | None = None) -> StationarityReport:
    """L1 distance between a rest-frame |p| histogram and the stationary family.

    ``reference`` is a ``StationaryResult`` (or ``(grid, density)``) from the
    Fokker-Planck solver; it is computed on 512 rapidity-spaced cells if absent.
    """
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    total = counts.sum() + overflow
    if total <= 0:
        raise DomainError("empty histogram")
    emp = counts / total
    if reference is None:
        reference = fp.stationary_profile(fp.MomentumGrid.radial(m, bath.beta, 512), bath)
    grid, f = (reference.grid, reference.state.density) if hasattr(reference, "grid") else reference
    if abs(grid.m - m) > 1e-12 * m:
        raise DomainError("reference profile was computed for a different mass")
    family = _profile_family(grid, f, bath.beta)

    def dist(b):
        g = family(b)
        g = g / np.sum(grid.volumes() * g)
        prob = fp.radial_probabilities(grid, g, edges)
        # mass beyond the last edge counts as one extra bin
        return float(np.sum(np.abs(emp - prob)) + abs(overflow / total - (1.0 - prob.sum())))

    d0 = dist(bath.beta)
    res = optimize.minimize_scalar(dist, bounds=(0.5 * bath.beta, 2.0 * bath.beta), method="bounded",
                                   options={"xatol": 1e-6 * bath.beta})
    cands = {}
    fine = np.linspace(edges[0], edges[-1], 16 * (len(edges) - 1) + 1)
    for measure in ("invariant", "d3p"):
        wgt = shell_weight(fine, m, bath.beta, measure)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (wgt[1:] + wgt[:-1]) * np.diff(fine))])
        norm = _shell_norm(m, bath.beta, measure)
        prob = np.diff(np.interp(edges, fine, cum)) / norm
        cands[measure] = float(np.sum(np.abs(emp - prob)) + abs(overflow / total - (1.0 - prob.sum())))
    n = int(total if samples is None else samples)
    return StationarityReport(d0, float(res.x), float(res.fun), cands, n, n < MIN_SAMPLES)


def _shell_norm(m, beta, measure):
    top = fp.shell_pmax(m, beta, 1e-16)
    val, _ = integrate.quad(lambda r: shell_weight(r, m, beta, measure), 0.0, top, limit=400, epsabs=0.0)
    return val
