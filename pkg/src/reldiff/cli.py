"""Command-line batch experiments.

    reldiff <command> [--config FILE] [--seed N] [--out DIR] [--format csv,json,png]
                      [--threads N] [--friction-sign flux-zero|paper-eq56]
                      [--advection velocity|momentum]

Commands: alpha, spectral, simulate, kubo, fokker-planck, equilibrium-check.
Exit codes: 0 success, 1 usage/config error, 2 domain/invariant error,
3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import diffusion as dif
from . import equilibrium as eq
from . import fokker_planck as fp
from . import io
from . import minkowski as mk
from . import plotting
from . import randomfield as rf
from . import sde
from . import spectral as sp
from .errors import ConfigError, ReldiffError
from .rng import STREAM_INIT, STREAM_POINTS, block_generator

CONVENTION_NOTES = {
    "friction_sign": "flux-zero uses b = +beta (eps - pi_eps) P w, which makes the Juttner flux vanish and "
                     "decelerates fast particles; paper-eq56 flips the sign of b for comparison runs",
    "advection": "velocity advances x by p / sqrt(p.p) per unit proper time; momentum uses p",
}

COMMANDS = ("alpha", "spectral", "simulate", "kubo", "fokker-planck", "equilibrium-check")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


class Run:
    """Output directory, format switches and the metadata record."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def wants(self, fmt: str) -> bool:
        return fmt in self.cfg["format"]

    def json(self, name: str, data: dict):
        if self.wants("json"):
            self.files.append(str(io.write_json(self.out / name, data)))

    def csv(self, name: str, header, rows):
        if self.wants("csv"):
            self.files.append(str(io.write_csv(self.out / name, header, rows)))

    def figure(self, name: str, func, *args, **kw):
        if self.wants("png"):
            self.files.append(str(func(*args, self.out / name, **kw)))

    def metadata(self, extra: dict | None = None):
        meta = {
            "command": self.command,
            "version": __version__,
            "config": io.public_config(self.cfg),
            "conventions": self.cfg["conventions"],
            "conventions_note": CONVENTION_NOTES,
            "seed": self.cfg["seed"],
            "files": sorted(Path(f).name for f in self.files),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        meta.update(extra or {})
        io.write_json(self.out / "metadata.json", meta)


def _momentum(block: dict, key: str = "p") -> np.ndarray:
    if key in block:
        return io.config_vector(block[key], key)
    if "p_spatial" in block:
        return mk.on_shell(np.asarray(block["p_spatial"], dtype=float), float(block.get("m", 1.0)))
    raise ConfigError(f"need '{key}' (four-vector) or 'p_spatial' and 'm'")


def _bath_block(bath: sp.BathParams) -> dict:
    return {"beta": bath.beta, "eps": bath.eps, "pi_eps": bath.pi_eps, "lam": bath.lam,
            "tau_c": bath.tau_c, "w": bath.w.tolist()}


# ---------------------------------------------------------------------------
# commands


def cmd_alpha(run: Run) -> int:
    cfg = run.cfg
    bath = io.make_bath(cfg)
    p = _momentum(cfg.get("alpha", {}))
    D = dif.alpha(p, bath)
    lam = D.eigenvalues()
    print("alpha^{mu nu} =")
    for row in D.alpha:
        print("  " + "  ".join(f"{v: .10e}" for v in row))
    result = {"alpha": D.alpha, "eigenvalues": lam, "hat_w": dif.hat_w(p, bath.w),
              "friction_drift": dif.friction_drift(p, bath), "p_dot_alpha": mk.lower(p) @ D.alpha}
    echo = {"schema_version": io.SCHEMA_VERSION, "command": "alpha", "bath": _bath_block(bath),
            "alpha": {"p": p.tolist()}, "conventions": cfg["conventions"], "result": result}
    run.json("alpha.json", echo)
    run.csv("alpha.csv", ["mu", "nu0", "nu1", "nu2", "nu3"], [[i, *row] for i, row in enumerate(D.alpha)])
    return 0


def cmd_spectral(run: Run) -> int:
    cfg = run.cfg
    G = io.make_density(cfg)
    if G is None:
        raise ConfigError("spectral command needs a spectral block")
    G.check()
    w = io.frame_vector(cfg.get("bath", {}))
    beta = float(cfg.get("bath", {}).get("beta", cfg["spectral"].get("beta", 1.0)))
    e = sp.energy_density_q(G, w)
    p = sp.pressure_q(G, w)
    eps, pi_eps = float(e.value), float(p.value)
    report = {
        "eps": eps, "pi_eps": pi_eps, "eps_err": e.error, "pi_eps_err": p.error,
        "lam": beta * (eps - pi_eps), "beta": beta,
        "eps_over_3pi": eps / (3 * pi_eps) if pi_eps > 0 else None,
        "inequality_holds": bool(eps >= 3 * pi_eps - 1e-9 * abs(eps) and pi_eps >= -1e-9 * abs(eps)),
        "converged": bool(e.converged and p.converged),
        "r_current": None,
        "tau_corr_estimate": rf.correlation_time_estimate(G, w) if G.total_mass() > 0 else None,
    }
    if cfg["spectral"].get("preset", "planck") == "planck":
        norm = float(cfg["spectral"].get("norm", 1.0))
        _, r = sp.bose_current(G.beta, w, norm)
        report["r_current"] = r
        report["r_current_closed_form"] = sp.bose_current_closed_form(G.beta, norm)
    for k in ("eps", "pi_eps", "lam", "eps_over_3pi", "r_current"):
        print(f"{k:>14s} = {report[k]}")
    run.json("spectral.json", report)
    rows = []
    for shell, c in G.shells():
        if hasattr(shell, "weight") and np.isfinite(shell.kmax):
            k = np.linspace(shell.kmin, shell.kmax, 400)
            rows.extend([[shell.mu, ki, c * wi] for ki, wi in zip(k, shell.weight(k))])
    if rows:
        arr = np.array(rows)
        run.csv("spectral_weight.csv", ["mu", "k", "weight"], arr)
        run.figure("spectral_weight.png", plotting.spectral_weight, arr[:, 1], arr[:, 2],
                   title=cfg["spectral"].get("preset", "planck"))
    return 0


def _init_from(block: dict, bath: sp.BathParams, beta: float):
    kind = block.get("kind", "juttner")
    if kind == "delta":
        return sde.DeltaInit(_momentum(block), np.asarray(block.get("x", np.zeros(4)), dtype=float))
    m = float(block.get("m", 1.0))
    if kind == "juttner":
        return sde.juttner_init(m, beta, bath.w, block.get("measure", "invariant"))
    if kind == "stationary":
        res = fp.stationary_profile(fp.MomentumGrid.radial(m, beta, int(block.get("cells", 512))), bath)
        return sde.ProfileInit(res.grid, res.state.density, bath.w)
    raise ConfigError(f"unknown init kind {kind!r}")


def cmd_simulate(run: Run) -> int:
    cfg = run.cfg
    bath = io.make_bath(cfg)
    block = dict(cfg.get("sim", {}))
    init = _init_from(block.pop("init", {}), bath, bath.beta)
    reference_cells = int(block.pop("reference_cells", 512))
    try:
        sim = sde.SimConfig(**block, seed=cfg["seed"], threads=cfg["threads"],
                            advection=cfg["conventions"]["advection"])
    except TypeError as exc:
        raise ConfigError(f"bad sim block: {exc}") from None
    res = sde.run_ensemble(sim, bath, init)
    names = list(sde.MOMENT_NAMES)
    rows = [[t] + [res.moments[n][i] for n in names] + [res.moment_stderr[n][i] for n in names]
            + [res.p2_drift[i], res.p2_mean_drift[i]] for i, t in enumerate(res.times)]
    run.csv("moments.csv", ["time"] + names + [n + "_stderr" for n in names] + ["p2_drift", "p2_mean_drift"], rows)
    _, p_init = init.sample(block_generator(sim.seed, STREAM_INIT, 0), 1)
    m = float(np.sqrt(mk.norm2(p_init[0])))
    summary = {"rejected": res.rejected, "escaped": res.escaped, "samples": res.samples, "radial_overflow": res.radial_overflow,
               "max_p2_drift": float(res.p2_drift.max()) if len(res.p2_drift) else 0.0,
               "warnings": res.warnings, "init": res.init, "bath": res.bath, "mass": m}
    ref_probs = None
    if res.samples > 0:
        ref = fp.stationary_profile(fp.MomentumGrid.radial(m, bath.beta, reference_cells), bath.with_(friction_sign="flux-zero"))
        ref_probs = fp.radial_probabilities(ref.grid, ref.state.density, res.radial_edges)
        rep = sde.stationarity_distance(res.radial_edges, res.radial_counts, m, bath, ref,
                                        overflow=res.radial_overflow)
        summary["stationarity"] = rep.to_dict()
        print(f"stationarity L1 = {rep.distance:.4g}, fitted beta = {rep.fitted_beta:.6g} "
              f"(bath beta {bath.beta:.6g}), samples = {rep.samples}")
    e = res.radial_edges
    run.csv("radial_hist.csv", ["lo", "hi", "count", "reference_probability"],
            [[e[i], e[i + 1], int(res.radial_counts[i]), ref_probs[i] if ref_probs is not None else float("nan")]
             for i in range(len(e) - 1)])
    e3 = res.hist3d_edges
    nz = np.argwhere(res.hist3d_counts > 0)
    run.csv("hist3d.csv", ["px_lo", "py_lo", "pz_lo", "width", "count"],
            [[e3[i], e3[j], e3[k], e3[1] - e3[0], int(res.hist3d_counts[i, j, k])] for i, j, k in nz])
    if res.trajectories is not None:
        tr = res.trajectories
        run.csv("trajectories.csv", ["time", "trajectory", "x0", "x1", "x2", "x3", "p0", "p1", "p2", "p3"],
                [[res.times[r], j, *tr[r, j]] for r in range(tr.shape[0]) for j in range(tr.shape[1])])
    run.json("ensemble.json", summary)
    run.figure("moments.png", plotting.moments, res.times, res.moments, res.moment_stderr)
    run.figure("radial_hist.png", plotting.radial_histogram, res.radial_edges, res.radial_counts, ref_probs=ref_probs)
    return 0


def cmd_kubo(run: Run) -> int:
    cfg = run.cfg
    G = io.make_density(cfg)
    if G is None:
        raise ConfigError("kubo command needs a spectral block")
    block = cfg.get("kubo", {})
    w = io.frame_vector(cfg.get("bath", {}))
    beta = float(cfg.get("bath", {}).get("beta", cfg["spectral"].get("beta", 1.0)))
    p = _momentum(block)
    est = rf.kubo_alpha_estimate(G, p, w, tau=float(block.get("tau", 1e-3)),
                                 ensembles=int(block.get("ensembles", 10000)), seed=cfg["seed"],
                                 n_modes=int(block.get("n_modes", 8)), steps=int(block.get("steps", 4)),
                                 threads=cfg["threads"], override=bool(block.get("override", False)), beta=beta)
    ana = est.analytic if est.analytic is not None else np.full((4, 4), np.nan)
    z = est.z_scores() if est.analytic is not None else np.full((4, 4), np.nan)
    rows = [[i, j, est.mean[i, j], est.stderr[i, j], ana[i, j], z[i, j]] for i in range(4) for j in range(4)]
    run.csv("kubo.csv", ["mu", "nu", "estimate", "stderr", "analytic", "z"], rows)
    finite = z[np.isfinite(z)]
    summary = {"realizations": est.realizations, "tau": est.tau, "seed": est.seed,
               "relative_error": est.relative_error() if est.analytic is not None else None,
               "max_abs_z": float(np.max(np.abs(finite))) if finite.size else None, "meta": est.meta,
               "p": p.tolist(), "w": w.tolist()}
    print(f"{'mu':>3s} {'nu':>3s} {'estimate':>14s} {'stderr':>11s} {'analytic':>14s} {'z':>7s}")
    for r in rows:
        print(f"{r[0]:3d} {r[1]:3d} {r[2]:14.6e} {r[3]:11.3e} {r[4]:14.6e} {r[5]:7.2f}")
    ti = block.get("time_integrated")
    if ti:
        t = rf.kubo_alpha_time_integrated(G, p, w, s_max=float(ti.get("s_max", 20.0)),
                                          ensembles=int(ti.get("ensembles", 2000)), seed=cfg["seed"],
                                          n_modes=int(ti.get("n_modes", 8)), threads=cfg["threads"], beta=beta)
        summary["time_integrated"] = {"tau_c": t.tau_c, "tau_c_stderr": t.tau_c_stderr,
                                      "tail_ratio": t.tail_ratio, "truncated": t.truncated,
                                      "tensor": t.tensor, "stderr": t.stderr, "meta": t.meta}
        run.csv("kubo_running.csv", ["s"] + [f"a{i}{j}" for i in range(4) for j in range(4)],
                [[s, *t.running[k].ravel()] for k, s in enumerate(t.s_grid)])
    run.json("kubo.json", summary)
    if est.analytic is not None:
        run.figure("kubo_z.png", plotting.z_scores, z)
    return 0


def cmd_fokker_planck(run: Run) -> int:
    cfg = run.cfg
    bath = io.make_bath(cfg)
    g = dict(cfg.get("grid", {}))
    m = float(g.get("m", 1.0))
    tol = float(g.get("tol", 1e-8))
    geometry = g.get("geometry", "radial")
    if geometry == "radial":
        grid = fp.MomentumGrid.radial(m, bath.beta, int(g.get("cells", 512)), g.get("spacing", "rapidity"),
                                      g.get("p_max"))
    elif geometry == "axisymmetric":
        w = bath.w
        if np.linalg.norm(w[1:3]) > 1e-12 * w[0]:
            raise ConfigError("axisymmetric grids need the bath moving along z")
        grid = fp.MomentumGrid.axisymmetric(m, bath.beta, float(np.arcsinh(w[3])), int(g.get("n_rho", 32)),
                                            int(g.get("n_z", 64)))
    else:
        raise ConfigError(f"unknown geometry {geometry!r}")
    res = fp.stationary_profile(grid, bath, tol=tol, init=g.get("init", "d3p"), max_time=g.get("max_time"))
    f = res.state.density
    summary = {"fits": res.fits, "dt": res.dt, "time": res.state.time, "steps_chunks": len(res.history),
               "flux_residual": res.flux_residual, "min_density": res.min_density,
               "total_probability": res.state.total(grid), "geometry": geometry, "cells": grid.size,
               "bath": bath.to_dict()}
    cand = {k: fp.candidate_profile(grid, bath.beta, k) for k in ("invariant", "d3p")}
    if geometry == "radial":
        (r,) = grid.centers()
        run.csv("profile.csv", ["p_abs", "density", "invariant_candidate", "d3p_candidate"],
                np.column_stack([r, f, cand["invariant"], cand["d3p"]]))
        run.figure("profile.png", plotting.radial_profile, r, f,
                   candidates={"exp(-beta p0)/p0": cand["invariant"], "exp(-beta p0)": cand["d3p"]})
    else:
        pts = grid.points()
        run.csv("profile2d.csv", ["p_perp", "p_par", "density", "invariant_candidate", "d3p_candidate"],
                np.column_stack([pts[:, 0], pts[:, 2], f, cand["invariant"], cand["d3p"]]))
    run.csv("history.csv", ["time", "l1_rate"], res.history)
    run.figure("history.png", plotting.history, *zip(*res.history))
    if g.get("refine") and geometry == "radial":
        summary["refinement"] = fp.refinement_study(m, bath, max(int(g.get("cells", 512)) // 4, 16), tol)
    for k, v in res.fits.items():
        print(f"{k:>10s}: L1 = {v['l1']:.4e}, fitted beta = {v['fitted_beta']:.6g}")
    if "refinement" in summary:
        print(f"observed order under refinement: {summary['refinement']['order']:.3f}")
    run.json("fits.json", summary)
    return 0


def cmd_equilibrium_check(run: Run) -> int:
    cfg = run.cfg
    bath = io.make_bath(cfg)
    block = cfg.get("equilibrium", {})
    n = int(block.get("samples", 10000))
    lo, hi = float(block.get("m_min", 0.1)), float(block.get("m_max", 5.0))
    scale_p = float(block.get("p_scale", 3.0))
    params = eq.JuttnerParams(beta=bath.beta, gamma=float(block.get("gamma", 0.0)), w=bath.w)
    rng = block_generator(cfg["seed"], STREAM_POINTS, 0)
    masses = rng.uniform(lo, hi, n)
    p = mk.on_shell(rng.normal(size=(n, 3)) * scale_p, masses)
    p[0] = masses[0] * bath.w  # comoving sample
    a = dif.alpha_array(p, bath)
    grad = eq.log_gradient(p, params)
    up = np.einsum("...mn,...n->...m", a, grad)
    b = dif.friction_drift(p, bath)
    res = up - b  # flux per unit Juttner density
    # size of the terms being cancelled; the drifts themselves vanish at comoving points
    scale = np.maximum(np.max(np.abs(a), axis=(-1, -2)) * np.max(np.abs(grad), -1), 1e-300)
    rel = np.max(np.abs(res), -1) / scale
    rev = eq.reversible_drift(p, bath, params)
    ddiff = np.max(np.abs(rev - b), -1) / scale
    summary = {"samples": n, "friction_sign": bath.friction_sign, "lam": bath.lam,
               "max_rel_flux_residual": float(rel.max()), "median_rel_flux_residual": float(np.median(rel)),
               "max_rel_drift_difference": float(ddiff.max()),
               "flux_zero": bool(rel.max() <= 1e-10), "detailed_balance": bool(ddiff.max() <= 1e-12),
               "comoving_row_residual": float(np.max(np.abs(res[0])))}
    print(f"friction sign {bath.friction_sign}: max relative flux residual {rel.max():.3e}, "
          f"reversible vs friction drift {ddiff.max():.3e}")
    run.csv("residuals.csv", ["index", "m", "p0", "p1", "p2", "p3", "residual", "scale", "rel_residual",
                              "rel_drift_difference"],
            [[i, masses[i], *p[i], np.max(np.abs(res[i])), scale[i], rel[i], ddiff[i]] for i in range(n)])
    run.json("summary.json", summary)
    run.figure("residuals.png", plotting.residual_histogram, rel, label=f"friction sign {bath.friction_sign}")
    return 0


HANDLERS = {
    "alpha": cmd_alpha,
    "spectral": cmd_spectral,
    "simulate": cmd_simulate,
    "kubo": cmd_kubo,
    "fokker-planck": cmd_fokker_planck,
    "equilibrium-check": cmd_equilibrium_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="reldiff", description="Relativistic momentum diffusion in a thermal field.")
    ap.add_argument("--version", action="version", version=f"reldiff {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON or YAML run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", help="comma list from csv,json,png")
        p.add_argument("--threads", type=int)
        p.add_argument("--friction-sign", choices=("flux-zero", "paper-eq56"))
        p.add_argument("--advection", choices=("velocity", "momentum"))
        if name == "alpha":
            p.add_argument("--p", type=float, nargs=4, metavar=("P0", "P1", "P2", "P3"))
            p.add_argument("--eps", type=float)
            p.add_argument("--pi-eps", type=float)
            p.add_argument("--beta", type=float)
        if name == "simulate":
            p.add_argument("--ensemble", type=int)
            p.add_argument("--steps", type=int)
            p.add_argument("--dt", type=float)
        if name == "kubo":
            p.add_argument("--realizations", type=int)
        if name == "fokker-planck":
            p.add_argument("--refine", action="store_true")
            p.add_argument("--cells", type=int)
        if name == "equilibrium-check":
            p.add_argument("--samples", type=int)
    return ap


def _overrides(args) -> dict:
    o = {"seed": args.seed, "out": args.out, "format": args.format, "threads": args.threads}
    conv = {k: v for k, v in (("friction_sign", args.friction_sign), ("advection", args.advection)) if v}
    if conv:
        o["conventions"] = conv
    get = lambda k: getattr(args, k, None)  # noqa: E731
    bath = {k: get(a) for k, a in (("eps", "eps"), ("pi_eps", "pi_eps"), ("beta", "beta")) if get(a) is not None}
    if bath:
        o["bath"] = bath
    if get("p") is not None:
        o["alpha"] = {"p": list(args.p)}
    sim = {k: get(k) for k in ("ensemble", "steps", "dt") if get(k) is not None}
    if sim:
        o["sim"] = sim
    if get("realizations") is not None:
        o["kubo"] = {"ensembles": args.realizations}
    grid = {}
    if get("refine"):
        grid["refine"] = True
    if get("cells") is not None:
        grid["cells"] = args.cells
    if grid:
        o["grid"] = grid
    if get("samples") is not None:
        o["equilibrium"] = {"samples": args.samples}
    return o


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = io.resolve(io.load_config(args.config), _overrides(args))
        run = Run(args.command, cfg)
        code = HANDLERS[args.command](run)
        run.metadata()
        return code
    except ReldiffError as exc:
        print(f"reldiff {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
