"""Matplotlib figures for the command-line reports (Agg backend, PNG files)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps the files reproducible
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def spectral_weight(k, weight, path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(k, weight)
    ax.set_xlabel("|k|")
    ax.set_ylabel("|k|^2 g(|k|)")
    ax.set_title(title)
    return _save(fig, path)


def radial_profile(r, density, path: Path, candidates: dict | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(r, density, label="stationary profile", lw=2)
    for name, c in (candidates or {}).items():
        ax.semilogy(r, c, "--", label=name)
    ax.set_xlabel("|p| (bath frame)")
    ax.set_ylabel("density per d^3p")
    ax.legend()
    return _save(fig, path)


def history(times, rates, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(times, rates)
    ax.set_xlabel("time")
    ax.set_ylabel("L1 change per unit time")
    return _save(fig, path)


def moments(times, series: dict, errors: dict, path: Path) -> Path:
    names = [n for n in ("energy", "abs_p", "p_sq") if n in series]
    fig, axes = plt.subplots(len(names), 1, figsize=(5, 2.2 * len(names)), sharex=True)
    for ax, n in zip(np.atleast_1d(axes), names):
        ax.plot(times, series[n])
        ax.fill_between(times, series[n] - errors[n], series[n] + errors[n], alpha=0.3)
        ax.set_ylabel(n)
    np.atleast_1d(axes)[-1].set_xlabel("evolution parameter")
    return _save(fig, path)


def radial_histogram(edges, counts, path: Path, ref_probs=None) -> Path:
    widths = np.diff(edges)
    dens = counts / max(counts.sum(), 1) / widths
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.stairs(dens, edges, label="ensemble")
    if ref_probs is not None:
        ax.stairs(ref_probs / widths, edges, label="Fokker-Planck", ls="--")
    ax.set_xlabel("|p| (bath frame)")
    ax.set_ylabel("probability per unit |p|")
    ax.legend()
    return _save(fig, path)


def z_scores(z, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 3.5))
    lim = max(3.0, float(np.nanmax(np.abs(np.where(np.isfinite(z), z, 0.0)))))
    im = ax.imshow(z, cmap="coolwarm", vmin=-lim, vmax=lim)
    ax.set_title("z = (estimate - analytic) / stderr")
    fig.colorbar(im, ax=ax)
    return _save(fig, path)


def residual_histogram(rel, path: Path, label: str) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    vals = np.log10(np.maximum(rel, 1e-300))
    ax.hist(vals[np.isfinite(vals)], bins=50)
    ax.set_xlabel("log10 relative flux residual")
    ax.set_title(label)
    return _save(fig, path)
