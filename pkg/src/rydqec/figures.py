"""PNG renderings of the CSV outputs, written next to them by the CLI."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

FIG_WIDTH = 3.4
GOLDEN = (np.sqrt(5) - 1.0) / 2.0
STYLE = {
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(STYLE)
    return plt


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _col(rows, key, cast=float) -> np.ndarray:
    return np.array([cast(r[key]) for r in rows])


def _save(fig, path, provenance: str | None) -> Path:
    path = Path(path)
    meta = {"Software": None}
    if provenance:
        meta["Description"] = provenance
    fig.savefig(path, metadata=meta)
    return path


def plot_trajectory(csv_path, png_path, provenance: str | None = None) -> Path:
    """Pulse, populations and entangling phases versus time."""
    plt = _pyplot()
    rows = read_csv(csv_path)
    t = _col(rows, "t_us")
    fig, ax = plt.subplots(3, 1, sharex=True, figsize=(FIG_WIDTH, 2.4 * FIG_WIDTH * GOLDEN))
    ax[0].plot(t, _col(rows, "omega_L"), label=r"$\Omega_L$")
    ax[0].plot(t, _col(rows, "delta_L"), label=r"$\delta_L$")
    ax[0].set_ylabel("pulse [V]")
    ax[0].legend(frameon=False)
    for key in ("pop_100", "pop_110", "pop_101", "pop_111"):
        ax[1].plot(t, _col(rows, key), label=key[4:])
    ax[1].plot(t, _col(rows, "rydberg"), "k--", label="Rydberg")
    ax[1].set_ylabel("population")
    ax[1].legend(frameon=False, ncol=3)
    for key in ("phi_ent_110", "phi_ent_101", "phi_ent_111"):
        ax[2].plot(t, _col(rows, key) / np.pi, label=key[8:])
    ax[2].set_ylabel(r"$\varphi^{ent}/\pi$")
    ax[2].set_xlabel(r"t [$\mu$s]")
    ax[2].legend(frameon=False, ncol=3)
    out = _save(fig, png_path, provenance)
    plt.close(fig)
    return out


def plot_scan(csv_path, png_path, provenance: str | None = None) -> Path:
    """Best fidelity versus gate time, one line per (gamma, alpha)."""
    plt = _pyplot()
    rows = [r for r in read_csv(csv_path) if r["status"] == "ok"]
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH * GOLDEN))
    keys = sorted({(float(r["gamma"]), float(r["alpha"])) for r in rows})
    for g, a in keys:
        sel = sorted((float(r["tau"]), float(r["fidelity"])) for r in rows
                     if float(r["gamma"]) == g and float(r["alpha"]) == a)
        if sel:
            tau, f = np.array(sel).T
            ax.plot(tau, 1 - f, "o-", label=rf"$\gamma$={g:g}, $\alpha$={a:g}")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\tau$ [$2\pi/V$]")
    ax.set_ylabel(r"$1-\mathcal{F}$")
    if keys:
        ax.legend(frameon=False)
    out = _save(fig, png_path, provenance)
    plt.close(fig)
    return out


def plot_sweep(csv_path, png_path, fits: dict | None = None, provenance: str | None = None) -> Path:
    """p_L versus lambda with Wilson intervals and the fitted power laws."""
    plt = _pyplot()
    rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH * GOLDEN))
    for state in sorted({r["state"] for r in rows}):
        sel = [r for r in rows if r["state"] == state]
        lam, p = _col(sel, "lambda"), _col(sel, "p_L")
        lo, hi = _col(sel, "ci_low"), _col(sel, "ci_high")
        ok = p > 0
        ax.errorbar(lam[ok], p[ok], yerr=np.vstack([p[ok] - lo[ok], hi[ok] - p[ok]]), fmt="o", label=state)
        fit = (fits or {}).get(state)
        if fit:
            xs = np.geomspace(lam.min(), lam.max(), 50)
            ax.plot(xs, fit["C"] * xs ** fit["alpha"], "-", color="0.4")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$p_L$")
    ax.legend(frameon=False)
    out = _save(fig, png_path, provenance)
    plt.close(fig)
    return out
