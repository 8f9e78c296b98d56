"""Figure output for scenario runs. Everything renders off-screen to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (7.0, 4.3),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
    "savefig.dpi": 130,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_trajectory(traj, ledger, path, title: str = "") -> Path:
    """Hamiltonian on top, port signals below."""
    with plt.rc_context(RC):
        fig, (ax_h, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.5))
        ax_h.plot(ledger.times, ledger.hamiltonian, color="k", lw=1.2)
        ax_h.set_ylabel("Hamiltonian")
        names = ("e", "f") if traj.representation == "impedance" else ("u", "y")
        for j in range(traj.inputs.shape[1]):
            ax_p.plot(traj.times, np.real(traj.inputs[:, j]), lw=1.0, label=f"{names[0]}[{j}]")
            ax_p.plot(traj.times, np.real(traj.outputs[:, j]), lw=1.0, ls="--", label=f"{names[1]}[{j}]")
        ax_p.set_xlabel("t")
        ax_p.set_ylabel("port signals")
        ax_p.legend(ncol=2, fontsize=8)
        if title:
            ax_h.set_title(title)
        return _save(fig, path)


def plot_ledger(ledger, path, title: str = "") -> Path:
    """Per-step power residual against the audit slack (symlog scale)."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        t = ledger.times[1:]
        ax.plot(t, ledger.residual, lw=1.0, label="residual")
        ax.plot(t, ledger.slack, lw=1.0, ls="--", color="tab:red", label="slack")
        ax.plot(t, -ledger.slack, lw=1.0, ls="--", color="tab:red")
        scale = np.max(np.abs(ledger.slack)) if ledger.slack.size else 1.0
        ax.set_yscale("symlog", linthresh=max(scale, 1e-300))
        ax.set_xlabel("t")
        ax.set_ylabel("dH/dt - supplied - drift")
        ax.legend()
        ax.set_title(title or f"power ledger ({ledger.representation})")
        return _save(fig, path)


def plot_sweep(rows: list[dict], parameter: str, path, keys=("min_eig_M", "min_eig_N")) -> Path:
    """Certificate eigenvalues (or any numeric summary columns) against one swept parameter."""
    xs = [r[parameter] for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        plotted = []
        for key in keys:
            ys = [np.nan if r.get(key) is None else float(r[key]) for r in rows]
            if np.all(np.isnan(ys)):
                continue
            ax.plot(xs, ys, marker="o", label=key)
            plotted += [y for y in ys if not np.isnan(y)]
        if plotted and min(plotted) > 0:
            ax.set_yscale("log")
        else:
            ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel(parameter)
        if all(isinstance(x, (int, float)) and x > 0 for x in xs):
            ax.set_xscale("log")
        if plotted:
            ax.legend()
        return _save(fig, path)
