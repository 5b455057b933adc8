"""Matplotlib figure rendering for the report paths.

Every CLI command that writes delimited output also renders its figures
here (Agg backend, fixed dpi).  Figures are a human-facing companion to
the CSV/JSON files, never an input to any computation.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 140


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_grid_function(path, coords, values, ylabel="u", title=""):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    coords = np.asarray(coords)
    if coords.shape[1] == 1:
        order = np.argsort(coords[:, 0])
        ax.plot(coords[order, 0], np.asarray(values)[order], lw=1.2)
        ax.set_xlabel("q")
        ax.set_ylabel(ylabel)
    else:
        n = int(round(np.sqrt(len(values))))
        im = ax.imshow(np.asarray(values).reshape(n, n).T, origin="lower",
                       extent=[0, 1, 0, 1], aspect="auto", cmap="viridis")
        fig.colorbar(im, ax=ax, label=ylabel)
        ax.set_xlabel("q1")
        ax.set_ylabel("q2")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_matrix(path, matrix, title="", label="value"):
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    finite = np.ma.masked_invalid(np.asarray(matrix))
    im = ax.imshow(finite, origin="lower", extent=[0, 1, 0, 1], cmap="magma", aspect="auto")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("y")
    ax.set_ylabel("x")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_curve(path, x, y, xlabel, ylabel, title="", marks=None, band=None):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(np.asarray(x), np.asarray(y), lw=1.4)
    if band is not None:
        ax.fill_betweenx([min(y), max(y)], band[0], band[1], alpha=0.15, color="tab:red")
    if marks:
        for mx in marks:
            ax.axvline(mx, ls="--", lw=0.8, color="tab:red")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_phase_sets(path, layers, title="", p_lim=None):
    """layers: list of (label, q array (N, 1), p array (N, 1))."""
    fig, ax = plt.subplots(figsize=(6, 3.6))
    markers = {"mane": (".", 4, "tab:blue"), "aubry": ("o", 14, "tab:orange"), "mather": ("*", 40, "tab:red")}
    for label, q, p in layers:
        mk, size, color = markers.get(label, (".", 6, "tab:gray"))
        if len(q):
            ax.scatter(np.asarray(q)[:, 0], np.asarray(p)[:, 0], s=size, marker=mk,
                       color=color, label=label, zorder=3 if label != "mane" else 2)
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.set_xlim(0, 1)
    if p_lim:
        ax.set_ylim(-p_lim, p_lim)
    ax.legend(loc="upper right", fontsize=8)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_coverage(path, report, title=""):
    fig, ax = plt.subplots(figsize=(6, 3.8))
    covered = report.covered
    if covered.ndim != 2:
        covered = covered.reshape(covered.shape[0], -1)
    im = ax.imshow(covered.T, origin="lower", aspect="auto", cmap="cividis",
                   extent=[0, 1, -report.p_max, report.p_max], vmin=0, vmax=1)
    fig.colorbar(im, ax=ax, label="covered")
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_flow(path, flow, energies, title=""):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.2, 3.2))
    q = flow.q[..., 0] if flow.q.ndim == 3 else flow.q[:, 0]
    p = flow.p[..., 0] if flow.p.ndim == 3 else flow.p[:, 0]
    ax1.plot(np.asarray(q).reshape(len(flow.times), -1),
             np.asarray(p).reshape(len(flow.times), -1), ".", ms=1)
    ax1.set_xlabel("q")
    ax1.set_ylabel("p")
    ax1.set_xlim(0, 1)
    drift = np.asarray(energies) - np.asarray(energies)[0]
    ax2.plot(flow.times, drift.reshape(len(flow.times), -1), lw=0.8)
    ax2.set_xlabel("t")
    ax2.set_ylabel("H(t) - H(0)")
    if title:
        ax1.set_title(title)
    _save(fig, path)
