"""SVG figures for the command-line reports.  Figures are illustrations only."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed hash salt keeps the SVG ids stable between runs
matplotlib.rcParams["svg.hashsalt"] = "streamdec"


def _extent(f):
    xmin, xmax, ymin, ymax = f.bounds()
    h = f.h / 2
    return (xmin - h, xmax + h, ymin - h, ymax + h)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return os.fspath(path)


def field_figure(f, path, title="", curves=()):
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(f.values, origin="lower", extent=_extent(f), cmap="viridis")
    for c in curves:
        v = np.vstack([c.vertices, c.vertices[:1]])
        ax.plot(v[:, 0], v[:, 1], lw=0.6, color="white")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(title)
    ax.set_aspect("equal")
    return _save(fig, path)


def components_figure(comps, path):
    n = max(1, len(comps))
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.2), squeeze=False)
    for ax, (i, c) in zip(axes[0], enumerate(comps)):
        ax.imshow(c.field.values, origin="lower", extent=_extent(c.field), cmap="RdBu_r")
        ax.set_title(f"component {i}  (sign {c.sign:+d})")
        ax.set_aspect("equal")
    return _save(fig, path)


def defects_figure(report, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    k = np.arange(len(report.rho.normalized))
    ax.semilogy(k, np.abs(report.rho.normalized) + 1e-18, ".", label="rho")
    ax.semilogy(k, np.abs(report.beta_rho.normalized) + 1e-18, "x", label="beta(rho)")
    ax.axhline(report.threshold, color="k", lw=0.8, ls="--", label="threshold")
    ax.set_xlabel("test bump")
    ax.set_ylabel("normalized defect")
    ax.legend()
    return _save(fig, path)


def sard_figure(report, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for c in report.components:
        h = c.histogram
        centers = 0.5 * (h.edges[1:] + h.edges[:-1])
        a1.semilogy(centers, h.masses + 1e-18, lw=0.8, label=f"component {c.index}")
        if c.curve is not None:
            a2.semilogx(c.curve.deltas, c.curve.scores, "o-", ms=3, label=f"component {c.index}")
    a1.set_xlabel("value")
    a1.set_ylabel("critical mass")
    a2.axhline(report.threshold, color="k", lw=0.8, ls="--")
    a2.set_xlabel("width fraction")
    a2.set_ylabel("score")
    a1.legend(fontsize=7)
    a2.legend(fontsize=7)
    return _save(fig, path)


def trajectory_figure(w, traj_a, traj_b, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    mids = (np.arange(w.n) + 0.5) * w.ds
    for st in traj_b:
        ax.plot(mids, st.values, lw=0.8, color=plt.cm.viridis(st.time / max(traj_b[-1].time, 1e-300)))
    ax.plot(mids, traj_a[-1].values, "k--", lw=0.8, label="A (zero)")
    ax.set_xlabel("s")
    ax.set_ylabel("rho")
    ax.set_title("trajectory B: front leaving the atom")
    ax.legend()
    return _save(fig, path)
