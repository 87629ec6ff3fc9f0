"""Static SVG figures for sweep, stress, and diagram reports.

Every function writes one SVG and returns its path. Figures are
deterministic: fixed hash salt, no embedded creation date, so identical
inputs give identical bytes.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "overlap-lab"

import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def ns_histogram(per_alpha, kappa_star, path) -> Path:
    """Stepped entropy histograms, one per alpha, with the detected
    lower-threshold marker when present."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for entry in per_alpha:
        hist = entry.get("ns_histogram")
        if not hist:
            continue
        edges = np.asarray(hist["bin_edges"])
        dens = np.asarray(hist["density"])
        ax.stairs(dens, edges, label=f"alpha={entry['alpha']:g}")
    if kappa_star is not None:
        ax.axvline(kappa_star, color="black", linestyle="--", linewidth=1.2,
                   label=f"kappa* = {kappa_star:.3f}")
    ax.set_xlabel("non-separability entropy")
    ax.set_ylabel("density")
    ax.set_title("entropy distribution by topological weight")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def tau_vs_ns(points, kappa_double_star, path) -> Path:
    """Tension against entropy per run, with the upper-threshold
    changepoint when one was kept."""
    pts = sorted((float(n), float(t)) for n, t in points)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if pts:
        ns = [p[0] for p in pts]
        tau = [p[1] for p in pts]
        ax.plot(ns, tau, "o-", color="tab:blue", markersize=4)
    if kappa_double_star is not None:
        ax.axvline(kappa_double_star, color="black", linestyle="--",
                   linewidth=1.2, label=f"kappa** = {kappa_double_star:.3f}")
        ax.legend(fontsize=8)
    ax.set_xlabel("mean non-separability entropy")
    ax.set_ylabel("structural tension")
    ax.set_title("tension over entropy")
    return _finish(fig, path)


def diagram(pd, path, max_dim: int | None = None) -> Path:
    """Birth/death scatter with the diagonal; infinite deaths drawn as
    triangles at the top of the axis."""
    dims = sorted(set(int(d) for d in pd.dims))
    if max_dim is not None:
        dims = [d for d in dims if d <= max_dim]
    finite = pd.deaths[np.isfinite(pd.deaths)]
    top = float(finite.max()) * 1.1 if finite.size else 1.0
    top = max(top, float(pd.births.max()) * 1.1 if len(pd.births) else 1.0, 1e-3)
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    colors = {0: "tab:blue", 1: "tab:orange", 2: "tab:green"}
    for d in dims:
        mask = pd.dims == d
        b = pd.births[mask]
        de = pd.deaths[mask]
        fin = np.isfinite(de)
        color = colors.get(d, "tab:red")
        if fin.any():
            ax.scatter(b[fin], de[fin], s=18, color=color, label=f"dim {d}")
        if (~fin).any():
            ax.scatter(b[~fin], np.full((~fin).sum(), top), marker="^",
                       s=30, color=color,
                       label=f"dim {d} (inf)" if not fin.any() else None)
    ax.plot([0, top], [0, top], color="gray", linewidth=0.8)
    ax.set_xlim(-0.02 * top, top)
    ax.set_ylim(-0.02 * top, top * 1.02)
    ax.set_xlabel("birth")
    ax.set_ylabel("death")
    ax.set_title("persistence diagram")
    ax.legend(fontsize=8, loc="lower right")
    return _finish(fig, path)


def stress_trajectories(report, path) -> Path:
    """Aligned entropy / loop-persistence / accuracy against position."""
    pos = report["positions"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax2 = ax.twinx()
    for key, color, axis in (("ns_trajectory", "tab:blue", ax),
                             ("b1_trajectory", "tab:orange", ax),
                             ("accuracy_trajectory", "tab:green", ax2)):
        vals = [v if v is not None else np.nan for v in report[key]]
        axis.plot(pos, vals, "o-", color=color, markersize=4,
                  label=key.replace("_trajectory", ""))
    ax.set_xlabel(report["position_kind"])
    ax.set_ylabel("entropy / loop persistence")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0.0, 1.05)
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], fontsize=8)
    ax.set_title(f"stress: {report['mode']}")
    return _finish(fig, path)


def sample_histogram(sample, markers, path, title) -> Path:
    """Histogram of a one-dimensional sample with labeled vertical
    markers (crossover, changepoint positions and the like)."""
    x = np.asarray(sample, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.hist(x, bins=min(40, max(10, x.size // 20)), density=True,
            color="tab:blue", alpha=0.7)
    for label, v in (markers or {}).items():
        if v is None:
            continue
        ax.axvline(v, linestyle="--", linewidth=1.2, color="black")
        ax.text(v, ax.get_ylim()[1] * 0.95, f" {label}={v:.3f}",
                fontsize=8, va="top")
    ax.set_xlabel("value")
    ax.set_ylabel("density")
    ax.set_title(title)
    return _finish(fig, path)


def series_with_changepoints(series, changepoints, path) -> Path:
    x = np.asarray(series, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(np.arange(x.size), x, color="tab:blue", linewidth=1.0)
    for cp in changepoints:
        ax.axvline(cp, color="black", linestyle="--", linewidth=1.0)
    ax.set_xlabel("index")
    ax.set_ylabel("value")
    ax.set_title(f"series with {len(changepoints)} changepoint(s)")
    return _finish(fig, path)
