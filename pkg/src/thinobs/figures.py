"""SVG figures drawn from CSV files only, so each one can be regenerated from its sibling table."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Wedge  # noqa: E402

from .store import read_csv  # noqa: E402

# fixed salt and no date stamp: identical input gives identical SVG bytes
plt.rcParams["svg.hashsalt"] = "thinobs"
SVG_META = {"Date": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)
    return path


def _columns(rows, *names):
    return [np.array([float(r[n]) for r in rows]) for n in names]


def legendre_figure(csv_path, svg_path) -> Path:
    """``p_mu`` against latitude, two frequencies per panel."""
    rows = read_csv(csv_path)
    mu, phi, p = _columns(rows, "mu", "phi", "p")
    mus = list(dict.fromkeys(mu.tolist()))
    npanel = math.ceil(len(mus) / 2)
    fig, axes = plt.subplots(1, npanel, figsize=(4 * npanel, 3.2), squeeze=False)
    for j, ax in enumerate(axes[0]):
        for value, style in zip(mus[2 * j:2 * j + 2], ("-", "--")):
            sel = mu == value
            ax.plot(phi[sel], p[sel], style, label=f"$\\mu={value:g}$")
        ax.axhline(0.0, color="0.6", lw=0.6)
        ax.set_xlim(0, np.pi / 2)
        ax.set_xlabel(r"$\varphi$")
        ax.legend(loc="best", fontsize=8)
    axes[0][0].set_ylabel(r"$p_\mu(\varphi)$")
    fig.tight_layout()
    return _save(fig, svg_path)


def field_figure(csv_path, svg_path, column: str, title: str = "") -> Path:
    """Heatmap of a field on the fundamental wedge, reflected evenly across the equator."""
    rows = read_csv(csv_path)
    theta, phi, val = _columns(rows, "theta", "phi", column)
    th = np.unique(theta)
    ph = np.unique(phi)
    grid = np.full((ph.size, th.size), np.nan)
    grid[np.searchsorted(ph, phi), np.searchsorted(th, theta)] = val
    full = np.vstack([grid[:0:-1], grid])
    vmax = float(np.nanmax(np.abs(full))) or 1.0
    fig, ax = plt.subplots(figsize=(4.2, 5.0))
    im = ax.imshow(full, origin="lower", aspect="auto", cmap="RdBu_r", vmin=-vmax, vmax=vmax,
                   extent=(th[0], th[-1], -ph[-1], ph[-1]), interpolation="nearest")
    ax.contour(th, np.concatenate([-ph[:0:-1], ph]), full, levels=[0.0], colors="k", linewidths=0.6)
    ax.set_xlabel(r"$\theta$")
    ax.set_ylabel(r"$\varphi$")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    return _save(fig, svg_path)


def profile_figure(csv_path, svg_path) -> Path:
    """The correction profile ``h`` and its derivative."""
    rows = read_csv(csv_path)
    phi, h, dh = _columns(rows, "phi", "h", "dh")
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot(phi, h, label=r"$h$")
    ax.plot(phi, dh, "--", label=r"$h'$")
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_xlabel(r"$\varphi$")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, svg_path)


def contact_sectors(m: int, sigma: float):
    """Angular intervals ``(start, end)`` in degrees of ``{dist(theta, 2 pi Z / m) <= sigma pi / m}``."""
    half = 180.0 * sigma / m
    return [(360.0 * j / m - half, 360.0 * j / m + half) for j in range(m)]


def contact_figure(csv_path, svg_path) -> Path:
    """Contact set on the unit disk of the thin space; reads one ``(m, sigma)`` row."""
    row = read_csv(csv_path)[0]
    m, sigma = int(row["m"]), float(row["sigma"])
    fig, ax = plt.subplots(figsize=(3.6, 3.6))
    ax.add_patch(Circle((0, 0), 1.0, fill=False, lw=0.8))
    for start, end in contact_sectors(m, sigma):
        ax.add_patch(Wedge((0, 0), 1.0, start, end, facecolor="0.25", edgecolor="k", lw=0.5))
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title(f"$m={m}$, $\\sigma={sigma:.3f}$", fontsize=9)
    fig.tight_layout()
    return _save(fig, svg_path)
