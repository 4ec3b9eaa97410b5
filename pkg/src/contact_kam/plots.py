"""Matplotlib figure rendering for the report path.

All figures are written as SVG files next to the delimited outputs.  The
backend, hash salt and metadata are pinned so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "contact-kam"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .flow import Orbit  # noqa: E402
from .geometry import ScalarField  # noqa: E402
from .model import ContactModel  # noqa: E402

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _shell_contour(ax, model: ContactModel, u_lim: tuple[float, float]) -> None:
    """Zero level of H(x, u, 0) in the (x, u) plane."""
    xs = np.linspace(-np.pi, np.pi, 361)
    us = np.linspace(u_lim[0], u_lim[1], 201)
    X, U = np.meshgrid(xs, us)
    H = np.asarray(model.hamiltonian(X, U, 0.0 * X), dtype=float)
    ax.contour(X, U, H, levels=[0.0], colors="seagreen",
               linewidths=0.8, linestyles="--")


def plot_fields(path: str, fields: list[tuple[str, ScalarField]],
                title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for label, fld in fields:
        ax.plot(fld.grid.nodes, fld.values, label=label, lw=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    if fields:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_orbit_xu(path: str, model: ContactModel,
                  orbits: list[tuple[str, str, Orbit]],
                  fields: list[tuple[str, ScalarField]] = (),
                  points: list[tuple[float, float]] = (),
                  title: str = "") -> None:
    """Front projection (x, u) of orbits with the p = 0 energy-shell trace."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    u_vals = [o.states[:, 1] for _, _, o in orbits]
    u_all = np.concatenate(u_vals) if u_vals else np.array([-1.0, 1.0])
    lo = float(np.min(u_all)) - 0.3
    hi = float(np.max(u_all)) + 0.3
    lo, hi = max(lo, -5.0), min(hi, 5.0)
    _shell_contour(ax, model, (lo, hi))
    for label, color, orbit in orbits:
        x = orbit.states[:, 0]
        u = orbit.states[:, 1]
        # break the line at wrap-around jumps
        jumps = np.abs(np.diff(x)) > np.pi
        xm = np.where(np.concatenate([[False], jumps]), np.nan, x)
        ax.plot(xm, u, color=color, lw=1.0, label=label)
    for label, fld in fields:
        ax.plot(fld.grid.nodes, fld.values, lw=0.8, alpha=0.7, label=label)
    for x, u in points:
        ax.plot([x], [u], marker="o", ms=4, color="black")
    ax.set_xlim(-np.pi, np.pi)
    ax.set_ylim(lo, hi)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
