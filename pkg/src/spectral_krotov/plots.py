"""Figure rendering for run reports.

Every optimize/propagate run can drop PNG figures next to its CSV files:
the pulse, its spectrum with filter bands shaded, level populations, and
the convergence history.  Rendering uses the Agg backend so runs work
headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .constraints import SpectralKernel

__all__ = [
    "render_pulse",
    "render_spectrum",
    "render_populations",
    "render_convergence",
]

_DPI = 150


def _save(fig, path: str | Path):
    fig.tight_layout()
    fig.savefig(Path(path), dpi=_DPI)
    plt.close(fig)


def render_pulse(path: str | Path, times: np.ndarray, eps: np.ndarray,
                 guess: Optional[np.ndarray] = None):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    if guess is not None:
        ax.plot(times, guess, color="0.65", lw=0.9, label="guess")
    ax.plot(times, eps, color="C0", lw=1.0, label="optimized")
    ax.set_xlabel("t (a.u.)")
    ax.set_ylabel("field (a.u.)")
    if guess is not None:
        ax.legend(loc="upper right", frameon=False)
    _save(fig, path)


def render_spectrum(
    path: str | Path,
    omega: np.ndarray,
    abs2: np.ndarray,
    kernel: Optional[SpectralKernel] = None,
    carrier: Optional[float] = None,
    omega_window: Optional[tuple[float, float]] = None,
):
    """Positive-frequency power spectrum with filter bands shaded."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    positive = omega >= 0
    ax.plot(omega[positive], abs2[positive], color="C0", lw=1.0)
    if kernel is not None:
        for c in kernel.components:
            color = "C3" if c.lambda_b < 0 else "C2"
            ax.axvspan(c.omega - 2 * c.sigma, c.omega + 2 * c.sigma,
                       color=color, alpha=0.18, lw=0)
    if carrier is not None:
        ax.axvline(carrier, color="0.4", lw=0.8, ls="--")
    if omega_window is not None:
        ax.set_xlim(*omega_window)
    ax.set_xlabel("omega (a.u.)")
    ax.set_ylabel("|eps(omega)|^2")
    _save(fig, path)


def render_populations(path: str | Path, times: np.ndarray,
                       pops: np.ndarray, labels: Sequence[str]):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for k, label in enumerate(labels):
        ax.plot(times, pops[:, k], lw=1.0, label=label)
    ax.set_xlabel("t (a.u.)")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="center right", frameon=False, fontsize=8)
    _save(fig, path)


def render_convergence(path: str | Path, entries):
    iters = np.array([e.index for e in entries])
    err = np.array([1.0 - e.j_target for e in entries])
    j_tot = np.array([e.j_total for e in entries])
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.semilogy(iters, np.maximum(err, 1e-16), "C0.-", lw=1.0, ms=3,
                label="1 - J_T")
    ax.semilogy(iters, np.maximum(j_tot, 1e-16), "C1.-", lw=1.0, ms=3,
                label="J")
    ax.set_xlabel("iteration")
    ax.set_ylabel("functional")
    ax.legend(loc="upper right", frameon=False)
    _save(fig, path)
