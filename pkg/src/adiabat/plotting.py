"""
Static figures written next to the CSV output of the CLI.

Only the Agg backend is used, so figures render without a display.
"""

from __future__ import annotations

from math import sqrt

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (sqrt(5.0) - 1.0) / 2.0
fig_width = 6.0
fig_size = (fig_width, fig_width * golden_mean)

params = {
    "axes.labelsize": 11,
    "font.size": 11,
    "legend.fontsize": 9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "font.family": "serif",
    "text.usetex": False,
    "figure.figsize": fig_size,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.linestyle": ":",
    "grid.alpha": 0.6,
}


def _save(fig, path):
    with plt.rc_context(params):
        fig.savefig(path)
    plt.close(fig)


def plot_spectrum(s, e0, e1, gap, path, abs_f01=None):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(s, e0, label="$E_0$")
        ax.plot(s, e1, label="$E_1$")
        ax.plot(s, gap, "k--", label="gap")
        if abs_f01 is not None:
            ax.plot(s, abs_f01, ":", label="$|F_{01}|$")
        ax.set_xlabel("$s$")
        ax.set_ylabel("energy")
        ax.legend()
    _save(fig, path)


def plot_gap(s, gap, path):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(s, gap)
        ax.set_xlabel("$s$")
        ax.set_ylabel(r"$\Delta E(s)$")
    _save(fig, path)


def plot_schedule(t, s, sdot, path):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(t, s, label="$s(t)$")
        ax.set_xlabel("$t$")
        ax.set_ylabel("$s$")
        ax2 = ax.twinx()
        ax2.plot(t, sdot, "C1--", label=r"$\dot s$")
        ax2.set_ylabel(r"$\dot s$")
        ax2.grid(False)
    _save(fig, path)


def plot_occupation(t, p0, path):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(t, p0, label="ground state")
        ax.plot(t, 1.0 - np.asarray(p0), label="excited")
        ax.set_xlabel("$t$")
        ax.set_ylabel("occupation")
        ax.set_ylim(-0.02, 1.02)
        ax.legend()
    _save(fig, path)


def plot_scaling(x, y, exponent, intercept, path, xlabel="$N$", ylabel="$T^*$"):
    x = np.asarray(x, float)
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.loglog(x, y, "o", label="runtime search")
        if np.isfinite(exponent):
            xx = np.geomspace(x.min(), x.max(), 50)
            ax.loglog(xx, np.exp(intercept) * xx**exponent, "k-", label=f"slope {exponent:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend()
    _save(fig, path)


def plot_table_one(curves: dict, path):
    """``curves`` maps a label to ``(1/gap_min, T)`` arrays."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for label, (x, y) in curves.items():
            ax.loglog(x, y, "o-", label=label)
        ax.set_xlabel(r"$1/\Delta E_{\min}$")
        ax.set_ylabel("$T$")
        ax.legend(ncol=2)
    _save(fig, path)


def plot_decay(T, final, intermediate, path, log_x=False, extra=None):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.semilogy(T, final, "o", label="final")
        ax.semilogy(T, intermediate, "r-", label="max intermediate")
        if extra is not None:
            ax.semilogy(T, extra, "k--", label="perturbative")
        if log_x:
            ax.set_xscale("log")
        ax.set_xlabel("$T$")
        ax.set_ylabel("excitation probability")
        ax.legend()
    _save(fig, path)


def plot_degeneracy(curves: dict, path):
    """``curves`` maps a smoothing class to ``(M, T*)`` arrays."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for label, (m, t) in curves.items():
            ax.semilogx(m, t, "o-", label=label)
        ax.set_xlabel("$M$")
        ax.set_ylabel("$T^*$")
        ax.legend()
    _save(fig, path)


def plot_fit(x, y, fitted, path, log_x=False, log_y=False):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(x, y, "o", label="data")
        ax.plot(x, fitted, "k-", label="fit")
        if log_x:
            ax.set_xscale("log")
        if log_y:
            ax.set_yscale("log")
        ax.legend()
    _save(fig, path)
