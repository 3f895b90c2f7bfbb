"""Matplotlib renderings written next to the CSV outputs of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def correlation_figure(records_by_solver: dict, h: float, path, title: str = "") -> None:
    """Expected vs. estimated h*kappa, one panel per solver."""
    names = list(records_by_solver)
    fig, axes = plt.subplots(1, len(names), figsize=(4.0 * len(names), 3.6), squeeze=False)
    for ax, name in zip(axes[0], names):
        recs = records_by_solver[name]
        truth = np.array([r.kappa_true for r in recs]) * h
        est = np.array([r.kappa_est for r in recs]) * h
        lim = max(1e-6, np.abs(truth).max(), np.abs(est).max()) * 1.05
        ax.plot([-lim, lim], [-lim, lim], "k-", lw=0.8)
        ax.plot(truth, est, ".", ms=2.5, alpha=0.6)
        ax.set_xlabel(r"expected $h\kappa$")
        ax.set_ylabel(r"estimated $h\kappa$")
        ax.set_title(name)
        ax.set_xlim(-lim, lim)
        ax.set_ylim(-lim, lim)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def convergence_figure(rows, path) -> None:
    """MAE and max-AE versus resolution level, one curve per solver."""
    solvers = sorted({r.solver for r in rows})
    fig, axes = plt.subplots(1, 2, figsize=(8.5, 3.6))
    for metric, ax in zip(("mae", "max_ae"), axes):
        for name in solvers:
            sel = sorted((r for r in rows if r.solver == name), key=lambda r: r.nu)
            ax.semilogy([r.nu for r in sel], [getattr(r, metric) for r in sel], "o-", label=name)
        ax.set_xlabel(r"resolution level $\nu$")
        ax.set_ylabel({"mae": "MAE", "max_ae": "max AE"}[metric] + r" in $\kappa$")
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def circle_figure(rows, path) -> None:
    """Relative error norms versus R/h for the circle study."""
    solvers = sorted({r.solver for r in rows})
    fig, axes = plt.subplots(1, 2, figsize=(8.5, 3.6))
    for metric, ax in zip(("l2_rel", "linf_rel"), axes):
        for name in solvers:
            sel = sorted((r for r in rows if r.solver == name), key=lambda r: r.r_over_h)
            ax.loglog(
                [r.r_over_h for r in sel], [getattr(r, metric) for r in sel], "o-", label=name
            )
        ax.set_xlabel(r"$R/h$")
        ax.set_ylabel({"l2_rel": r"$\tilde{L}^2$", "linf_rel": r"$\tilde{L}^\infty$"}[metric])
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def history_figure(history, path) -> None:
    """Training MSE, validation MAE, and learning-rate schedule."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.semilogy(history.epochs, history.train_mse, label="train MSE")
    ax.semilogy(history.epochs, history.val_mae, label="validation MAE")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss / error")
    ax.grid(True, which="both", alpha=0.3)
    ax2 = ax.twinx()
    ax2.semilogy(history.epochs, history.lr, "k--", lw=0.8, label="learning rate")
    ax2.set_ylabel("learning rate")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
