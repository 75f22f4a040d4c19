"""The four figure types, one function each.

Every function takes loaded CSV columns and returns a matplotlib Figure;
saving is the CLI's job. Inputs are never mutated.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import FigureDataError, rate_columns, require_columns

TRUTH_COLOR = "green"


def render_landscape(table) -> plt.Figure:
    """Grid of per-cell marginal loss surfaces."""
    require_columns(table, ["r", "k_r_1", "k_r_2", "loss"], "landscape table")
    cells = sorted(set(table["r"].astype(int)))
    n = len(cells)
    ncols = min(n, 2)
    nrows = math.ceil(n / ncols)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(5.2 * ncols, 4.2 * nrows), squeeze=False
    )
    for ax in axes.ravel()[n:]:
        ax.set_axis_off()
    for ax, r in zip(axes.ravel(), cells):
        sel = table["r"].astype(int) == r
        a = np.unique(table["k_r_1"][sel])
        b = np.unique(table["k_r_2"][sel])
        grid = np.full((b.size, a.size), np.nan)
        ia = np.searchsorted(a, table["k_r_1"][sel])
        ib = np.searchsorted(b, table["k_r_2"][sel])
        grid[ib, ia] = table["loss"][sel]
        mesh = ax.pcolormesh(a, b, grid, shading="nearest", cmap="viridis")
        best = np.argmin(table["loss"][sel])
        ax.plot(
            table["k_r_1"][sel][best],
            table["k_r_2"][sel][best],
            marker="*",
            color="white",
            markersize=10,
            markeredgecolor="black",
        )
        ax.set_title(f"cell {r}")
        ax.set_xlabel(f"$k_{{{r},1}}$")
        ax.set_ylabel(f"$k_{{{r},2}}$")
        fig.colorbar(mesh, ax=ax, label="loss")
    fig.suptitle("marginal loss surfaces (others held at the truth)")
    fig.tight_layout()
    return fig


# cells highlighted in the convergence plot when present (r indices)
CONVERGENCE_CELLS = (2, 9, 13, 15)


def render_convergence(table) -> plt.Figure:
    """Parameter trajectories next to the loss decay (log scale)."""
    require_columns(table, ["iter", "loss"], "history table")
    rates = rate_columns(table)
    shown = [
        c for c in rates if int(c.split("_")[1]) in CONVERGENCE_CELLS
    ] or rates[: min(len(rates), 8)]
    fig, (ax_k, ax_loss) = plt.subplots(1, 2, figsize=(11, 4.2))
    it = table["iter"]
    for name in shown:
        r, i = name.split("_")[1:]
        style = "-" if i == "1" else ":"
        ax_k.plot(it, table[name], style, label=f"$k_{{{r},{i}}}$")
    ax_k.set_xlabel("iteration")
    ax_k.set_ylabel("rate value")
    ax_k.set_title("parameter convergence")
    ax_k.legend(fontsize=8, ncol=2)
    positive = table["loss"] > 0
    ax_loss.semilogy(it[positive], table["loss"][positive], "-")
    ax_loss.set_xlabel("iteration")
    ax_loss.set_ylabel("loss")
    ax_loss.set_title("loss decay")
    fig.tight_layout()
    return fig


def render_eigmap(table) -> plt.Figure:
    """Heat map of the minimal Hessian eigenvalue with the truth marked."""
    require_columns(
        table, ["k_1_1", "k_2_2", "lambda_min", "is_truth"], "eigenvalue map table"
    )
    sweep = table["is_truth"] == 0.0
    truth = table["is_truth"] == 1.0
    if not truth.any():
        raise FigureDataError("eigenvalue map table has no is_truth=1 row")
    a = np.unique(table["k_1_1"][sweep])
    b = np.unique(table["k_2_2"][sweep])
    grid = np.full((b.size, a.size), np.nan)
    ia = np.searchsorted(a, table["k_1_1"][sweep])
    ib = np.searchsorted(b, table["k_2_2"][sweep])
    grid[ib, ia] = table["lambda_min"][sweep]
    fig, ax = plt.subplots(figsize=(6.2, 5.0))
    scale = np.nanmax(np.abs(grid))
    mesh = ax.pcolormesh(
        a, b, grid, shading="nearest", cmap="RdBu", vmin=-scale, vmax=scale
    )
    fig.colorbar(mesh, ax=ax, label=r"$\lambda_{\min}$")
    ax.plot(
        table["k_1_1"][truth][0],
        table["k_2_2"][truth][0],
        marker="o",
        color=TRUTH_COLOR,
        markersize=10,
        markeredgecolor="black",
        label="truth",
    )
    ax.set_xlabel("$k_{1,1}$")
    ax.set_ylabel("$k_{2,2}$")
    ax.set_title("minimal Hessian eigenvalue over the rate plane")
    ax.legend()
    fig.tight_layout()
    return fig


def render_illcond(summary, histories) -> plt.Figure:
    """Cost decay per detector position plus the final cell-1 offsets."""
    require_columns(
        summary,
        ["position", "x_1", "lambda_min", "final_err_k1"],
        "degeneracy summary table",
    )
    if len(histories) != len(summary["position"]):
        raise FigureDataError(
            f"expected {len(summary['position'])} history tables, "
            f"got {len(histories)}"
        )
    fig, (ax_loss, ax_err) = plt.subplots(1, 2, figsize=(11, 4.2))
    for pos, hist in zip(summary["position"].astype(int), histories):
        require_columns(hist, ["iter", "loss"], f"history table for position {pos}")
        positive = hist["loss"] > 0
        ax_loss.semilogy(
            hist["iter"][positive], hist["loss"][positive], label=f"position {pos}"
        )
    ax_loss.set_xlabel("iteration")
    ax_loss.set_ylabel("loss")
    ax_loss.set_title("cost decay as the detectors merge")
    ax_loss.legend()
    ax_err.bar(
        summary["position"].astype(int).astype(str),
        summary["final_err_k1"],
        color="tab:orange",
    )
    ax_err.set_xlabel("detector position index")
    ax_err.set_ylabel("final cell-1 error")
    ax_err.set_title("reconstruction offset on the affected cell")
    fig.tight_layout()
    return fig
