"""Figures for a finished run, rendered off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import Grid  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _positive(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, y, np.nan)


def plot_time_series(series, path):
    t = series["t"]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(9, 6.5), sharex=True)
        ax = axes[0, 0]
        ax.plot(t, series["max_u"], label="max u")
        ax.plot(t, series["max_v"], label="max v")
        ax.plot(t, series["min_v"], label="min v", ls="--")
        ax.set_yscale("log")
        ax.set_title("extrema")
        ax.legend(frameon=False)

        ax = axes[0, 1]
        for key, label in (("linf_u_minus_m", "|u-m|"), ("linf_v_minus_m", "|v-m|"), ("linf_n", "|n|")):
            ax.semilogy(t, _positive(series[key]), label=label)
        ax.set_title("distance to equilibrium (max norm)")
        ax.legend(frameon=False)

        ax = axes[1, 0]
        ax.plot(t, series["L"], color="k", label="L")
        diss = series["D1"] + series["D2"] + series["D3"] + series["D4"]
        ax2 = ax.twinx()
        ax2.plot(t, diss, color="tab:red", lw=0.8, label="D1+D2+D3+D4")
        ax2.set_yscale("symlog", linthresh=1e-8)
        ax.set_title("Lyapunov functional and dissipation")
        ax.set_xlabel("t")

        ax = axes[1, 1]
        ax.plot(t, series["ratio_upper"], label="max v/w")
        ax.plot(t, series["ratio_lower"], label="min v/S")
        ax.set_title("comparison ratios")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_fields(grid: Grid, state, path):
    names = ("u", "v", "n")
    with plt.rc_context(STYLE):
        if grid.dim == 1:
            fig, ax = plt.subplots(figsize=(7, 3.5))
            x = grid.centers(0)
            for name in names:
                ax.plot(x, getattr(state, name), label=name)
            ax.set_xlabel("x")
            ax.set_title(f"fields at t = {state.t:.4g}")
            ax.legend(frameon=False)
        else:
            fig, axes = plt.subplots(1, 3, figsize=(11, 3.6))
            extent = (0, grid.lengths[0], 0, grid.lengths[1])
            for ax, name in zip(axes, names):
                im = ax.imshow(getattr(state, name), origin="lower", extent=extent, cmap="viridis")
                ax.set_title(f"{name}, t = {state.t:.4g}")
                ax.grid(False)
                fig.colorbar(im, ax=ax, shrink=0.8)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def render_run_figures(out_dir, grid: Grid, series, state) -> list:
    fig_dir = Path(out_dir) / "figures"
    fig_dir.mkdir(exist_ok=True)
    return [
        plot_time_series(series, fig_dir / "timeseries.png"),
        plot_fields(grid, state, fig_dir / "fields_final.png"),
    ]


def plot_sweep(rows, axis: str, path):
    values = [r.value for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.semilogy(values, [r.max_u_final for r in rows], "o-")
        for r in rows:
            ax.annotate(r.verdict.split("(")[0], (r.value, r.max_u_final), fontsize=7, xytext=(3, 3), textcoords="offset points")
        ax.set_xlabel(axis)
        ax.set_ylabel("final max u")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
