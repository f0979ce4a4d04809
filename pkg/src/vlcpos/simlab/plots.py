"""Figure rendering for experiment results.

Each experiment's report can write one PNG next to its CSV. matplotlib is
imported lazily with the Agg backend so headless runs and plain CSV runs
never pay for it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render(result, path: str | Path) -> Path:
    """Dispatch on the experiment name; returns the written file path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fn = {
        "table2": _render_table2,
        "converge": _render_converge,
        "surface": _render_surface,
        "noise_sweep": _render_noise_sweep,
        "clip_sweep": _render_clip_sweep,
        "complexity": _render_complexity,
    }.get(result.name)
    if fn is None:
        raise ValueError(f"no figure defined for experiment {result.name!r}")
    fn(result.plot_data, path)
    return path


def _render_table2(data, path):
    plt = _pyplot()
    modes, methods, probes = data["modes"], data["methods"], data["probes"]
    fig, axes = plt.subplots(1, len(modes), figsize=(11, 4), sharey=True)
    x = np.arange(len(probes))
    width = 0.8 / len(methods)
    for ax, mode in zip(np.atleast_1d(axes), modes):
        for qi, method in enumerate(methods):
            vals = [1e3 * data["mean_err"][(mode, method, p)] for p in range(len(probes))]
            ax.bar(x + (qi - len(methods) / 2 + 0.5) * width, vals, width, label=method)
        ax.set_yscale("log")
        ax.set_xticks(x, [f"probe {p + 1}" for p in range(len(probes))])
        ax.set_title(mode.upper())
        ax.set_ylabel("mean error [mm]")
        ax.grid(True, axis="y", alpha=0.3)
    np.atleast_1d(axes)[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_converge(data, path):
    plt = _pyplot()
    modes, methods = data["modes"], data["methods"]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    titles = ("convergence [%]", "RMSE (converged) [mm]", "mean iterations")
    x = np.arange(len(methods))
    width = 0.8 / len(modes)
    for part, (ax, title) in enumerate(zip(axes, titles)):
        for mi, mode in enumerate(modes):
            vals = []
            for method in methods:
                pct, rmse, iters = data["stats"][(mode, method)]
                vals.append((100 * pct, 1e3 * rmse, iters)[part])
            ax.bar(x + (mi - len(modes) / 2 + 0.5) * width, vals, width, label=mode)
        ax.set_xticks(x, methods, rotation=20)
        ax.set_title(title)
        ax.grid(True, axis="y", alpha=0.3)
        if part == 1:
            ax.set_yscale("log")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_surface(data, path):
    plt = _pyplot()
    from matplotlib.colors import LogNorm

    modes, planes = data["modes"], data["planes"]
    xs, ys = data["xs"], data["ys"]
    nx, ny = np.unique(xs).size, np.unique(ys).size
    fig, axes = plt.subplots(
        len(modes), len(planes), figsize=(4 * len(planes), 3.2 * len(modes)), squeeze=False
    )
    for mi, mode in enumerate(modes):
        for pl, z in enumerate(planes):
            ax = axes[mi][pl]
            grid = 1e3 * data["rmse"][(mode, pl)].reshape(nx, ny)
            im = ax.pcolormesh(
                np.unique(xs), np.unique(ys), grid.T,
                norm=LogNorm(),
                shading="nearest",
            )
            ax.set_title(f"{mode.upper()} z={z:g} m (mean {grid.mean():.3g} mm)", fontsize=9)
            ax.set_aspect("equal")
            fig.colorbar(im, ax=ax, label="RMSE [mm]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_noise_sweep(data, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for mode in data["modes"]:
        label = f"{mode} (slope {data['slopes'][mode]:.3f})"
        ax.loglog(data["grid"], 1e3 * data["rmse"][mode], "o-", label=label)
    ax.set_xlabel(r"fixed noise variance [A$^2$]")
    ax.set_ylabel("plane-mean RMSE [mm]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_clip_sweep(data, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.semilogy(data["grid"], 1e3 * data["rmse_model"], "o-", color="tab:blue",
                label="locator RMSE (clip-noise model)")
    ax.semilogy(data["grid"], 1e3 * data["rmse_chain"], "s--", color="tab:cyan",
                label="locator RMSE (full chain)")
    ax.set_xlabel("clipping factor")
    ax.set_ylabel("RMSE [mm]")
    ax.grid(True, which="both", alpha=0.3)
    ax2 = ax.twinx()
    ax2.plot(data["fine"], data["fine_caps"] / 1e6, color="tab:red",
             label="best-VAP summed capacity")
    ax2.axvline(data["gamma_opt"], color="tab:red", ls=":", lw=1)
    ax2.set_ylabel("capacity [Mbit/s]")
    lines1, labels1 = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines1 + lines2, labels1 + labels2, fontsize=8, loc="center right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_complexity(data, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    k = data["k_range"]
    ax.plot(k, 63 * k + 27, "o-", label="aoa: 63K + 27")
    ax.plot(k, 75 * k + 27, "s-", label="waoa: 75K + 27")
    ax.axhline(data["per_iter"], color="tab:red", ls="--",
               label=f"rss per iteration ({data['per_iter']})")
    ax.set_xlabel("number of luminaires K")
    ax.set_ylabel("multiplications / divisions")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
