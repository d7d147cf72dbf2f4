"""Report figures written next to the delimited outputs of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _new(nrows=1, ncols=1, width=6.0, height=3.2):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(nrows, ncols, figsize=(width, height))
    return fig, ax


def _save(fig, path):
    with plt.rc_context(RC):
        fig.savefig(path)
    plt.close(fig)


def plot_motion_stats(rows, path) -> None:
    """Mean / max displacement and valid fraction per frame pair."""
    frames = [r["frame"] for r in rows]
    fig, (ax0, ax1) = _new(2, 1, height=4.4)
    ax0.plot(frames, [r["mean_px"] for r in rows], marker="o", ms=3, label="mean")
    ax0.plot(frames, [r["max_px"] for r in rows], marker="s", ms=3, label="max")
    ax0.set_ylabel("displacement (px)")
    ax0.legend(frameon=False)
    ax1.plot(frames, [r["valid_fraction"] for r in rows], color="k", marker=".", ms=4)
    ax1.set_ylim(-0.02, 1.02)
    ax1.set_ylabel("valid fraction")
    ax1.set_xlabel("frame pair l -> l+1")
    fig.align_ylabels()
    _save(fig, path)


def plot_metrics(rows, path) -> None:
    """One panel per metric across the paired frames."""
    names = [k for k in ("l1", "psnr", "ssim") if rows and k in rows[0]]
    fig, axes = _new(len(names), 1, height=1.6 * max(1, len(names)))
    if len(names) == 1:
        axes = [axes]
    idx = list(range(len(rows)))
    for ax, name in zip(axes, names):
        ax.plot(idx, [r[name] for r in rows], marker="o", ms=3)
        ax.set_ylabel(name.upper() if name != "l1" else "L1")
    axes[-1].set_xlabel("frame")
    _save(fig, path)
