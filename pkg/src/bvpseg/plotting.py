"""SVG figures of relative feature error against SNR.

Figures are drawn with matplotlib's object API (no pyplot state) and saved as
SVG with a fixed hash salt and no date stamp so reruns are byte-identical.
Each method's line and SEM band are tagged with ``id="line-<method>"`` and
``id="band-<method>"`` groups.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from .experiment import METHOD_LABELS, METHODS
from .features import FEATURE_LABELS

log = logging.getLogger(__name__)

COLORS = {"raw": "#D06062", "baseline": "#4E89B1", "segmentation": "#679E48",
          "oracle": "#7E57A5"}

STYLE = {
    "svg.hashsalt": "bvpseg",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "legend.framealpha": 0.0,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.5,
}


def _save(fig: Figure, path) -> None:
    with matplotlib.rc_context({"svg.hashsalt": STYLE["svg.hashsalt"]}):
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")


def _draw_curve(ax, x, mean, sem, key: str, label: str, color: str) -> None:
    order = np.argsort(x)
    x, mean, sem = x[order], mean[order], sem[order]
    (line,) = ax.plot(x, mean, color=color, label=label, marker=".", markersize=3)
    line.set_gid(f"line-{key}")
    ok = np.isfinite(sem)
    if ok.any():
        band = ax.fill_between(x, mean - np.where(ok, sem, 0), mean + np.where(ok, sem, 0),
                               where=ok, color=color, alpha=0.25, linewidth=0, interpolate=False)
        band.set_gid(f"band-{key}")


def plot_feature(curves: pd.DataFrame, feature: str, path, log_x: bool = True,
                 methods: Sequence[str] | None = None) -> list[str]:
    """Render one feature's mean rel_diff (with +-1 SEM band) against SNR.

    ``curves`` is the output of :func:`bvpseg.experiment.aggregate`. Buckets
    with infinite SNR (the uncorrupted signal) or no data are skipped.
    Returns the methods actually drawn.
    """
    sub = curves[(curves["feature"] == feature) & ~curves["empty"]
                 & np.isfinite(curves["snr_center"])]
    wanted = [m for m in (methods or METHODS)]
    present = [m for m in wanted if m in set(sub["method"])]
    for m in wanted:
        if m not in present:
            log.warning("method %s missing from records; plotting what exists", m)

    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 3.4))
        ax = fig.add_subplot(1, 1, 1)
        for m in present:
            c = sub[sub["method"] == m]
            _draw_curve(ax, c["snr_center"].to_numpy(float), c["mean"].to_numpy(float),
                        c["sem"].to_numpy(float), m, METHOD_LABELS.get(m, m), COLORS.get(m, "k"))
        if log_x:
            ax.set_xscale("log")
        ax.set_xlabel("SNR")
        ax.set_ylabel("relative difference")
        ax.set_title(FEATURE_LABELS.get(feature, feature))
        ax.axhline(0.0, color="0.6", linewidth=0.6, zorder=0)
        if present:
            ax.legend(loc="best")
        _save(fig, path)
    return present


def plot_window_sweep(curves_by_size: dict, feature: str, path, log_x: bool = True) -> None:
    """One segmentation-method curve per window size for ``feature``."""
    cmap = matplotlib.colormaps["viridis"]
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 3.4))
        ax = fig.add_subplot(1, 1, 1)
        sizes = sorted(curves_by_size)
        for i, size in enumerate(sizes):
            c = curves_by_size[size]
            c = c[(c["feature"] == feature) & ~c["empty"] & np.isfinite(c["snr_center"])]
            color = matplotlib.colors.to_hex(cmap(i / max(1, len(sizes) - 1)))
            _draw_curve(ax, c["snr_center"].to_numpy(float), c["mean"].to_numpy(float),
                        c["sem"].to_numpy(float), f"w{size:g}", f"{size:g} s window", color)
        if log_x:
            ax.set_xscale("log")
        ax.set_xlabel("SNR")
        ax.set_ylabel("relative difference")
        ax.set_title(f"{FEATURE_LABELS.get(feature, feature)}: segment size")
        ax.legend(loc="best")
        _save(fig, path)


def feature_filename(feature: str, suffix: str = ".svg") -> str:
    return feature.replace(".", "_") + suffix


def write_all(curves: pd.DataFrame, features: Sequence[str], out_dir, log_x: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in features:
        p = out_dir / feature_filename(f)
        plot_feature(curves, f, p, log_x=log_x)
        paths.append(p)
    return paths
