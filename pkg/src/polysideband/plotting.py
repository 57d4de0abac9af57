"""Line plots of CSV-style series, rendered to PNG files.

Only the non-interactive Agg backend is used, so rendering works headless.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_panels"]


def render_panels(path, x, panels, xlabel: str, title: str = "", markers: bool = False, vlines=()) -> Path:
    """Write one PNG with a stacked subplot per panel.

    ``panels`` is a list of ``(ylabel, {legend: y_values})``.  ``vlines``
    draws dashed reference lines, e.g. at whole drive periods.
    """
    path = Path(path)
    fig, axes = plt.subplots(len(panels), 1, figsize=(7, 2.8 * len(panels)), sharex=True, squeeze=False)
    style = "s-" if markers else "-"
    for ax, (ylabel, series) in zip(axes[:, 0], panels):
        for label, y in series.items():
            ax.plot(x, np.asarray(y, dtype=float), style, label=label, lw=1.2, ms=4)
        for v in vlines:
            ax.axvline(v, color="k", ls="--", lw=0.6)
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8, loc="best")
        ax.grid(alpha=0.3)
    axes[-1, 0].set_xlabel(xlabel)
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".png.tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=120, metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path
