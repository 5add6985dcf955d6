"""Figures rendered from a finished run directory.

Only the ``report`` subcommand imports this module; runs themselves write
CSVs and never plot. Figures follow one convention: the first CSV column is
the abscissa.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

golden_mean = (np.sqrt(5.0) - 1.0) / 2.0
fig_width = 5.0
fig_size = [fig_width, fig_width * golden_mean]

params = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "mathtext.fontset": "stix",
    "figure.figsize": fig_size,
    "figure.dpi": 150,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.bbox": "tight",
}

# tables plotted on log-log axes; everything else is linear
LOGLOG = ("_decay", "_sup_left", "_sup_right", "compare")


def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    return header, data.reshape(-1, len(header))


def newfig() -> tuple[plt.Figure, plt.Axes]:
    with plt.rc_context(params):
        fig, ax = plt.subplots()
    return fig, ax


def _slope_guide(ax: plt.Axes, t: np.ndarray, y: np.ndarray, slope: float) -> None:
    good = y > 0
    if np.count_nonzero(good) < 2:
        return
    t0, y0 = t[good][0], y[good][0]
    ax.plot(t, y0 * (t / t0) ** slope, "k:", lw=0.8, label=f"slope {slope:g}")


def plot_table(name: str, header: list[str], data: np.ndarray, out: Path) -> Path:
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        x = data[:, 0]
        if name == "compare":
            for t in np.unique(x):
                sub = data[x == t]
                ax.loglog(sub[:, 1], sub[:, 2], "o-", label=f"L1, t = {t:g}")
                _slope_guide(ax, sub[:, 1], sub[:, 2], 1.0)
            ax.set_xlabel("dx")
            ax.set_ylabel("gap")
        elif name == "shock_trace":
            res = np.abs(data[:, 3])
            (ax.loglog if np.any(res > 0) else ax.semilogx)(x, res, "o-", label="|residual|")
            _slope_guide(ax, x, res, -1.0)
            ax.set_xlabel(header[0])
        else:
            loglog = any(key in name for key in LOGLOG) and bool(np.any(data[:, 1] != 0))
            y = np.abs(data[:, 1]) if loglog else data[:, 1]
            plot = ax.loglog if loglog else ax.plot
            plot(x, y, "o-", label=header[1])
            if "predicted" in header:
                plot(x, np.abs(data[:, 2]) if loglog else data[:, 2], "s--", label="predicted")
            if loglog:
                rate = -0.5 if ("rarefaction" in name or "constant" in name) else -1.0
                _slope_guide(ax, x, y, rate)
            ax.set_xlabel(header[0])
        ax.set_title(name.replace("_", " "))
        ax.legend()
        path = out / f"{name}.png"
        fig.savefig(path)
        plt.close(fig)
    return path


def render_report(outdir: str | Path) -> list[Path]:
    """Render one PNG per CSV in ``outdir``; returns the written paths."""
    outdir = Path(outdir)
    csvs = sorted(outdir.glob("*.csv"))
    if not csvs:
        raise FileNotFoundError(f"no CSV files in {outdir}")
    written = []
    for path in csvs:
        header, data = read_table(path)
        if data.shape[0] == 0:
            continue
        written.append(plot_table(path.stem, header, data, outdir))
    return written
