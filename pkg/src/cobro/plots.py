"""Deterministic SVG line charts rendered from the CSV outputs."""
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "cobro", "svg.fonttype": "none", "figure.figsize": (6.4, 4.2)}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _float(v):
    return float(v) if v not in ("", None) else float("nan")


def line_chart(csv_path, svg_path, x, y, group=None, xlabel=None, ylabel=None, title=None):
    """One line per value of ``group`` (or a single line), read from ``csv_path``."""
    rows = read_csv(csv_path)
    series = {}
    for row in rows:
        series.setdefault(row[group] if group else y, []).append((_float(row[x]), _float(row[y])))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name, pts in series.items():
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker=".", label=name)
        ax.set_xlabel(xlabel or x)
        ax.set_ylabel(ylabel or y)
        if title:
            ax.set_title(title)
        if group:
            ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(Path(svg_path), format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return Path(svg_path)
