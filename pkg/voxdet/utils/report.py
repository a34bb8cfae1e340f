"""
Result files: precision-recall CSV, SVG plot and the summary JSON.
"""

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PR_HEADER = ["threshold", "precision", "recall", "tp", "fp", "fn"]


def _ensure_parent(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def save_pr_csv(curve, path):
    """One row per threshold; floats written with repr() so they read back exactly."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PR_HEADER)
        for row in curve.rows:
            writer.writerow([repr(float(row.threshold)), repr(float(row.precision)),
                             repr(float(row.recall)), row.tp, row.fp, row.fn])


def plot_pr_curves(curves, path, title="Precision-recall"):
    """Recall on x, precision on y, both [0, 1] with 0.1 ticks; one line per curve."""
    _ensure_parent(path)
    plt.rcParams["svg.hashsalt"] = "voxdet"
    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        for curve in curves:
            recall = [row.recall for row in curve.rows]
            precision = [row.precision for row in curve.rows]
            ax.plot(recall, precision, drawstyle="steps-post", label=curve.label or None)
        ticks = np.round(np.linspace(0.0, 1.0, 11), 1)
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.0)
        ax.set_xticks(ticks)
        ax.set_yticks(ticks)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        if any(c.label for c in curves):
            ax.legend(loc="lower left")
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)


def write_json(data, path):
    """Deterministic JSON (sorted keys, no timestamps)."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
