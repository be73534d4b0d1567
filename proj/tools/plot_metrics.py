#!/usr/bin/env python3
"""Render training curves from metrics CSVs.

Usage: plot_metrics.py out.png metrics_a.csv [metrics_b.csv ...]

One panel per metric (train/val accuracy, token entropy, step KL, eta),
one line per input file, labeled by file stem.
"""

import csv
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    return {
        key: [float(r[key]) for r in rows]
        for key in rows[0]
    }


def main():
    if len(sys.argv) < 3:
        sys.exit(__doc__.strip())
    out = sys.argv[1]
    runs = {pathlib.Path(p).stem: load(p) for p in sys.argv[2:]}

    panels = [
        ("train_acc", "training accuracy"),
        ("val_acc", "validation accuracy"),
        ("mean_entropy", "mean token entropy"),
        ("mean_kl_step", "step KL"),
        ("eta", "discount factor eta"),
        ("mean_bonus", "mean entropy bonus"),
    ]
    fig, axes = plt.subplots(2, 3, figsize=(15, 7))
    for ax, (key, title) in zip(axes.flat, panels):
        for name, data in runs.items():
            ax.plot(data["step"], data[key], label=name, linewidth=1.2)
        ax.set_title(title)
        ax.set_xlabel("step")
        ax.grid(True, alpha=0.3)
    axes.flat[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
