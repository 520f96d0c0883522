#!/usr/bin/env python3
"""Plot the CSV files written by `advgnn experiment`.

Usage: plot_results.py RESULTS_DIR [--out FIGURE_DIR]

Writes:
  replicates.png  per-replicate metric for every cell (box + points)
  samples.png     distribution of every per-instance sample, one box per cell
  sweep.png       validation metric and accuracy against epsilon per adversarial cell
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def box_by_cell(ax, frame, column, title):
    cells = list(dict.fromkeys(frame["cell"]))
    data = [frame.loc[frame["cell"] == c, column].to_numpy() for c in cells]
    ax.boxplot(data, showfliers=False)
    for i, values in enumerate(data, start=1):
        ax.scatter([i] * len(values), values, s=8, alpha=0.6)
    ax.set_xticks(range(1, len(cells) + 1), cells, rotation=30, ha="right")
    ax.set_title(title)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("results", type=Path)
    parser.add_argument("--out", type=Path)
    args = parser.parse_args()
    out = args.out or args.results / "figures"
    out.mkdir(parents=True, exist_ok=True)

    reps = pd.read_csv(args.results / "replicates.csv")
    fig, ax = plt.subplots(figsize=(8, 4))
    box_by_cell(ax, reps, "metric_mean", "mean metric per replicate")
    fig.tight_layout()
    fig.savefig(out / "replicates.png", dpi=120)

    samples = pd.read_csv(args.results / "samples.csv")
    primary = samples[samples["metric"].isin(["spearman", "precision"])].copy()
    primary["cell"] = primary["model_id"].str.split("/").str[0]
    fig, ax = plt.subplots(figsize=(8, 4))
    box_by_cell(ax, primary, "value", "per-instance samples")
    fig.tight_layout()
    fig.savefig(out / "samples.png", dpi=120)

    sweep = pd.read_csv(args.results / "sweep.csv")
    if not sweep.empty:
        fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
        for cell, rows in sweep.groupby("cell", sort=False):
            left.plot(rows["epsilon"], rows["val_metric"], marker="o", label=cell)
            right.plot(rows["epsilon"], rows["val_accuracy"], marker="o", label=cell)
        left.set(xlabel="epsilon", title="validation metric")
        right.set(xlabel="epsilon", title="validation accuracy")
        left.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(out / "sweep.png", dpi=120)
    print(f"figures written to {out}")


if __name__ == "__main__":
    main()
