"""Plots the CSVs written by `stsleak` sweeps.

    stsleak transparency --out transparency.csv
    stsleak eve-ber --out eve.csv
    stsleak accuracy-ber --out accuracy.csv
    stsleak voting --out voting.csv
    python python/plot_results.py transparency.csv eve.csv accuracy.csv voting.csv

Each figure is written next to its CSV as a PNG. The first CSV line (config hash)
is skipped.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def load(path):
    return pd.read_csv(path, comment="#")


def ber_curves(df, group, x, ax, label_fmt):
    for key, g in df.groupby(group):
        g = g.sort_values(x)
        y = g["ber"].where(g["ber"] > 0)
        ax.semilogy(g[x], y, marker="o", label=label_fmt.format(key))


def plot(path):
    df = load(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    cols = set(df.columns)
    if "missed" in cols:
        ber_curves(df, "alpha", "snr_db", ax, "alpha={}")
        ax.set(xlabel="SNR (dB)", ylabel="Bob payload BER")
    elif "erasures" in cols:
        ber_curves(df, "alpha", "snr_db", ax, "alpha={}")
        ax.set(xlabel="SNR (dB)", ylabel="Eve covert BER")
    elif "mean_accuracy" in cols:
        for prec, g in df[df["ber"] > 0].groupby("precision"):
            ax.errorbar(g["ber"], g["mean_accuracy"], yerr=g["stderr"], marker="o", label=prec)
        ax.set_xscale("log")
        ax.set(xlabel="bit error rate", ylabel="test accuracy")
    elif "predicted_ber" in cols:
        for q, g in df.groupby("q"):
            ax.semilogy(g["r"], g["predicted_ber"], label=f"q={q} closed form")
            ax.semilogy(g["r"], g["empirical_ber"].where(g["empirical_ber"] > 0), "o", label=f"q={q} simulated")
        ax.set(xlabel="repetitions r", ylabel="post-vote BER")
    else:
        raise SystemExit(f"{path}: unrecognised CSV layout")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    out = Path(path).with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        raise SystemExit(__doc__)
    for p in sys.argv[1:]:
        plot(p)
