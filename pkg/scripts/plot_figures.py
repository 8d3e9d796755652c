"""Render the quantile and relative-std figures from CLI output.

    csa-lab figure1 --out figure1.csv
    csa-lab figure2 --out figure2.csv
    python3 scripts/plot_figures.py figure1.csv figure2.csv --out-dir figs

Needs the ``plot`` extra (matplotlib).
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_quantiles(rows, out):
    series = defaultdict(lambda: ([], []))
    for r in rows:
        ts, vs = series[(float(r["c"]), float(r["level"]))]
        ts.append(int(r["t"]))
        vs.append(float(r["value"]))
    cs = sorted({c for c, _ in series}, reverse=True)
    fig, axes = plt.subplots(1, len(cs), figsize=(5 * len(cs), 4), sharey=True)
    for ax, c in zip(axes, cs):
        for (cc, level), (ts, vs) in sorted(series.items()):
            if cc == c:
                ax.plot(ts, vs, lw=1, label=f"{level:g}")
        ax.set_xscale("log")
        ax.set_title(f"c = {c:.4g}")
        ax.set_xlabel("t")
    axes[0].set_ylabel(r"$\ln(\sigma_t/\sigma_0)$")
    axes[-1].legend(title="quantile", fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_rel_std(rows, out):
    curves = defaultdict(lambda: ([], []))
    for r in rows:
        if r["rel_std"]:
            ns, vs = curves[r["curve"]]
            ns.append(float(r["n"]))
            vs.append(float(r["rel_std"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (ns, vs) in curves.items():
        ax.loglog(ns, vs, label=name)
    ax.set_xlabel("n")
    ax.set_ylabel("std / mean of log step-size increment")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("figure1")
    ap.add_argument("figure2")
    ap.add_argument("--out-dir", default=".")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plot_quantiles(load(args.figure1), out / "figure1.png")
    plot_rel_std(load(args.figure2), out / "figure2.png")


if __name__ == "__main__":
    main()
