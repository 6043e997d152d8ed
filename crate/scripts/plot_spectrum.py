"""Plot a spectrum.csv written by `viscospectral spectrum`.

usage: python scripts/plot_spectrum.py out/spectrum.csv [figure.png]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main(argv):
    if len(argv) < 2:
        sys.exit(__doc__)
    df = pd.read_csv(argv[1])
    target = argv[2] if len(argv) > 2 else "spectrum.png"

    fig, ax = plt.subplots(figsize=(7, 5))
    real = df[df.kind.str.startswith("real")]
    for kind, group in real.groupby("kind"):
        ax.scatter(group.re, group.im, s=8, label=kind)
    cplx = df[df.kind.str.startswith("complex")]
    sc = ax.scatter(cplx.re, cplx.im, c=cplx.n, s=6, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="mode n")
    ax.axvline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_yscale("symlog", linthresh=1.0)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    print(target)


if __name__ == "__main__":
    main(sys.argv)
