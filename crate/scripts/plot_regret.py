"""Plot cumulative regret from `delaypo run` output.

Usage: python scripts/plot_regret.py OUT_DIR [OUT_DIR ...]

Each directory is drawn as the mean of its run_seed*.csv files with a band of
one standard deviation across seeds.
"""

import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def load(directory):
    frames = [pd.read_csv(p) for p in sorted(Path(directory).glob("run_seed*.csv"))]
    if not frames:
        raise SystemExit(f"no run_seed*.csv in {directory}")
    regret = pd.concat([f.set_index("episode")["cum_regret"] for f in frames], axis=1)
    return regret.mean(axis=1), regret.std(axis=1, ddof=0)


def main(dirs):
    fig, ax = plt.subplots(figsize=(7, 4))
    for d in dirs:
        mean, std = load(d)
        ax.plot(mean.index, mean, label=Path(d).name)
        ax.fill_between(mean.index, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("episode")
    ax.set_ylabel("cumulative regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig("regret.png", dpi=150)
    print("wrote regret.png")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        raise SystemExit(__doc__)
    main(sys.argv[1:])
