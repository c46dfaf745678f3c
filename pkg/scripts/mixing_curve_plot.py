"""Low-type mixing curves with and without evaluation windows, as CSV plus a text sketch."""

import argparse
from pathlib import Path

import numpy as np

from repsim.cli import main as cli_main


def sketch(lam, y, width=60, height=12):
    """Crude terminal plot of y against lam on [0, 1] x [0, 1]."""
    grid = [[" "] * width for _ in range(height)]
    for x, v in zip(lam, y):
        if np.isnan(v):
            continue
        c = min(width - 1, int(x * width))
        r = height - 1 - min(height - 1, int(v * height))
        grid[r][c] = "*"
    return "\n".join("|" + "".join(row) for row in grid) + "\n+" + "-" * width


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("mixing_curves_out"))
    ap.add_argument("--q", type=float, default=0.5)
    args = ap.parse_args()
    code = cli_main(["mixing-curves", "--out", str(args.out), "--set", f"q={args.q}"])
    if code:
        raise SystemExit(code)
    data = np.genfromtxt(args.out / "mixing_curves.csv", delimiter=",", names=True)
    lam = data["lambda"]
    both = np.where(lam < 0.5, data["alpha_baseline"], data["beta_baseline"])
    both_q = np.where(lam < 0.5, data["alpha_q"], data["beta_q"])
    print("baseline: alpha for lambda < 1/2, beta for lambda > 1/2")
    print(sketch(lam, both))
    print(f"with evaluation density q = {args.q}")
    print(sketch(lam, both_q))
    print(f"wrote {args.out / 'mixing_curves.csv'}")


if __name__ == "__main__":
    main()
