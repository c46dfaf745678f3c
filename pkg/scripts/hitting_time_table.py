"""Expected hitting times of the public log-odds for a range of evaluation densities."""

import argparse

from repsim.cli import drift_constants
from repsim.config import resolve
from repsim.sim import hitting_time_approx


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-experts", type=int, default=None)
    ap.add_argument("--lambda-hit", type=float, default=None)
    args = ap.parse_args()
    raw = {}
    if args.n_experts is not None:
        raw["n_experts"] = str(args.n_experts)
    if args.lambda_hit is not None:
        raw["lambda_hit"] = str(args.lambda_hit)
    v = resolve("hitting-times", raw)
    d_mix, d_truth = drift_constants(v)
    print(f"D_mix   = {d_mix:.6f}")
    print(f"D_truth = {d_truth:.6f}")
    print(f"{'q':>6}  {'E_tau':>8}")
    for q in v["q_list"]:
        e = hitting_time_approx(v["prior"], v["lambda_hit"], v["n_experts"], q, d_mix, d_truth)
        print(f"{q:>6.2f}  {e:>8.3f}")


if __name__ == "__main__":
    main()
