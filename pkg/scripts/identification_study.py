"""How often scored data separate bias from precision, by horizon and mode."""

import argparse
from collections import defaultdict

from repsim.core import ModelParams
from repsim.design import DesignConfig
from repsim.estimation import InsufficientData, NonConvergence, SlopeUnidentified
from repsim.estimation import estimate_gaussian, fit_calibration
from repsim.sim import Mode, SimConfig, identification_scenario

TYPES = (0, 0, 1, 0, 1, 0, 1, 0, 1, 0)
BIAS = (0.5, -0.5) + (0.0,) * 8


def success_rate(mode, horizon, reps, q, seed):
    # binary runs draw the state so the two topics do not share one truth
    params = ModelParams(true_state=None if mode is Mode.BINARY else 1)
    cfg = SimConfig(params=params, mode=mode, design=DesignConfig(eval_density=q), horizon=horizon,
                    n_replications=reps, seed=seed, topics=2, types=TYPES, bias_vector=BIAS)
    res = identification_scenario(cfg)
    groups = defaultdict(lambda: defaultdict(list))
    for o in res.observations:
        rep, j = o.expert_id[1:].split("-e")
        groups[int(rep)][int(j)].append(o)
    sign = order = 0
    for experts in groups.values():
        try:
            if mode is Mode.GAUSSIAN:
                fits = {j: estimate_gaussian(obs) for j, obs in experts.items()}
                bias = {j: f.b_hat for j, f in fits.items()}
                prec = {j: f.p_hat for j, f in fits.items()}
            else:
                fits = {j: fit_calibration(obs) for j, obs in experts.items()}
                bias = {j: f.implied_bias for j, f in fits.items()}
                prec = {j: f.slope for j, f in fits.items()}
        except (InsufficientData, SlopeUnidentified, NonConvergence):
            continue
        sign += bias[0] > 0 and bias[1] < 0
        hi = min(prec[j] for j in prec if TYPES[j])
        lo = max(prec[j] for j in prec if not TYPES[j])
        order += hi > lo
    return sign / len(groups), order / len(groups)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizons", type=int, nargs="+", default=[250, 500, 1000, 2000])
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--q", type=float, default=0.25)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    print(f"{'mode':>8} {'T':>5} {'sign':>6} {'order':>6}")
    for mode in (Mode.GAUSSIAN, Mode.BINARY):
        for T in args.horizons:
            s, o = success_rate(mode, T, args.reps, args.q, args.seed)
            print(f"{mode.value:>8} {T:>5} {s:>6.2f} {o:>6.2f}")


if __name__ == "__main__":
    main()
