"""Command line entry point.

Every command writes its CSVs plus ``manifest.txt`` into ``--out``.  The
manifest body is a config file; passing it back through ``--config``
reproduces the CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import COMMAND_KEYS, ConfigError, format_config, parse_text, resolve, sim_config
from .core import ContractViolation, MixSpec, Side, alpha_beta, low_mixing
from .design import effective_mixing
from .estimation import (
    InsufficientData,
    NonConvergence,
    SlopeUnidentified,
    estimate_gaussian,
    fit_calibration,
    group_by_expert,
)
from .io import DataError, read_observations, write_csv, write_observations
from .sim import (
    NONID_MESSAGE,
    RNG_ID,
    Mode,
    NonIdentificationWarning,
    convergence_fraction,
    hitting_time_approx,
    identification_scenario,
    martingale_diagnostic,
    panel_kl,
    polarization,
    simulate,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


# ---------------------------------------------------------------------------
# commands


def lambda_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if not (0.0 < lo < hi < 1.0) or step <= 0:
        raise ContractViolation("grid needs 0 < lambda_min < lambda_max < 1 and step > 0")
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 12)


def cmd_mixing_curves(v: dict[str, Any], out: Path) -> list[str]:
    p_L, p_H, q = v["p_L"], v["p_H"], v["q"]
    if not (0.5 <= p_L < p_H < 1.0) or not (0.0 <= q <= 1.0):
        raise ContractViolation("need 1/2 <= p_L < p_H < 1 and q in [0,1]")
    grid = lambda_grid(v["lambda_min"], v["lambda_max"], v["lambda_step"])
    alpha, beta = alpha_beta(grid, p_L, p_H)
    rows = []
    for lam, a, b in zip(grid, alpha, beta):
        mix = low_mixing(float(lam), p_L, p_H)
        if mix.side is Side.TRUTHFUL:
            a, b = 1.0, 0.0
        a_q = effective_mixing(MixSpec(Side.MIX_AFTER_S1, a), q).prob if not np.isnan(a) else None
        b_q = effective_mixing(MixSpec(Side.MIX_AFTER_S0, b), q).prob if not np.isnan(b) else None
        rows.append((float(lam), a, a_q, b, b_q))
    write_csv(out / "mixing_curves.csv",
              ["lambda", "alpha_baseline", "alpha_q", "beta_baseline", "beta_q"],
              rows, v["full_precision"])
    return ["mixing_curves.csv"]


def drift_constants(v: dict[str, Any]) -> tuple[float, float]:
    lam0, rho = v["prior"], v["rho"]
    d_mix = panel_kl(lam0, rho, v["p_L"], v["p_H"], low_mixing(lam0, v["p_L"], v["p_H"]))
    d_truth = panel_kl(lam0, rho, v["p_L"], v["p_H"], MixSpec(Side.TRUTHFUL))
    return d_mix, d_truth


def cmd_hitting_times(v: dict[str, Any], out: Path) -> list[str]:
    d_mix, d_truth = drift_constants(v)
    print(f"D_mix={d_mix:.6f}")
    print(f"D_truth={d_truth:.6f}")
    rows = [
        (q, hitting_time_approx(v["prior"], v["lambda_hit"], v["n_experts"], q, d_mix, d_truth))
        for q in v["q_list"]
    ]
    write_csv(out / "hitting_times.csv", ["q", "E_tau"], rows, v["full_precision"])
    return ["hitting_times.csv"]


def _trajectory_rows(tr, gaussian: bool):
    for i in range(tr.scored.size + 1):
        lead = (tr.mean[i], tr.var[i]) if gaussian else (tr.lam[i],)
        flag = int(tr.scored[i - 1]) if i > 0 else 0
        yield (i, *lead, *tr.rho[:, i], flag)


def cmd_simulate(v: dict[str, Any], out: Path) -> list[str]:
    cfg = sim_config(v)
    full = v["full_precision"]
    gaussian = cfg.mode is Mode.GAUSSIAN
    N = cfg.params.n_experts
    cols = (["t", "m", "V"] if gaussian else ["t", "lambda"]) + [
        f"rho_{j + 1}" for j in range(N)] + ["scored"]
    written = []

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonIdentificationWarning)
        ident = identification_scenario(cfg)
    if ident.trajectories:
        trajs = ident.trajectories
    else:
        trajs = simulate(cfg)

    if v["trajectory_format"] == "long":
        rows = (
            (tr.replication, tr.topic, *row)
            for tr in trajs for row in _trajectory_rows(tr, gaussian)
        )
        write_csv(out / "trajectories.csv", ["replication", "topic"] + cols, rows, full)
        written.append("trajectories.csv")
    else:
        for tr in trajs:
            name = f"trajectory_r{tr.replication:04d}_k{tr.topic}.csv"
            write_csv(out / name, cols, _trajectory_rows(tr, gaussian), full)
            written.append(name)

    summary: list[tuple[str, float]] = []
    if gaussian:
        err = np.array([abs(tr.mean[-1] - tr.theta) for tr in trajs])
        sd = np.array([np.sqrt(tr.var[-1]) for tr in trajs])
        summary += [
            ("mean_abs_error_T", float(err.mean())),
            ("coverage_3sd_T", float(np.mean(err < 3 * sd))),
            ("mean_V_T", float(np.mean(sd**2))),
        ]
    else:
        summary += [
            ("fraction_lambda_T_above_0.95", convergence_fraction(trajs, 0.95)),
            ("mean_lambda_T", float(np.mean([tr.lam[-1] for tr in trajs]))),
            ("offpath_events", float(sum(tr.n_offpath for tr in trajs))),
        ]
    if N > 0:
        mg = martingale_diagnostic(trajs)
        summary += [
            ("polarization_T", polarization(trajs)),
            ("martingale_drift", mg.pooled_mean),
            ("martingale_se", mg.pooled_se),
            ("martingale_z", mg.pooled_z),
        ]
    write_csv(out / "summary.csv", ["metric", "value"], summary, full)
    written.append("summary.csv")

    if ident.warning:
        (out / "identification_warning.txt").write_text(NONID_MESSAGE + "\n", encoding="utf-8")
        written.append("identification_warning.txt")
    else:
        write_observations(out / "scored_observations.csv", ident.observations, full)
        written.append("scored_observations.csv")
    return written


def cmd_estimate(v: dict[str, Any], out: Path) -> list[str]:
    if not v["data"]:
        raise DataError("no data file given (use --data or data=...)")
    found, obs = read_observations(Path(v["data"]))
    if found != v["mode"]:
        raise DataError(f"{v['data']}: columns are for {found} data, mode is {v['mode']}")
    rows = []
    for eid, group in group_by_expert(obs).items():
        try:
            if found == "binary":
                f = fit_calibration(group, prior_offset=v["prior_offset"])
                rows.append((eid, f.intercept, f.slope, f.se_intercept, f.se_slope, int(f.converged)))
            else:
                g = estimate_gaussian(group)
                rows.append((eid, g.b_hat, g.p_hat, g.se_b, g.se_p, int(not g.infinite_precision)))
        except (InsufficientData, SlopeUnidentified, NonConvergence) as exc:
            print(f"warning: {eid}: {exc}", file=sys.stderr)
            rows.append((eid, None, None, None, None, 0))
    header = ["expert_id"] + (
        ["intercept", "slope"] if found == "binary" else ["b_hat", "p_hat"]
    ) + ["se_intercept", "se_slope", "converged"]
    write_csv(out / "fits.csv", header, rows, v["full_precision"])
    return ["fits.csv"]


COMMANDS = {
    "mixing-curves": cmd_mixing_curves,
    "hitting-times": cmd_hitting_times,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
}


# ---------------------------------------------------------------------------
# manifest


def write_manifest(out: Path, command: str, values: dict[str, Any], outputs, seconds: float):
    head = [
        f"# command: {command}",
        f"# version: {__version__}",
        f"# rng: {RNG_ID}",
        f"# outputs: {' '.join(outputs)}",
        f"# duration_seconds: {seconds:.3f}",
    ]
    text = "\n".join(head) + "\n" + format_config(command, values)
    (out / "manifest.txt").write_text(text, encoding="utf-8")


def run(command: str, raw: dict[str, str], out: Path) -> list[str]:
    values = resolve(command, raw)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    outputs = COMMANDS[command](values, out)
    write_manifest(out, command, values, outputs, time.perf_counter() - start)
    return outputs


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="repsim", description="Reputation and reporting simulations.")
    p.add_argument("--version", action="version", version=f"repsim {__version__} rng={RNG_ID}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--config", type=Path, default=None, help="key=value file or manifest")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        s.add_argument("--full-precision", action="store_true",
                       help="write shortest round-trip floats instead of 12 digits")
        if name == "estimate":
            s.add_argument("--data", type=Path, default=None)
            s.add_argument("--mode", choices=("binary", "gaussian"), default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    allowed = COMMAND_KEYS[args.command]
    try:
        raw: dict[str, str] = {}
        if args.config is not None:
            try:
                text = args.config.read_text(encoding="utf-8")
            except OSError as exc:
                raise DataError(f"cannot read config {args.config}: {exc.strerror}") from None
            raw.update(parse_text(text, allowed, str(args.config)))
        for item in args.set:
            raw.update(parse_text(item, allowed, "--set"))
        if args.seed is not None:
            raw["seed"] = str(args.seed)
        if args.full_precision:
            raw["full_precision"] = "true"
        if args.command == "estimate":
            if args.data is not None:
                raw["data"] = str(args.data)
            if args.mode is not None:
                raw["mode"] = args.mode
        run(args.command, raw, args.out)
    except (ConfigError, DataError, ContractViolation) as exc:
        print(f"repsim: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"repsim: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
