"""Flat ``key=value`` run configuration.

Lines starting with ``#`` are comments.  Each command accepts a fixed key
set and rejects anything else, so a manifest written by one run can be fed
back verbatim to reproduce it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

from .core import ModelParams
from .correlated import CovSpec, Weighting
from .design import DesignConfig, Schedule, ScoreKind
from .sim import Mode, ScoredRule, SimConfig


class ConfigError(ValueError):
    pass


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _opt(parse):
    def inner(s: str):
        return None if s.strip().lower() in ("", "none") else parse(s)
    return inner


def _floats(s: str) -> tuple[float, ...]:
    return tuple(_float(x) for x in s.split(",") if x.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _choice(*options):
    def inner(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return inner


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any


KEYS: dict[str, Key] = {
    # panel
    "p_L": Key(_float, 0.6),
    "p_H": Key(_float, 0.8),
    "prior_high": Key(_float, 0.5),
    "n_experts": Key(_int, 10),
    "prior": Key(_float, 0.4),
    "true_state": Key(_opt(_int), 1),
    # design
    "q": Key(_float, 0.0),
    "score": Key(_choice("log", "brier", "none"), "log"),
    "penalty": Key(_float, 0.0),
    "tilt_cost": Key(_float, 0.0),
    "eval_weight": Key(_float, 1.0),
    "schedule": Key(_choice("deterministic", "bernoulli"), "deterministic"),
    # simulation
    "mode": Key(_choice("binary", "gaussian"), "binary"),
    "horizon": Key(_int, 100),
    "n_replications": Key(_int, 1),
    "seed": Key(_int, 0),
    "rho_c": Key(_float, 0.0),
    "weighting": Key(_choice("information", "normalized"), "information"),
    "bias": Key(_opt(_floats), None),
    "types": Key(_opt(_ints), None),
    "topics": Key(_int, 1),
    "gauss_prior_mean": Key(_float, 0.0),
    "gauss_prior_var": Key(_float, 1.0),
    "gauss_theta": Key(_opt(_float), None),
    "gauss_scored_rule": Key(_choice("truthful", "tilt"), "truthful"),
    "forecast_eps": Key(_float, 0.05),
    "trajectory_format": Key(_choice("long", "per_replication"), "long"),
    # mixing curves
    "lambda_min": Key(_float, 0.05),
    "lambda_max": Key(_float, 0.95),
    "lambda_step": Key(_float, 0.005),
    # hitting times
    "q_list": Key(_floats, (0.0, 0.25, 0.5, 0.75, 1.0)),
    "lambda_hit": Key(_float, 0.8),
    "rho": Key(_float, 0.5),
    # estimation
    "data": Key(str, ""),
    "prior_offset": Key(_bool, False),
    # output
    "full_precision": Key(_bool, False),
}

_SIM_KEYS = (
    "p_L", "p_H", "prior_high", "n_experts", "prior", "true_state",
    "q", "score", "penalty", "tilt_cost", "eval_weight", "schedule",
    "mode", "horizon", "n_replications", "seed", "rho_c", "weighting", "bias", "types",
    "topics", "gauss_prior_mean", "gauss_prior_var", "gauss_theta", "gauss_scored_rule",
    "forecast_eps", "trajectory_format", "full_precision",
)

COMMAND_KEYS: dict[str, tuple[str, ...]] = {
    "mixing-curves": ("p_L", "p_H", "q", "lambda_min", "lambda_max", "lambda_step",
                      "seed", "full_precision"),
    "hitting-times": ("p_L", "p_H", "n_experts", "prior", "lambda_hit", "rho", "q_list",
                      "seed", "full_precision"),
    "simulate": _SIM_KEYS,
    "estimate": ("data", "mode", "prior_offset", "seed", "full_precision"),
}

#: per-command defaults that differ from the global table
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "mixing-curves": {"q": 0.5},
}


def parse_text(text: str, allowed: tuple[str, ...], source: str = "<config>") -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {s!r}")
        k, v = (part.strip() for part in s.split("=", 1))
        if k not in allowed:
            raise ConfigError(f"{source}:{lineno}: unknown key {k!r}")
        if k in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {k!r}")
        raw[k] = v
    return raw


def resolve(command: str, raw: dict[str, str]) -> dict[str, Any]:
    """Typed values for every key of ``command``, defaults filled in."""
    allowed = COMMAND_KEYS[command]
    out: dict[str, Any] = {}
    for k in allowed:
        if k in raw:
            try:
                out[k] = KEYS[k].parse(raw[k])
            except ValueError as exc:
                raise ConfigError(f"bad value for {k}: {raw[k]!r} ({exc})") from None
        else:
            out[k] = COMMAND_DEFAULTS.get(command, {}).get(k, KEYS[k].default)
    for k in raw:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} for {command}")
    return out


def format_value(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    return str(v)


def format_config(command: str, values: dict[str, Any]) -> str:
    return "".join(f"{k}={format_value(values[k])}\n" for k in COMMAND_KEYS[command])


def sim_config(values: dict[str, Any]) -> SimConfig:
    """Build a SimConfig from resolved ``simulate`` values."""
    params = ModelParams(
        p_L=values["p_L"], p_H=values["p_H"], prior_high=values["prior_high"],
        n_experts=values["n_experts"], true_state=values["true_state"], prior=values["prior"],
    )
    design = DesignConfig(
        eval_density=values["q"], score=ScoreKind(values["score"]), penalty=values["penalty"],
        tilt_cost=values["tilt_cost"], eval_weight=values["eval_weight"],
        schedule=Schedule(values["schedule"]),
    )
    cov = None
    if values["rho_c"] > 0:
        cov = CovSpec.exchangeable(params.n_experts, values["rho_c"])
    return SimConfig(
        params=params, design=design, cov=cov, horizon=values["horizon"],
        n_replications=values["n_replications"], seed=values["seed"],
        mode=Mode(values["mode"]), bias_vector=values["bias"], topics=values["topics"],
        types=values["types"], gauss_prior_mean=values["gauss_prior_mean"],
        gauss_prior_var=values["gauss_prior_var"], gauss_theta=values["gauss_theta"],
        gauss_scored_rule=ScoredRule(values["gauss_scored_rule"]),
        weighting=Weighting(values["weighting"]), forecast_eps=values["forecast_eps"],
    )
