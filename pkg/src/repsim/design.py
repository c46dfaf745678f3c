"""Light-touch design levers: evaluation windows and deviation penalties."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    TRUTHFUL,
    ContractViolation,
    MixSpec,
    Side,
    affine_diag,
    low_mixing,
    side_for,
)

BISECT_TOL = 1e-10


class ScoreKind(enum.Enum):
    LOG = "log"
    BRIER = "brier"
    NONE = "none"


class Schedule(enum.Enum):
    DETERMINISTIC = "deterministic"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class DesignConfig:
    """Observer design.

    eval_density: fraction of rounds that are scored against the truth.
    score: rule applied on scored rounds.
    penalty: cost kappa of a binary report that differs from the signal.
    tilt_cost: epsilon multiplying the quadratic tilt cost (Gaussian mode).
    eval_weight: exponent weight of each scored round in the reputation.
    schedule: every ceil(1/q)-th round, or independent Bernoulli(q) draws.
    """

    eval_density: float = 0.0
    score: ScoreKind = ScoreKind.LOG
    penalty: float = 0.0
    tilt_cost: float = 0.0
    eval_weight: float = 1.0
    schedule: Schedule = Schedule.DETERMINISTIC

    def __post_init__(self):
        if not (0.0 <= self.eval_density <= 1.0):
            raise ContractViolation("eval_density must lie in [0,1]")
        if self.penalty < 0 or self.tilt_cost < 0 or self.eval_weight < 0:
            raise ContractViolation("penalty, tilt_cost and eval_weight must be >= 0")
        if self.score is ScoreKind.NONE and self.eval_density > 0:
            raise ContractViolation("scored rounds need a scoring rule")


def effective_mixing(mix: MixSpec, q: float) -> MixSpec:
    """Round-averaged mix when a fraction ``q`` of rounds is scored (and truthful)."""
    if not (0.0 <= q <= 1.0):
        raise ContractViolation("q must lie in [0,1]")
    if mix.side is Side.MIX_AFTER_S1:
        return MixSpec(mix.side, (1.0 - q) * mix.prob + q)
    if mix.side is Side.MIX_AFTER_S0:
        return MixSpec(mix.side, (1.0 - q) * mix.prob)
    return mix


def score(kind: ScoreKind, pi: float, theta: int) -> float:
    """Positively oriented score of forecast ``pi`` for outcome ``theta``.

    Log score is ``log pi`` or ``log(1-pi)``; Brier is ``-(pi - theta)^2``.
    Both are <= 0 with 0 for a perfect forecast.
    """
    if kind is ScoreKind.LOG:
        p = pi if theta == 1 else 1.0 - pi
        if p <= 0.0:
            raise ValueError("log score is -inf: certain forecast on the wrong outcome")
        return math.log(p)
    if kind is ScoreKind.BRIER:
        return -((pi - theta) ** 2)
    raise ValueError("no scoring rule configured")


def bernoulli_kl(p, q):
    """KL(Bern(p) || Bern(q)), with 0 log 0 = 0.  Broadcasts."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(p > 0, p * np.log(p / q), 0.0)
        t0 = np.where(p < 1, (1 - p) * np.log((1 - p) / (1 - q)), 0.0)
    out = t1 + t0
    return float(out) if out.ndim == 0 else out


def expected_score_gap(p: float, q_r: float, kind: ScoreKind) -> float:
    """E_p[S(p)] - E_p[S(q_r)] for a binary outcome with Pr(1) = ``p``."""
    if kind is ScoreKind.LOG:
        return bernoulli_kl(p, q_r)
    if kind is ScoreKind.BRIER:
        return (p - q_r) ** 2
    raise ValueError("no scoring rule configured")


def _posterior(rho, l_h, l_l):
    return rho * l_h / (rho * l_h + (1.0 - rho) * l_l)


def _alpha_gain(alpha, rho, a_h, a_l):
    """rho+(0) - rho+(1) on the alpha side; increasing in alpha."""
    return _posterior(rho, 1.0 - a_h, 1.0 - alpha * a_l) - _posterior(rho, a_h, alpha * a_l)


def _beta_gain(beta, rho, a_h, a_l):
    """rho+(1) - rho+(0) on the beta side; decreasing in beta."""
    return _posterior(rho, a_h, a_l + beta * (1.0 - a_l)) - _posterior(
        rho, 1.0 - a_h, (1.0 - beta) * (1.0 - a_l)
    )


def penalty_mix_arrays(lam, rho, p_L, p_H, kappa):
    """Vectorised penalty-tilted mix.  Returns (side codes, prob) arrays.

    Lying costs ``kappa`` in reputation units, so the low type mixes where the
    liar's posterior exceeds the truth-teller's by exactly ``kappa``; if no
    such point exists it tells the truth.
    """
    lam, rho = np.broadcast_arrays(np.asarray(lam, float), np.asarray(rho, float))
    a_h = affine_diag(p_H, lam)
    a_l = affine_diag(p_L, lam)
    side = np.where(
        np.abs(lam - 0.5) <= 1e-12, 0, np.where(lam < 0.5, -1, 1)
    ).astype(np.int8)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha0 = np.where(side < 0, a_h / a_l, 1.0)
        beta0 = np.where(side > 0, (a_h - a_l) / (1.0 - a_l), 0.0)
    # bracket [lo, hi] with gain(lo) - kappa <= 0 <= gain(hi) - kappa on the alpha
    # side; on the beta side the gain is decreasing so the roles swap.
    lo = np.where(side < 0, alpha0, 0.0)
    hi = np.where(side < 0, 1.0, beta0)

    def excess(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(
                side < 0,
                _alpha_gain(x, rho, a_h, a_l),
                np.where(side > 0, _beta_gain(x, rho, a_h, a_l), 0.0),
            )
        return np.nan_to_num(g) - kappa

    if kappa <= 0:
        prob = np.where(side < 0, alpha0, beta0)
        return side, prob
    corner_alpha = (side < 0) & (excess(np.ones_like(lam)) <= 0)
    corner_beta = (side > 0) & (excess(np.zeros_like(lam)) <= 0)
    while np.any(hi - lo > BISECT_TOL):
        mid = 0.5 * (lo + hi)
        e = excess(mid)
        # alpha side: root above mid iff excess(mid) < 0; beta side: iff excess(mid) > 0
        go_up = np.where(side < 0, e < 0, e > 0)
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    root = 0.5 * (lo + hi)
    prob = np.where(side < 0, np.where(corner_alpha, 1.0, root), 0.0)
    prob = np.where(side > 0, np.where(corner_beta, 0.0, root), prob)
    prob = np.where(side == 0, 1.0, prob)
    return side, prob


def penalty_mixing(
    lam: float, p_L: float, p_H: float, kappa: float, rho: float = 0.5
) -> MixSpec:
    """Low-type mix when a report that differs from the signal costs ``kappa``.

    ``rho`` is the expert's current reputation; once ``kappa > 0`` the mix
    depends on it because reputational gains are measured in levels.
    """
    if kappa < 0:
        raise ContractViolation("kappa must be nonnegative")
    if kappa == 0:
        return low_mixing(lam, p_L, p_H)
    side = side_for(lam)
    if side is Side.TRUTHFUL:
        return TRUTHFUL
    _, prob = penalty_mix_arrays(lam, rho, p_L, p_H, kappa)
    return MixSpec(side, float(prob))


def scored_reputation_update(rho, y, theta, p_L, p_H, kind: ScoreKind, weight=1.0):
    """Reputation after a scored round where both types reported truthfully.

    Each type hypothesis forecasts the report, ``Pr_p(y=1 | theta)``, and is
    scored on the realised report; the prior odds are multiplied by
    ``exp(weight * score)`` and renormalised.  With the log score and unit
    weight this is Bayes' rule given the revealed state.  Broadcasts.
    """
    y = np.asarray(y)
    theta = np.asarray(theta)
    pi_h = np.where(theta == 1, p_H, 1.0 - p_H)
    pi_l = np.where(theta == 1, p_L, 1.0 - p_L)
    if kind is ScoreKind.LOG:
        s_h = np.log(np.where(y == 1, pi_h, 1.0 - pi_h))
        s_l = np.log(np.where(y == 1, pi_l, 1.0 - pi_l))
    elif kind is ScoreKind.BRIER:
        s_h = -((pi_h - y) ** 2)
        s_l = -((pi_l - y) ** 2)
    else:
        raise ValueError("no scoring rule configured")
    num = rho * np.exp(weight * s_h)
    out = num / (num + (1.0 - rho) * np.exp(weight * s_l))
    return float(out) if np.ndim(out) == 0 else out
