"""Binary baseline: stage-game equilibrium, report likelihoods and aggregation.

The high type reports its signal; the low type distorts one-sidedly around the
public belief.  Below one half it sometimes swallows a favourable signal
(reports 0 after s=1), above one half it sometimes inflates an unfavourable
one (reports 1 after s=0).  The mixing probabilities equalise the two
reputational posteriors and have closed forms.

Beliefs are carried as log-odds; probabilities are materialised only when a
formula needs them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit
from scipy.special import logit as _logit

#: |lambda - 1/2| below this is treated as exactly one half.
HALF_TOL = 1e-12
#: floor applied to likelihoods before taking logs.
LIKELIHOOD_FLOOR = 1e-300


class OffPathReport(ValueError):
    """A report that has zero probability under both types."""


class ContractViolation(ValueError):
    """Inputs that break an operation's precondition."""


class Side(enum.IntEnum):
    """Which signal the low type distorts.  Integer values are used in arrays."""

    MIX_AFTER_S1 = -1
    TRUTHFUL = 0
    MIX_AFTER_S0 = 1


class ExpertType(enum.Enum):
    HIGH = "H"
    LOW = "L"


def side_for(lam: float) -> Side:
    if abs(lam - 0.5) <= HALF_TOL:
        return Side.TRUTHFUL
    return Side.MIX_AFTER_S1 if lam < 0.5 else Side.MIX_AFTER_S0


@dataclass(frozen=True)
class ModelParams:
    """Panel primitives.

    ``true_state=None`` means the state is drawn from ``prior`` in simulation.
    """

    p_L: float = 0.6
    p_H: float = 0.8
    prior_high: float = 0.5
    n_experts: int = 10
    true_state: int | None = 1
    prior: float = 0.4

    def __post_init__(self):
        if not (0.5 <= self.p_L < self.p_H < 1.0):
            raise ContractViolation(
                f"need 1/2 <= p_L < p_H < 1, got p_L={self.p_L}, p_H={self.p_H}"
            )
        if not (0.0 < self.prior_high < 1.0):
            raise ContractViolation(f"prior_high must lie in (0,1), got {self.prior_high}")
        if not (0.0 < self.prior < 1.0):
            raise ContractViolation(f"prior must lie in (0,1), got {self.prior}")
        if self.n_experts < 0:
            raise ContractViolation("n_experts must be nonnegative")
        if self.true_state not in (0, 1, None):
            raise ContractViolation("true_state must be 0, 1 or None")


@dataclass(frozen=True)
class PublicBelief:
    """Posterior that the state equals one, stored as log-odds."""

    logit: float

    def __post_init__(self):
        if not math.isfinite(self.logit):
            raise ContractViolation("public belief must be strictly interior")

    @classmethod
    def from_prob(cls, lam: float) -> PublicBelief:
        if not (0.0 < lam < 1.0):
            raise ContractViolation(f"public belief must lie in (0,1), got {lam}")
        return cls(float(_logit(lam)))

    @property
    def lam(self) -> float:
        return float(expit(self.logit))


@dataclass(frozen=True)
class MixSpec:
    """Low-type one-sided mixing at a given public belief.

    ``prob`` is alpha (probability of reporting 1 after s=1) on the
    ``MIX_AFTER_S1`` side and beta (probability of reporting 1 after s=0) on
    the ``MIX_AFTER_S0`` side.  It is ignored when truthful.
    """

    side: Side
    prob: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.prob <= 1.0):
            raise ContractViolation(f"mixing probability out of [0,1]: {self.prob}")
        if self.side is Side.MIX_AFTER_S1 and self.prob <= 0.0:
            raise ContractViolation("alpha must lie in (0,1]")
        if self.side is Side.MIX_AFTER_S0 and self.prob >= 1.0:
            raise ContractViolation("beta must lie in [0,1)")

    @property
    def alpha(self) -> float:
        return self.prob if self.side is Side.MIX_AFTER_S1 else 1.0

    @property
    def beta(self) -> float:
        return self.prob if self.side is Side.MIX_AFTER_S0 else 0.0


TRUTHFUL = MixSpec(Side.TRUTHFUL, 1.0)


def affine_diag(p, lam):
    """A(p; lambda) = (1 - lambda) + (2 lambda - 1) p.

    Written as ``lam*p + (1-lam)*(1-p)``, which is the same polynomial and
    keeps the value in [0, 1] under rounding.  Broadcasts over arrays.
    """
    return lam * p + (1.0 - lam) * (1.0 - p)


def alpha_beta(lam, p_L, p_H):
    """Closed-form (alpha, beta) for array ``lam``; off-side entries are nan."""
    lam = np.asarray(lam, dtype=float)
    a_h = affine_diag(p_H, lam)
    a_l = affine_diag(p_L, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(lam < 0.5, a_h / a_l, np.nan)
        beta = np.where(lam > 0.5, (a_h - a_l) / (1.0 - a_l), np.nan)
    return alpha, beta


def low_mixing(lam: float, p_L: float, p_H: float) -> MixSpec:
    """Equilibrium one-sided mix of the low type at public belief ``lam``."""
    side = side_for(lam)
    if side is Side.TRUTHFUL:
        return TRUTHFUL
    a_h = affine_diag(p_H, lam)
    a_l = affine_diag(p_L, lam)
    if side is Side.MIX_AFTER_S1:
        return MixSpec(side, a_h / a_l)
    return MixSpec(side, (a_h - a_l) / (1.0 - a_l))


def low_prob_y1(theta, side, prob, p_L):
    """Pr_L(y=1 | theta) under a one-sided mix.  All arguments broadcast.

    ``side`` holds integer ``Side`` codes.
    """
    acc = np.where(np.asarray(theta) == 1, p_L, 1.0 - p_L)  # Pr(s=1 | theta)
    side = np.asarray(side)
    return np.where(
        side < 0, prob * acc, np.where(side > 0, acc + prob * (1.0 - acc), acc)
    )


def high_prob_y1(theta, p_H):
    return np.where(np.asarray(theta) == 1, p_H, 1.0 - p_H)


def _check_mix(lam: float, mix: MixSpec):
    if mix.side is not side_for(lam):
        raise ContractViolation(
            f"mix side {mix.side.name} is inconsistent with lambda={lam}"
        )


def report_likelihoods(
    kind: ExpertType, lam: float, mix: MixSpec, p_L: float, p_H: float
) -> np.ndarray:
    """Table ``pr[y, theta] = Pr(y | theta)`` for one type."""
    _check_mix(lam, mix)
    # scalar path; low_prob_y1/high_prob_y1 are the broadcasting versions
    if kind is ExpertType.HIGH:
        y1 = (1.0 - p_H, p_H)
    else:
        y1 = tuple(_low_y1_scalar(acc, mix) for acc in (1.0 - p_L, p_L))
    return np.array([[1.0 - y1[0], 1.0 - y1[1]], [y1[0], y1[1]]])


def _low_y1_scalar(acc: float, mix: MixSpec) -> float:
    if mix.side is Side.MIX_AFTER_S1:
        return mix.prob * acc
    if mix.side is Side.MIX_AFTER_S0:
        return acc + mix.prob * (1.0 - acc)
    return acc


@dataclass(frozen=True)
class ReportLikelihoods:
    """Per-type report likelihood tables, indexed ``[y, theta]``."""

    high: np.ndarray
    low: np.ndarray

    @classmethod
    def at(cls, lam: float, mix: MixSpec, p_L: float, p_H: float) -> ReportLikelihoods:
        return cls(
            report_likelihoods(ExpertType.HIGH, lam, mix, p_L, p_H),
            report_likelihoods(ExpertType.LOW, lam, mix, p_L, p_H),
        )

    def marginal(self, y: int, lam: float) -> tuple[float, float]:
        """(l_H(y; lam), l_L(y; lam)) integrating the state out with ``lam``."""
        w = np.array([1.0 - lam, lam])
        return float(self.high[y] @ w), float(self.low[y] @ w)


def reputation_update(
    prior_rho: float, y: int, lam: float, likelihoods: ReportLikelihoods
) -> float:
    """Posterior probability of the high type after report ``y``."""
    if not (0.0 <= prior_rho <= 1.0):
        raise ContractViolation(f"reputation must lie in [0,1], got {prior_rho}")
    l_h, l_l = likelihoods.marginal(y, lam)
    num = prior_rho * l_h
    den = num + (1.0 - prior_rho) * l_l
    if den <= 0.0:
        raise OffPathReport(f"report y={y} has zero probability at lambda={lam}")
    return num / den


def expert_lr(
    y: int, lam: float, rho: float, p_L: float, p_H: float, mix: MixSpec
) -> float:
    """Reputation-weighted likelihood ratio Pr(y | theta=1) / Pr(y | theta=0)."""
    lik = ReportLikelihoods.at(lam, mix, p_L, p_H)
    num = rho * lik.high[y, 1] + (1.0 - rho) * lik.low[y, 1]
    den = rho * lik.high[y, 0] + (1.0 - rho) * lik.low[y, 0]
    if den <= 0.0:
        raise OffPathReport(f"report y={y} is off path under state 0")
    return num / den


def logit_update(
    belief: PublicBelief,
    reports: Sequence[int],
    reputations: Sequence[float],
    params: ModelParams,
    mix: MixSpec,
) -> PublicBelief:
    """Add each expert's log likelihood ratio to the public log-odds.

    Valid for reports that are conditionally independent given the state and
    the types.
    """
    if len(reports) != len(reputations):
        raise ContractViolation("reports and reputations differ in length")
    lam = belief.lam
    shift = 0.0
    for y, rho in zip(reports, reputations):
        r = expert_lr(int(y), lam, float(rho), params.p_L, params.p_H, mix)
        shift += math.log(max(r, LIKELIHOOD_FLOOR))
    return PublicBelief(belief.logit + shift)


def indifference_residual(x: float, lam: float, p_L: float, p_H: float) -> float:
    """Gap between the two reports' high/low likelihood ratios.

    For ``lam <= 1/2`` ``x`` is alpha and the residual
    ``A_H/(x A_L) - (1-A_H)/(1-x A_L)`` is strictly decreasing.  For
    ``lam > 1/2`` ``x`` is beta and the residual
    ``(1-A_H)/((1-x)(1-A_L)) - A_H/(A_L + x(1-A_L))`` is strictly increasing.
    Both vanish exactly at the equilibrium mix.
    """
    a_h = affine_diag(p_H, lam)
    a_l = affine_diag(p_L, lam)
    if lam <= 0.5 + HALF_TOL:
        if not (0.0 < x <= 1.0):
            raise ValueError(f"alpha must lie in (0,1]; residual diverges at {x}")
        return a_h / (x * a_l) - (1.0 - a_h) / (1.0 - x * a_l)
    if not (0.0 <= x < 1.0):
        raise ValueError(f"beta must lie in [0,1); residual diverges at {x}")
    return (1.0 - a_h) / ((1.0 - x) * (1.0 - a_l)) - a_h / (a_l + x * (1.0 - a_l))
