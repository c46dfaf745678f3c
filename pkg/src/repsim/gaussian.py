"""Continuous state with Gaussian signals.

The high type reports its signal; the low type shrinks toward the public
mean, ``y = m + a (x - m)``.  Reports from an expert of uncertain type enter
one linear observation equation with a reputation-weighted loading and noise
variance, and the state posterior follows the scalar linear filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .core import ContractViolation

GOLDEN_TOL = 1e-10
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GaussianBelief:
    mean: float
    var: float

    def __post_init__(self):
        if not (self.var > 0 and math.isfinite(self.var)):
            raise ContractViolation(f"posterior variance must be positive, got {self.var}")


@dataclass(frozen=True)
class GaussianExpert:
    """One expert as seen by the observer.  ``sigma2_* = 1 / p_*``."""

    sigma2_H: float
    sigma2_L: float
    rho: float
    bias: float = 0.0
    tilt: float = 1.0

    def __post_init__(self):
        if not (0 < self.sigma2_H < self.sigma2_L):
            raise ContractViolation("need 0 < sigma2_H < sigma2_L")
        if not (0.0 < self.tilt <= 1.0):
            raise ContractViolation("tilt must lie in (0,1]")
        if not (0.0 <= self.rho <= 1.0):
            raise ContractViolation("rho must lie in [0,1]")


@dataclass(frozen=True)
class EffectiveObservation:
    """``y = loading * theta + intercept + noise``, noise ~ N(0, noise_var)."""

    loading: float
    noise_var: float
    intercept: float

    def __post_init__(self):
        if not (self.noise_var > 0 and math.isfinite(self.noise_var)):
            raise ContractViolation("noise variance must be positive and finite")


def mimicry_coefficient(V, sigma2_H, sigma2_L):
    """Tilt at which the low type's report distribution equals the high type's."""
    return np.sqrt((V + sigma2_H) / (V + sigma2_L))


def low_type_objective(a, V, sigma2_H, sigma2_L):
    """Expected log posterior odds gain for a low type using tilt ``a``.

    With ``x = a^2 (V + sigma2_L) / (V + sigma2_H)`` the value is
    ``(1 - x + log x) / 2``, maximal (zero) at ``x = 1``.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("tilt must be positive")
    x = a * a * (V + sigma2_L) / (V + sigma2_H)
    out = 0.5 * (1.0 - x + np.log(x))
    return float(out) if out.ndim == 0 else out


def quadratic_cost(d):
    return d * d


def optimal_tilt(
    epsilon: float,
    V,
    sigma2_H: float,
    sigma2_L: float,
    cost: Callable = quadratic_cost,
):
    """Tilt maximising ``objective(a) - epsilon * cost(1 - a)``.

    Golden-section search on ``[a_mim / 2, 1]``; ``V`` may be an array, in
    which case every entry is optimised independently.
    """
    if epsilon < 0:
        raise ContractViolation("epsilon must be nonnegative")
    a_mim = mimicry_coefficient(np.asarray(V, dtype=float), sigma2_H, sigma2_L)
    if epsilon == 0:
        return float(a_mim) if np.ndim(a_mim) == 0 else a_mim

    def f(a):
        return low_type_objective(a, V, sigma2_H, sigma2_L) - epsilon * cost(1.0 - a)

    lo = 0.5 * a_mim
    hi = np.ones_like(a_mim)
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while np.max(hi - lo) > GOLDEN_TOL:
        left = f1 >= f2  # maximum lies in [lo, x2]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        new_x1 = np.where(left, hi - _INV_PHI * (hi - lo), x2)
        new_x2 = np.where(left, x1, lo + _INV_PHI * (hi - lo))
        new_f1 = np.where(left, f(new_x1), f2)
        new_f2 = np.where(left, f1, f(new_x2))
        x1, x2, f1, f2 = new_x1, new_x2, new_f1, new_f2
    out = 0.5 * (lo + hi)
    return float(out) if np.ndim(out) == 0 else out


def effective_observation(expert: GaussianExpert, m_prev: float) -> EffectiveObservation:
    rho, a = expert.rho, expert.tilt
    h = rho + (1.0 - rho) * a
    s2 = rho * expert.sigma2_H + (1.0 - rho) * a * a * expert.sigma2_L
    c = (1.0 - rho) * (1.0 - a) * m_prev + h * expert.bias
    return EffectiveObservation(h, s2, c)


def filter_step(m, V, y, h, s2, c):
    """Vectorised update; expert arrays run along the last axis."""
    info = np.sum(h * h / s2, axis=-1)
    V_new = 1.0 / (1.0 / V + info)
    innov = np.sum(h / s2 * (y - c - h * np.expand_dims(m, -1)), axis=-1)
    return m + V_new * innov, V_new


def filter_update(
    belief: GaussianBelief, observations: Iterable[tuple[float, EffectiveObservation]]
) -> GaussianBelief:
    obs = list(observations)
    if not obs:
        return belief
    y = np.array([o[0] for o in obs], dtype=float)
    h = np.array([o[1].loading for o in obs])
    s2 = np.array([o[1].noise_var for o in obs])
    c = np.array([o[1].intercept for o in obs])
    m, V = filter_step(belief.mean, belief.var, y, h, s2, c)
    return GaussianBelief(float(m), float(V))


def type_log_lr(y, m, V, a, sigma2_H, sigma2_L):
    """log N(y; m, V + sigma2_H) - log N(y; m, a^2 (V + sigma2_L))."""
    s_h = V + sigma2_H
    s_l = a * a * (V + sigma2_L)
    d2 = (np.asarray(y) - m) ** 2
    return 0.5 * (np.log(s_l / s_h) - d2 / s_h + d2 / s_l)
