"""Separating spin from noise on scored rounds.

Binary forecasts are fitted by a two-parameter logistic calibration model
``logit Pr(theta=1 | pi) = intercept + slope * logit(pi)``; the intercept
reads bias, the slope indexes precision.  Gaussian reports get the closed-form
MLE ``b = mean(y - theta)``, ``p = (n-1)/SSR``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit, logit

from .core import (
    HALF_TOL,
    ContractViolation,
    OffPathReport,
    alpha_beta,
    high_prob_y1,
    low_prob_y1,
)

GRAD_TOL = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 30
#: returned as p_hat when the residual sum of squares is numerically zero.
P_HAT_CAP = 1e12


class InsufficientData(ValueError):
    pass


class SlopeUnidentified(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class ScoredObservation:
    """One scored round for one expert.  Binary rows carry ``forecast``,
    Gaussian rows carry ``report``."""

    expert_id: str
    topic_id: int
    t: int
    outcome: float
    forecast: float | None = None
    report: float | None = None
    prior: float | None = None

    def __post_init__(self):
        if (self.forecast is None) == (self.report is None):
            raise ContractViolation("exactly one of forecast and report must be set")
        if self.forecast is not None and not (0.0 < self.forecast < 1.0):
            raise ContractViolation(f"forecast must be strictly inside (0,1), got {self.forecast}")
        if self.prior is not None and self.forecast is not None and not (0.0 < self.prior < 1.0):
            raise ContractViolation("prior must be strictly inside (0,1)")


def smooth_report(y: int, eps: float = 0.05) -> float:
    if not (0.0 < eps < 0.5):
        raise ContractViolation("eps must lie in (0, 1/2)")
    return 1.0 - eps if y == 1 else eps


def group_by_expert(observations: Sequence[ScoredObservation]) -> dict[str, list[ScoredObservation]]:
    out: dict[str, list[ScoredObservation]] = {}
    for o in observations:
        out.setdefault(o.expert_id, []).append(o)
    return out


# ---------------------------------------------------------------------------
# binary calibration


@dataclass(frozen=True)
class CalibrationFit:
    intercept: float
    slope: float
    se_intercept: float
    se_slope: float
    converged: bool
    n: int
    n_iter: int
    grad_norm: float

    @property
    def implied_bias(self) -> float:
        """Prior shift ``b`` implied by the fit.

        A forecaster whose log-odds are shifted by ``b`` is corrected by an
        intercept of ``-slope * b``, so the intercept carries the opposite sign.
        A zero slope says nothing about the shift and gives nan.
        """
        if self.slope == 0.0:
            return math.nan
        return -self.intercept / self.slope


def _loglik(beta, X, y, off):
    eta = X @ beta + off
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _score_hessian(beta, X, y, off):
    mu = expit(X @ beta + off)
    g = X.T @ (y - mu)
    H = (X * (mu * (1.0 - mu))[:, None]).T @ X  # negative Hessian
    return g, H


def calibration_score(beta, pi, y, offset=None):
    """Gradient and negative Hessian of the calibration log-likelihood."""
    X = np.column_stack([np.ones(len(pi)), logit(np.asarray(pi, float))])
    off = np.zeros(len(pi)) if offset is None else np.asarray(offset, float)
    return _score_hessian(np.asarray(beta, float), X, np.asarray(y, float), off)


def fit_calibration_arrays(pi, y, offset=None) -> CalibrationFit:
    pi = np.asarray(pi, dtype=float)
    y = np.asarray(y, dtype=float)
    n = pi.size
    if n < 10:
        raise InsufficientData(f"need at least 10 scored observations, got {n}")
    if not np.all((y == 0) | (y == 1)):
        raise ContractViolation("binary outcomes must be 0 or 1")
    if y.min() == y.max():
        raise InsufficientData("both outcome values must be present")
    x = logit(pi)
    if np.ptp(x) <= 1e-12 * max(1.0, np.max(np.abs(x))):
        raise SlopeUnidentified("forecasts are constant; slope is not identified")
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    X = np.column_stack([np.ones(n), x])

    beta = np.zeros(2)
    ll = _loglik(beta, X, y, off)
    g, H = _score_hessian(beta, X, y, off)
    it = 0
    while np.linalg.norm(g) >= GRAD_TOL and it < MAX_ITER:
        it += 1
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(f"singular information matrix at iteration {it}") from exc
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + t * step
            ll_c = _loglik(cand, X, y, off)
            # near the optimum the change is below rounding; do not reject on noise
            if ll_c >= ll - 64 * np.finfo(float).eps * (1.0 + abs(ll)):
                break
            t *= 0.5
        else:
            break  # no ascent possible in floating point
        beta, ll = cand, ll_c
        g, H = _score_hessian(beta, X, y, off)

    gnorm = float(np.linalg.norm(g))
    if np.max(np.abs(beta)) > 30 or not np.all(np.isfinite(beta)):
        raise NonConvergence(
            f"coefficients diverging ({beta[0]:.3g}, {beta[1]:.3g}) after {it} "
            "iterations: outcomes look perfectly separated by the forecasts"
        )
    converged = gnorm < GRAD_TOL
    if not converged and gnorm > 1e-6:
        raise NonConvergence(f"gradient norm {gnorm:.3g} after {it} iterations")
    cov = np.linalg.inv(H)
    return CalibrationFit(
        float(beta[0]), float(beta[1]),
        float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1])),
        converged, n, it, gnorm,
    )


def fit_calibration(
    observations: Sequence[ScoredObservation], prior_offset: bool = False
) -> CalibrationFit:
    """ML calibration fit by damped Newton.

    ``prior_offset`` adds ``logit(prior)`` with its coefficient fixed at one.
    """
    if any(o.forecast is None for o in observations):
        raise ContractViolation("calibration needs binary forecasts")
    pi = [o.forecast for o in observations]
    y = [o.outcome for o in observations]
    offset = None
    if prior_offset:
        if any(o.prior is None for o in observations):
            raise ContractViolation("prior offset requested but some rows lack a prior")
        offset = logit(np.array([o.prior for o in observations]))
    return fit_calibration_arrays(pi, y, offset)


# ---------------------------------------------------------------------------
# Gaussian closed forms


@dataclass(frozen=True)
class GaussianFit:
    b_hat: float
    p_hat: float
    se_b: float
    se_p: float
    n: int
    ssr: float
    #: residuals vanish; p_hat holds P_HAT_CAP instead of infinity
    infinite_precision: bool = False

    def __iter__(self):
        return iter((self.b_hat, self.p_hat))


def estimate_gaussian_arrays(y, theta) -> GaussianFit:
    d = np.asarray(y, dtype=float) - np.asarray(theta, dtype=float)
    n = d.size
    if n < 2:
        raise InsufficientData("need at least two scored reports")
    b = float(np.mean(d))
    ssr = float(np.sum((d - b) ** 2))
    scale = max(1.0, float(np.max(np.abs(d))))
    if ssr <= n * (1e-12 * scale) ** 2:
        return GaussianFit(b, P_HAT_CAP, 0.0, 0.0, n, ssr, True)
    p = (n - 1) / ssr
    return GaussianFit(b, p, 1.0 / math.sqrt(p * n), p * math.sqrt(2.0 / (n - 1)), n, ssr)


def estimate_gaussian(observations: Sequence[ScoredObservation]) -> GaussianFit:
    if any(o.report is None for o in observations):
        raise ContractViolation("Gaussian estimation needs real-valued reports")
    return estimate_gaussian_arrays(
        [o.report for o in observations], [o.outcome for o in observations]
    )


# ---------------------------------------------------------------------------
# reliability


@dataclass(frozen=True)
class ReliabilityBin:
    mean_forecast: float
    mean_outcome: float
    count: int


def reliability_bins(pi, y, n_bins: int = 10) -> list[ReliabilityBin]:
    """Equal-width bins on [0,1]; a calibrated forecaster sits on the diagonal."""
    if n_bins < 1:
        raise ContractViolation("n_bins must be positive")
    pi = np.asarray(pi, dtype=float)
    y = np.asarray(y, dtype=float)
    if pi.size == 0:
        return []
    idx = np.minimum((pi * n_bins).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    s_pi = np.bincount(idx, weights=pi, minlength=n_bins)
    s_y = np.bincount(idx, weights=y, minlength=n_bins)
    return [
        ReliabilityBin(float(s_pi[k] / counts[k]), float(s_y[k] / counts[k]), int(counts[k]))
        for k in range(n_bins)
        if counts[k] > 0
    ]


def reliability_diagram(observations: Sequence[ScoredObservation], n_bins: int = 10):
    return reliability_bins(
        [o.forecast for o in observations], [o.outcome for o in observations], n_bins
    )


# ---------------------------------------------------------------------------
# joint belief over precision type and prior shift


def default_bias_grid() -> np.ndarray:
    return np.linspace(-2.0, 2.0, 21)


@dataclass
class BiasPrecisionBelief:
    """Posterior weights over (type, b).  Row 0 is the low type, row 1 high."""

    b_grid: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.b_grid = np.atleast_1d(np.asarray(self.b_grid, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (2, self.b_grid.size):
            raise ContractViolation("weights must have shape (2, len(b_grid))")
        if np.any(self.weights < 0) or not math.isclose(self.weights.sum(), 1.0, abs_tol=1e-12):
            raise ContractViolation("weights must be nonnegative and sum to one")

    @classmethod
    def uniform(cls, prior_high: float = 0.5, b_grid=None) -> BiasPrecisionBelief:
        b = default_bias_grid() if b_grid is None else np.asarray(b_grid, dtype=float)
        k = b.size
        return cls(b, np.vstack([np.full(k, (1 - prior_high) / k), np.full(k, prior_high / k)]))

    @classmethod
    def point(cls, high: bool, b: float) -> BiasPrecisionBelief:
        w = np.zeros((2, 1))
        w[int(high), 0] = 1.0
        return cls(np.array([b]), w)

    @property
    def rho(self) -> float:
        return float(self.weights[1].sum())

    def likelihoods(self, lam: float, p_L: float, p_H: float) -> np.ndarray:
        """``pr[p, b, theta] = Pr_{p,b}(y=1 | theta; lam)``."""
        lam_b = expit(logit(lam) + self.b_grid)
        side = np.where(np.abs(lam_b - 0.5) <= HALF_TOL, 0, np.where(lam_b < 0.5, -1, 1))
        alpha, beta = alpha_beta(lam_b, p_L, p_H)
        prob = np.where(side < 0, alpha, np.where(side > 0, beta, 1.0))
        out = np.empty((2, self.b_grid.size, 2))
        for th in (0, 1):
            out[0, :, th] = low_prob_y1(th, side, prob, p_L)
            out[1, :, th] = high_prob_y1(th, p_H)
        return out

    def update(self, y: int, lam: float, p_L: float, p_H: float) -> BiasPrecisionBelief:
        """Bayes update on an unscored report, integrating the state with ``lam``."""
        pr1 = self.likelihoods(lam, p_L, p_H)
        pr = pr1 if y == 1 else 1.0 - pr1
        w = self.weights * (lam * pr[..., 1] + (1 - lam) * pr[..., 0])
        total = w.sum()
        if total <= 0:
            raise OffPathReport(f"report y={y} has zero probability under every (type, b)")
        return BiasPrecisionBelief(self.b_grid.copy(), w / total)


def biased_expert_lr(
    y: int, lam: float, belief: BiasPrecisionBelief, p_L: float, p_H: float
) -> float:
    """Grid-mixture likelihood ratio Pr(y | theta=1) / Pr(y | theta=0)."""
    pr1 = belief.likelihoods(lam, p_L, p_H)
    pr = pr1 if y == 1 else 1.0 - pr1
    num = float(np.sum(belief.weights * pr[..., 1]))
    den = float(np.sum(belief.weights * pr[..., 0]))
    if den <= 0:
        raise OffPathReport(f"report y={y} is off path under state 0")
    return num / den
