"""Common shocks: intraclass covariance, GLS aggregation, correlated filter."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri, owens_t

from .core import ContractViolation, PublicBelief
from .gaussian import GaussianBelief

RHO_C_CAP = 0.95


class Weighting(enum.Enum):
    """How GLS weights are scaled.

    NORMALIZED: ``Sigma^-1 1 / (1' Sigma^-1 1)``, summing to one.
    INFORMATION: ``D Sigma^-1 1``; all ones without a common shock, so the
    update is the plain sum of log likelihood ratios, and shrinks uniformly
    as the common variance grows.
    """

    NORMALIZED = "normalized"
    INFORMATION = "information"


@dataclass(frozen=True)
class CovSpec:
    """``Sigma = diag(marginal_vars) + common_var * 1 1'``."""

    marginal_vars: np.ndarray
    common_var: float = 0.0

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.marginal_vars, dtype=float))
        object.__setattr__(self, "marginal_vars", v)
        if v.ndim != 1 or np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise ContractViolation("marginal variances must be positive and finite")
        if not (self.common_var >= 0 and np.isfinite(self.common_var)):
            raise ContractViolation("common variance must be nonnegative")

    @classmethod
    def exchangeable(cls, n: int, rho_c: float, total_var: float = 1.0) -> CovSpec:
        """Equal marginals with pairwise correlation ``rho_c``."""
        if not (0.0 <= rho_c < 1.0):
            raise ContractViolation("rho_c must lie in [0,1)")
        tau2 = rho_c * total_var
        return cls(np.full(n, total_var - tau2), tau2)

    @property
    def n(self) -> int:
        return self.marginal_vars.size

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.marginal_vars) + self.common_var * np.ones((self.n, self.n))

    @property
    def pairwise_correlation(self) -> float:
        v = self.marginal_vars
        if not np.allclose(v, v[0]):
            raise ValueError("pairwise correlation is defined for equal marginals")
        return self.common_var / (self.common_var + v[0])


def _rank_one_scale(d_inv, tau2):
    """(tau^-2 + 1'D^-1 1)^-1, written to stay finite at tau2 = 0."""
    return tau2 / (1.0 + tau2 * np.sum(d_inv, axis=-1))


def woodbury_inverse(cov: CovSpec) -> np.ndarray:
    d_inv = 1.0 / cov.marginal_vars
    if cov.common_var == 0:
        return np.diag(d_inv)
    k = _rank_one_scale(d_inv, cov.common_var)
    return np.diag(d_inv) - k * np.outer(d_inv, d_inv)


def woodbury_solve(d_inv, tau2, u):
    """``Sigma^-1 u`` for stacked diagonal-plus-rank-one matrices.

    ``d_inv`` and ``u`` run experts along the last axis; ``tau2`` broadcasts
    against the leading axes.
    """
    k = _rank_one_scale(d_inv, tau2)
    du = d_inv * u
    return du - np.expand_dims(k * np.sum(du, axis=-1), -1) * d_inv


def gls_weights(cov: CovSpec, mode: Weighting = Weighting.NORMALIZED) -> np.ndarray:
    v = cov.marginal_vars
    if mode is Weighting.NORMALIZED and np.all(v == v[0]):
        return np.full(cov.n, 1.0 / cov.n)  # exact by symmetry
    s1 = woodbury_inverse(cov) @ np.ones(cov.n)
    if mode is Weighting.NORMALIZED:
        return s1 / s1.sum()
    return cov.marginal_vars * s1


def gls_logit_update(
    belief: PublicBelief, z, cov: CovSpec, mode: Weighting = Weighting.NORMALIZED
) -> PublicBelief:
    """Shift the public log-odds by the GLS-weighted log likelihood increments."""
    z = np.asarray(z, dtype=float)
    if z.shape != (cov.n,):
        raise ContractViolation(f"expected {cov.n} increments, got shape {z.shape}")
    return PublicBelief(belief.logit + float(gls_weights(cov, mode) @ z))


def information_increment(cov: CovSpec, h) -> float:
    """``h' Sigma^-1 h``: precision added to the state by one panel round."""
    h = np.asarray(h, dtype=float)
    return float(h @ woodbury_inverse(cov) @ h)


def correlated_filter_update(
    belief: GaussianBelief, y, h, c, cov: CovSpec
) -> GaussianBelief:
    """Linear filter step with a common shock across the panel's reports."""
    y, h, c = (np.asarray(a, dtype=float) for a in (y, h, c))
    if not (y.shape == h.shape == c.shape == (cov.n,)):
        raise ContractViolation("y, loadings and intercepts must each have one entry per expert")
    s_inv = woodbury_inverse(cov)
    V = 1.0 / (1.0 / belief.var + h @ s_inv @ h)
    m = belief.mean + V * (h @ s_inv @ (y - c - h * belief.mean))
    return GaussianBelief(float(m), float(V))


def correlated_filter_step(m, V, y, h, s2, c, tau2):
    """Vectorised counterpart of ``correlated_filter_update``; experts last."""
    d_inv = 1.0 / s2
    V_new = 1.0 / (1.0 / V + np.sum(h * woodbury_solve(d_inv, tau2, h), axis=-1))
    resid = y - c - h * np.expand_dims(m, -1)
    return m + V_new * np.sum(h * woodbury_solve(d_inv, tau2, resid), axis=-1), V_new


def estimate_cov_spec(residuals, cap: float = RHO_C_CAP) -> CovSpec:
    """Method-of-moments intraclass fit to an (n_rounds, N) residual matrix.

    The correlation estimate is shrunk toward zero by ``n / (1 + n)`` and
    capped at ``cap``; marginal variances absorb whatever the common part
    does not explain.
    """
    r = np.asarray(residuals, dtype=float)
    n, N = r.shape
    if n < 2:
        raise ValueError("need at least two scored rounds")
    S = np.cov(r, rowvar=False, ddof=1).reshape(N, N)
    total = np.diag(S).copy()
    if N < 2:
        return CovSpec(np.maximum(total, 1e-12), 0.0)
    off = S[~np.eye(N, dtype=bool)]
    mean_total = total.mean()
    rho = max(off.mean(), 0.0) / mean_total if mean_total > 0 else 0.0
    rho = min(rho * n / (1.0 + n), cap)
    tau2 = rho * mean_total
    return CovSpec(np.maximum(total - tau2, 1e-12 * max(mean_total, 1.0)), tau2)


def indicator_correlation(r: float, p: float) -> float:
    """Correlation of ``1{Z_i < k}`` and ``1{Z_j < k}`` with ``k = Phi^-1(p)``
    for standard normals with correlation ``r``."""
    k = ndtri(p)
    p11 = ndtr(k) - 2.0 * owens_t(k, np.sqrt((1.0 - r) / (1.0 + r)))
    return float((p11 - p * p) / (p * (1.0 - p)))


def latent_correlation(rho_c: float, p: float, tol: float = 1e-12) -> float:
    """Latent Gaussian correlation giving signal-correctness correlation ``rho_c``."""
    if not (0.0 <= rho_c < 1.0):
        raise ContractViolation("rho_c must lie in [0,1)")
    if rho_c == 0:
        return 0.0
    lo, hi = 0.0, 1.0 - 1e-15
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if indicator_correlation(mid, p) < rho_c:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def correlated_uniforms(common, idio, r: float):
    """Uniform marginals from a one-factor Gaussian copula.

    ``common`` has shape (T,), ``idio`` (T, N).
    """
    z = np.sqrt(r) * np.asarray(common)[:, None] + np.sqrt(1.0 - r) * np.asarray(idio)
    return ndtr(z)
