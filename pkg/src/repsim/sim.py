"""Seeded Monte Carlo of the repeated reporting game.

Replications run side by side as the leading array axis, but every
replication draws from its own Philox stream keyed by ``(seed, replication,
stream)``, so its trajectory does not depend on how many others run with it.
All randomness is taken as uniforms; normals come from the inverse CDF.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit, ndtri

from .core import (
    LIKELIHOOD_FLOOR,
    ContractViolation,
    MixSpec,
    ModelParams,
    alpha_beta,
    high_prob_y1,
    low_prob_y1,
)
from .correlated import (
    CovSpec,
    Weighting,
    correlated_filter_step,
    correlated_uniforms,
    gls_weights,
    latent_correlation,
)
from .design import (
    DesignConfig,
    Schedule,
    ScoreKind,
    bernoulli_kl,
    penalty_mix_arrays,
    scored_reputation_update,
)
from .estimation import ScoredObservation, smooth_report
from .gaussian import filter_step, optimal_tilt

RNG_ID = "philox4x64-seedseq-v1"


class Mode(enum.Enum):
    BINARY = "binary"
    GAUSSIAN = "gaussian"


class ScoredRule(enum.Enum):
    """Low-type tilt on scored rounds in Gaussian mode."""

    TRUTHFUL = "truthful"
    TILT = "tilt"


class NonIdentificationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams = field(default_factory=ModelParams)
    design: DesignConfig = field(default_factory=DesignConfig)
    cov: CovSpec | None = None
    horizon: int = 100
    n_replications: int = 1
    seed: int = 0
    mode: Mode = Mode.BINARY
    bias_vector: tuple[float, ...] | None = None
    topics: int = 1
    # fixed types (1 = high) instead of draws from prior_high
    types: tuple[int, ...] | None = None
    gauss_prior_mean: float = 0.0
    gauss_prior_var: float = 1.0
    # None draws the state from the Gaussian prior
    gauss_theta: float | None = None
    gauss_scored_rule: ScoredRule = ScoredRule.TRUTHFUL
    weighting: Weighting = Weighting.INFORMATION
    forecast_eps: float = 0.05

    def __post_init__(self):
        n = self.params.n_experts
        if self.horizon < 1 or self.n_replications < 1:
            raise ContractViolation("horizon and n_replications must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ContractViolation("seed must be a 64-bit unsigned integer")
        if self.topics not in (1, 2):
            raise ContractViolation("topics must be 1 or 2")
        if self.cov is not None and self.cov.n != n:
            raise ContractViolation(f"CovSpec has {self.cov.n} experts, panel has {n}")
        if self.bias_vector is not None and len(self.bias_vector) != n:
            raise ContractViolation("bias_vector length differs from n_experts")
        if self.types is not None and len(self.types) != n:
            raise ContractViolation("types length differs from n_experts")
        if self.gauss_prior_var <= 0:
            raise ContractViolation("Gaussian prior variance must be positive")
        if self.mode is Mode.GAUSSIAN and self.design.score is ScoreKind.BRIER:
            raise ContractViolation("Gaussian mode scores reports with the log density")
        if not (0.0 < self.forecast_eps < 0.5):
            raise ContractViolation("forecast_eps must lie in (0, 1/2)")

    @property
    def bias(self) -> np.ndarray:
        if self.bias_vector is None:
            return np.zeros(self.params.n_experts)
        return np.asarray(self.bias_vector, dtype=float)


@dataclass
class Trajectory:
    """One replication of one topic.  Paths include the initial value."""

    replication: int
    topic: int
    theta: float
    types: np.ndarray  # (N,) True for the high type
    bias: np.ndarray  # (N,)
    scored: np.ndarray  # (T,) bool
    reports: np.ndarray  # (N, T)
    rho: np.ndarray  # (N, T+1)
    lam: np.ndarray | None = None  # (T+1,) binary mode
    mean: np.ndarray | None = None  # (T+1,) Gaussian mode
    var: np.ndarray | None = None
    n_offpath: int = 0


def _stream(seed: int, rep: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(rep, stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class _Draws:
    types: np.ndarray  # (R, N) bool
    theta: np.ndarray  # (R,)
    sched: np.ndarray  # (R, T)
    common: np.ndarray  # (R, T)
    sig: np.ndarray  # (R, T, N)
    mix: np.ndarray  # (R, T, N)


def _draws(cfg: SimConfig, topic: int) -> _Draws:
    R, T, N = cfg.n_replications, cfg.horizon, cfg.params.n_experts
    out = _Draws(
        np.empty((R, N), bool), np.empty(R), np.empty((R, T)), np.empty((R, T)),
        np.empty((R, T, N)), np.empty((R, T, N)),
    )
    for r in range(R):
        g0 = _stream(cfg.seed, r, 0)
        u_types = g0.random(N)
        u_theta0 = g0.random()
        g = _stream(cfg.seed, r, 1 + topic)
        u_theta = g.random()
        out.sched[r] = g.random(T)
        out.common[r] = g.random(T)
        out.sig[r] = g.random((T, N))
        out.mix[r] = g.random((T, N))
        if cfg.types is not None:
            out.types[r] = np.asarray(cfg.types, dtype=bool)
        else:
            out.types[r] = u_types < cfg.params.prior_high
        if cfg.mode is Mode.BINARY:
            ts = cfg.params.true_state
            theta0 = ts if ts is not None else int(u_theta0 < cfg.params.prior)
            out.theta[r] = theta0 if topic == 0 else 1 - theta0
        else:
            if cfg.gauss_theta is not None and topic == 0:
                out.theta[r] = cfg.gauss_theta
            else:
                out.theta[r] = cfg.gauss_prior_mean + math.sqrt(cfg.gauss_prior_var) * float(
                    ndtri(u_theta)
                )
    return out


def _schedule(cfg: SimConfig, d: _Draws) -> np.ndarray:
    q = cfg.design.eval_density
    R, T = d.sched.shape
    if q == 0:
        return np.zeros((R, T), bool)
    if cfg.design.schedule is Schedule.BERNOULLI:
        return d.sched < q
    k = math.ceil(1.0 / q - 1e-12)
    t = np.arange(1, T + 1)
    return np.broadcast_to(t % k == 0, (R, T)).copy()


def _low_strategy(lam, rho, p_L, p_H, kappa):
    """Side codes and mixing probabilities, arrays shaped like ``rho``."""
    lam = np.broadcast_to(lam, np.shape(rho))
    if kappa > 0:
        return penalty_mix_arrays(lam, rho, p_L, p_H, kappa)
    side = np.where(np.abs(lam - 0.5) <= 1e-12, 0, np.where(lam < 0.5, -1, 1))
    alpha, beta = alpha_beta(lam, p_L, p_H)
    return side, np.where(side < 0, alpha, np.where(side > 0, beta, 1.0))


def _run_binary(cfg: SimConfig, topic: int) -> list[Trajectory]:
    P, D = cfg.params, cfg.design
    R, T, N = cfg.n_replications, cfg.horizon, P.n_experts
    d = _draws(cfg, topic)
    scored = _schedule(cfg, d)
    bias = cfg.bias
    acc = np.where(d.types, P.p_H, P.p_L)  # (R, N)
    theta = d.theta.astype(int)

    if cfg.cov is not None and N > 0:
        v = cfg.cov.marginal_vars
        rho_c = cfg.cov.common_var / (cfg.cov.common_var + v.mean())
        p_bar = P.prior_high * P.p_H + (1 - P.prior_high) * P.p_L
        r_lat = latent_correlation(rho_c, p_bar)
        u_sig = np.stack([correlated_uniforms(
            ndtri(d.common[r]), ndtri(d.sig[r]), r_lat) for r in range(R)])
        weights = gls_weights(cfg.cov, cfg.weighting)
    else:
        u_sig = d.sig
        weights = np.ones(N)

    x = np.full(R, float(logit(P.prior)))
    rho = np.full((R, N), P.prior_high)
    lam_path = np.empty((R, T + 1))
    rho_path = np.empty((R, N, T + 1))
    reports = np.empty((R, N, T), np.int8)
    lam_path[:, 0] = P.prior
    rho_path[:, :, 0] = rho
    n_off = np.zeros(R, int)
    th = theta[:, None]

    for i in range(T):
        lam = expit(x)[:, None]
        sc = scored[:, i][:, None]
        side_pub, prob_pub = _low_strategy(lam, rho, P.p_L, P.p_H, D.penalty)
        side_pub = np.where(sc, 0, side_pub)
        if np.any(bias != 0):
            lam_own = expit(x[:, None] + bias[None, :])
            side_act, prob_act = _low_strategy(lam_own, rho, P.p_L, P.p_H, D.penalty)
            side_act = np.where(sc, 0, side_act)
        else:
            side_act, prob_act = side_pub, prob_pub

        s = np.where(u_sig[:, i, :] < acc, th, 1 - th)
        u = d.mix[:, i, :] < prob_act
        y_low = np.where(side_act < 0, s * u, np.where(side_act > 0, np.maximum(s, u), s))
        y = np.where(d.types, s, y_low).astype(np.int8)
        reports[:, :, i] = y

        h1 = high_prob_y1(1, P.p_H)
        h0 = high_prob_y1(0, P.p_H)
        l1 = low_prob_y1(1, side_pub, prob_pub, P.p_L)
        l0 = low_prob_y1(0, side_pub, prob_pub, P.p_L)
        ph1 = np.where(y == 1, h1, 1 - h1)
        ph0 = np.where(y == 1, h0, 1 - h0)
        pl1 = np.where(y == 1, l1, 1 - l1)
        pl0 = np.where(y == 1, l0, 1 - l0)
        num = rho * ph1 + (1 - rho) * pl1
        den = rho * ph0 + (1 - rho) * pl0
        off = (num <= 0) & (den <= 0)
        z = np.log(np.maximum(num, LIKELIHOOD_FLOOR)) - np.log(np.maximum(den, LIKELIHOOD_FLOOR))
        z = np.where(off, 0.0, z)

        l_h = lam * ph1 + (1 - lam) * ph0
        l_l = lam * pl1 + (1 - lam) * pl0
        mix_den = rho * l_h + (1 - rho) * l_l
        with np.errstate(divide="ignore", invalid="ignore"):
            rho_report = np.where(mix_den > 0, rho * l_h / mix_den, 0.0)
        n_off += np.sum(mix_den <= 0, axis=1)
        if np.any(sc):
            rho_score = scored_reputation_update(
                rho, y, th, P.p_L, P.p_H, D.score, D.eval_weight
            ) if D.score is not ScoreKind.NONE else rho
            rho = np.where(sc, rho_score, rho_report)
        else:
            rho = rho_report

        x = x + z @ weights
        lam_path[:, i + 1] = expit(x)
        rho_path[:, :, i + 1] = rho

    return [
        Trajectory(
            replication=r, topic=topic, theta=float(theta[r]), types=d.types[r].copy(),
            bias=bias.copy(), scored=scored[r].copy(), reports=reports[r],
            rho=rho_path[r], lam=lam_path[r], n_offpath=int(n_off[r]),
        )
        for r in range(R)
    ]


def _log_normal_pdf(y, mean, var):
    return -0.5 * (np.log(2 * np.pi * var) + (y - mean) ** 2 / var)


def _run_gaussian(cfg: SimConfig, topic: int) -> list[Trajectory]:
    P, D = cfg.params, cfg.design
    R, T, N = cfg.n_replications, cfg.horizon, P.n_experts
    s2H, s2L = 1.0 / P.p_H, 1.0 / P.p_L
    d = _draws(cfg, topic)
    scored = _schedule(cfg, d)
    bias = cfg.bias
    tau2 = cfg.cov.common_var if cfg.cov is not None else 0.0
    s2_true = np.where(d.types, s2H, s2L)
    theta = d.theta

    m = np.full(R, cfg.gauss_prior_mean)
    V = np.full(R, cfg.gauss_prior_var)
    rho = np.full((R, N), P.prior_high)
    m_path = np.empty((R, T + 1))
    V_path = np.empty((R, T + 1))
    rho_path = np.empty((R, N, T + 1))
    reports = np.empty((R, N, T))
    m_path[:, 0], V_path[:, 0], rho_path[:, :, 0] = m, V, rho
    th = theta[:, None]

    for i in range(T):
        sc = scored[:, i]
        a_off = np.broadcast_to(optimal_tilt(D.tilt_cost, V, s2H, s2L), (R,))
        if cfg.gauss_scored_rule is ScoredRule.TRUTHFUL:
            a = np.where(sc, 1.0, a_off)
        else:
            a = a_off
        a_col, m_col, V_col = a[:, None], m[:, None], V[:, None]

        sig = th + bias[None, :] + np.sqrt(s2_true) * ndtri(d.sig[:, i, :])
        shock = math.sqrt(tau2) * ndtri(d.common[:, i])[:, None]
        y = np.where(d.types, sig, m_col + a_col * (sig - m_col)) + shock
        reports[:, :, i] = y

        h = rho + (1 - rho) * a_col
        s2 = rho * s2H + (1 - rho) * a_col**2 * s2L
        c = (1 - rho) * (1 - a_col) * m_col

        # reputation: predictive densities, or densities given the revealed state
        ll_h = np.where(
            sc[:, None],
            _log_normal_pdf(y, th, s2H),
            _log_normal_pdf(y, m_col, V_col + s2H),
        )
        ll_l = np.where(
            sc[:, None],
            _log_normal_pdf(y, a_col * th + (1 - a_col) * m_col, a_col**2 * s2L),
            _log_normal_pdf(y, m_col, a_col**2 * (V_col + s2L)),
        )
        weight = np.where(sc[:, None], D.eval_weight, 1.0)
        with np.errstate(divide="ignore"):
            rho = expit(np.log(rho) - np.log1p(-rho) + weight * (ll_h - ll_l))

        if tau2 > 0:
            m, V = correlated_filter_step(m, V, y, h, s2, c, tau2)
        else:
            m, V = filter_step(m, V, y, h, s2, c)
        m_path[:, i + 1], V_path[:, i + 1] = m, V
        rho_path[:, :, i + 1] = rho

    return [
        Trajectory(
            replication=r, topic=topic, theta=float(theta[r]), types=d.types[r].copy(),
            bias=bias.copy(), scored=scored[r].copy(), reports=reports[r],
            rho=rho_path[r], mean=m_path[r], var=V_path[r],
        )
        for r in range(R)
    ]


def simulate(config: SimConfig) -> list[Trajectory]:
    """Run every replication and topic; sorted by (replication, topic)."""
    run = _run_binary if config.mode is Mode.BINARY else _run_gaussian
    out = []
    for topic in range(config.topics):
        out.extend(run(config, topic))
    out.sort(key=lambda tr: (tr.replication, tr.topic))
    return out


# ---------------------------------------------------------------------------
# closed-form learning speed


def panel_kl(lam: float, rho: float, p_L: float, p_H: float, mix: MixSpec) -> float:
    """KL divergence between one expert's report laws under theta=1 and theta=0."""
    p1 = rho * p_H + (1 - rho) * float(low_prob_y1(1, int(mix.side), mix.prob, p_L))
    p0 = rho * (1 - p_H) + (1 - rho) * float(low_prob_y1(0, int(mix.side), mix.prob, p_L))
    return bernoulli_kl(p1, p0)


def hitting_time_approx(lambda0, lambda_hit, n_experts, q, d_mix, d_truth) -> float:
    """Periods for the log-odds to climb from ``lambda0`` to ``lambda_hit`` at
    constant drift ``N [(1-q) D_mix + q D_truth]``."""
    if lambda_hit < lambda0:
        raise ContractViolation("lambda_hit must be >= lambda0")
    gap = float(logit(lambda_hit) - logit(lambda0))
    if gap == 0:
        return 0.0
    drift = n_experts * ((1 - q) * d_mix + q * d_truth)
    if drift <= 0:
        raise ZeroDivisionError("drift is zero; the boundary is never reached")
    return gap / drift


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class MartingaleReport:
    per_expert_mean: np.ndarray
    per_expert_se: np.ndarray
    pooled_mean: float
    pooled_se: float
    n_steps: int

    @property
    def pooled_z(self) -> float:
        if self.pooled_se == 0:
            return 0.0 if self.pooled_mean == 0 else math.inf
        return self.pooled_mean / self.pooled_se


def _mean_se(a: np.ndarray) -> tuple[float, float]:
    n = a.size
    if n == 0:
        return 0.0, 0.0
    se = float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(a.mean()), se


def martingale_diagnostic(trajectories: list[Trajectory]) -> MartingaleReport:
    """Mean one-step reputation change, per expert and pooled, with MC errors."""
    steps = np.stack([np.diff(tr.rho, axis=1) for tr in trajectories])  # (K, N, T)
    N = steps.shape[1]
    per = [_mean_se(steps[:, j, :].ravel()) for j in range(N)]
    pooled = _mean_se(steps.ravel())
    return MartingaleReport(
        np.array([p[0] for p in per]), np.array([p[1] for p in per]),
        pooled[0], pooled[1], int(steps.size),
    )


def polarization(trajectories: list[Trajectory], t: int | None = None) -> float:
    """Cross-sectional mean of min(rho, 1 - rho) at round ``t`` (default: last)."""
    vals = [tr.rho[:, -1 if t is None else t] for tr in trajectories]
    r = np.concatenate(vals) if vals else np.array([])
    return float(np.mean(np.minimum(r, 1 - r))) if r.size else 0.0


def convergence_fraction(trajectories: list[Trajectory], threshold: float = 0.95) -> float:
    """Share of binary runs whose final belief in the true state exceeds ``threshold``."""
    hits = [
        (tr.lam[-1] if tr.theta == 1 else 1 - tr.lam[-1]) > threshold for tr in trajectories
    ]
    return float(np.mean(hits))


@dataclass
class IdentificationResult:
    observations: list[ScoredObservation]
    trajectories: list[Trajectory]
    warning: str | None = None
    terminal_reveal: bool = False


#: public beliefs saturate in floating point; observation priors are kept interior
PRIOR_CLIP = 1e-12

NONID_MESSAGE = (
    "single topic without evaluation windows: bias and precision are not "
    "separately identified from reports; no estimate attempted"
)


def scored_observations(
    trajectories: list[Trajectory], mode: Mode, eps: float = 0.05, all_rounds: bool = False
) -> list[ScoredObservation]:
    """Scored rounds as estimation inputs.

    Binary forecasts carry the expert's prior shift on the log-odds scale:
    ``logit(pi) = b + logit(smooth_report(y, eps))``.
    """
    obs = []
    for tr in trajectories:
        rounds = np.arange(tr.scored.size) if all_rounds else np.flatnonzero(tr.scored)
        t_list = (rounds + 1).tolist()
        if mode is Mode.BINARY:
            prior = np.clip(tr.lam[rounds], PRIOR_CLIP, 1 - PRIOR_CLIP).tolist()
            base = logit(np.array([smooth_report(0, eps), smooth_report(1, eps)]))
            values = expit(tr.bias[:, None] + base[tr.reports[:, rounds].astype(int)])
        else:
            prior = tr.mean[rounds].tolist()
            values = tr.reports[:, rounds]
        key = "forecast" if mode is Mode.BINARY else "report"
        for j, row in enumerate(values.tolist()):
            eid = f"r{tr.replication}-e{j}"
            obs.extend(
                ScoredObservation(eid, tr.topic, t, outcome=tr.theta, prior=pr, **{key: v})
                for t, v, pr in zip(t_list, row, prior)
            )
    return obs


def identification_scenario(config: SimConfig) -> IdentificationResult:
    """Scored data for separating bias from precision.

    With two topics the truths differ and the bias is shared.  Without
    evaluation windows a second topic's terminal revelation scores every
    round; a single topic without windows yields only a warning.
    """
    q = config.design.eval_density
    if q == 0 and config.topics == 1:
        warnings.warn(NONID_MESSAGE, NonIdentificationWarning, stacklevel=2)
        return IdentificationResult([], [], warning=NONID_MESSAGE)
    trajs = simulate(config)
    terminal = q == 0
    obs = scored_observations(trajs, config.mode, config.forecast_eps, all_rounds=terminal)
    return IdentificationResult(obs, trajs, terminal_reveal=terminal)
