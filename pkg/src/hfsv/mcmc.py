"""Gibbs sampler for the noisy high-frequency stochastic volatility model.

One scan alternates: latent log prices (forward filter / backward sampler on
the price block), mixture indicators, latent log volatilities (second
filter/sampler pass on the transformed-return block), then the parameters
(innovation variance, autocorrelation, level, noise variance, drift,
innovation correlation).  The transformed observations are refreshed after
every update of the prices or the drift, since both enter their definition.

Three variants are supported: noise variance fixed to zero (prices observed
exactly), fixed to a constant, or estimated with its conjugate update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels
from .errors import DomainError, FilterError
from .model import ContinuousParams, DiscreteParams, InitialConditions, continuize
from .priors import DiscretePriorSpec, truncnorm_moments
from .simulate import ObservedSeries
from .ssm import (
    LOG_CHI2_MIXTURE,
    LinearGaussianSSM,
    MixtureTable,
    backward_sample,
    build_volatility_ssm,
    forward_filter,
    transform_returns,
    volatility_transition,
)

__all__ = [
    "McmcConfig",
    "GibbsState",
    "ChainOutput",
    "run_chain",
    "gibbs_scan",
    "init_state",
    "draw_from_prior",
    "prior_mean_params",
    "simulate_from_params",
    "step_tau_sq",
    "step_theta",
    "step_alpha",
    "step_xi_sq",
    "step_mu",
    "step_rho",
    "step_indicators",
    "step_volatilities",
    "step_log_prices",
    "effective_sample_size",
]

_XI_MODES = ("fixed_zero", "fixed", "estimated")
_RHO_MODES = ("fixed", "estimated")


@dataclass(frozen=True)
class McmcConfig:
    """Run-length, variant and tuning knobs for one chain.

    ``xi_mode`` selects the model variant; fixed modes use
    ``xi_fixed_value`` (zero for ``fixed_zero``).  The proposal scales for
    the autocorrelation/level steps inflate their near-exact conditional
    kernels (1.0 keeps them exact); the correlation step is a random walk on
    the Fisher transform whose scale adapts toward 0.3 acceptance during
    burn-in only.  ``path_thin`` > 0 stores every so-many-th retained
    volatility path.  ``eta``/``kappa_sq`` give the log price at the session
    open its prior; ``eta=None`` centres it on the first observation.
    """

    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int | None = None
    xi_mode: str = "estimated"
    xi_fixed_value: float = 0.0
    rho_mode: str = "estimated"
    rho_fixed_value: float = 0.0
    theta_prop_scale: float = 1.0
    alpha_prop_scale: float = 1.0
    rho_walk_scale: float = 0.5
    adapt_rho: bool = True
    path_thin: int = 0
    eta: float | None = None
    kappa_sq: float = 1.0

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise DomainError(f"iterations must be >= 0, got {self.iterations}")
        if self.burn_in < 0:
            raise DomainError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.iterations > 0 and self.iterations <= self.burn_in:
            raise DomainError(
                f"iterations ({self.iterations}) must exceed burn_in ({self.burn_in})"
            )
        if self.thin < 1:
            raise DomainError(f"thin must be >= 1, got {self.thin}")
        if self.xi_mode not in _XI_MODES:
            raise DomainError(f"xi_mode must be one of {_XI_MODES}, got {self.xi_mode!r}")
        if self.rho_mode not in _RHO_MODES:
            raise DomainError(f"rho_mode must be one of {_RHO_MODES}, got {self.rho_mode!r}")
        if self.xi_mode == "fixed" and self.xi_fixed_value < 0.0:
            raise DomainError("xi_fixed_value must be >= 0")
        if self.rho_mode == "fixed" and not -1.0 <= self.rho_fixed_value <= 1.0:
            raise DomainError("rho_fixed_value must lie in [-1, 1]")
        if self.kappa_sq <= 0.0:
            raise DomainError("kappa_sq must be > 0")

    def xi_value(self) -> float:
        return 0.0 if self.xi_mode == "fixed_zero" else self.xi_fixed_value


@dataclass
class GibbsState:
    """Mutable sampler state.

    ``h[i]`` is the discrete-scale log volatility driving return ``i+1``
    (the step from grid point i to i+1); the final entry extends one step
    past the last return.  ``log_s`` holds the latent log prices at all
    ``n_obs + 1`` grid points.  ``y_star``/``d_sign`` cache the transformed
    returns of the current ``log_s`` under the current drift.
    """

    y_obs: np.ndarray
    h: np.ndarray
    log_s: np.ndarray
    gamma: np.ndarray
    params: DiscreteParams
    y_star: np.ndarray = field(default_factory=lambda: np.empty(0))
    d_sign: np.ndarray = field(default_factory=lambda: np.empty(0))
    degenerate: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    iteration: int = 0

    def __post_init__(self) -> None:
        n = len(self.y_obs) - 1
        if n < 0:
            raise DomainError("y_obs must not be empty")
        if len(self.h) != n + 1 or len(self.log_s) != n + 1 or len(self.gamma) != n:
            raise DomainError(
                f"state arrays inconsistent with n_obs={n}: "
                f"h={len(self.h)}, log_s={len(self.log_s)}, gamma={len(self.gamma)}"
            )
        if len(self.y_star) != n:
            self.refresh_transform()

    @property
    def n_obs(self) -> int:
        return len(self.y_obs) - 1

    def refresh_transform(self) -> None:
        """Recompute the transformed returns after a price or drift update."""
        if self.n_obs >= 1:
            tobs = transform_returns(self.log_s, self.params.mu_d)
            self.y_star = tobs.y_star
            self.d_sign = tobs.d
            self.degenerate = tobs.degenerate
        else:
            self.y_star = np.empty(0)
            self.d_sign = np.empty(0)
            self.degenerate = np.empty(0, dtype=bool)

    def tobs(self):
        from .ssm import TransformedObs

        return TransformedObs(y_star=self.y_star, d=self.d_sign, degenerate=self.degenerate)


# ---------------------------------------------------------------------------
# prior draws and prior-predictive simulation
# ---------------------------------------------------------------------------


def _truncnorm_draw(
    rng: np.random.Generator, mean: float, sd: float, lo: float = 0.0, hi: float = 1.0
) -> float:
    """Inverse-CDF draw from Normal(mean, sd^2) truncated to [lo, hi].

    Reflects into the lower tail when the mean sits above the interval
    midpoint so the CDF arguments stay well conditioned.  Raises when the
    interval mass underflows; callers fall back to a prior draw.
    """
    if sd <= 0.0:
        raise DomainError(f"truncated-normal draw needs sd > 0, got {sd}")
    flip = mean > 0.5 * (lo + hi)
    if flip:
        mean, lo, hi = -mean, -hi, -lo
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    pa, pb = ndtr(a), ndtr(b)
    mass = pb - pa
    if not mass > 1e-300:
        raise DomainError(f"truncated-normal interval mass underflow ({mass})")
    x = mean + sd * float(ndtri(pa + rng.random() * mass))
    x = min(max(x, lo), hi)
    if flip:
        x, lo, hi = -x, -hi, -lo
    # keep draws strictly inside the interval
    eps = 1e-12 * max(1.0, abs(hi - lo))
    return min(max(x, lo + eps), hi - eps)


def _invgamma_draw(rng: np.random.Generator, shape: float, rate: float) -> float:
    if rate <= 0.0:
        raise DomainError(f"inverse-gamma rate must be > 0, got {rate}")
    g = rng.standard_gamma(shape)
    while g == 0.0:
        g = rng.standard_gamma(shape)
    return rate / g


def draw_from_prior(
    prior: DiscretePriorSpec, cfg: McmcConfig, rng: np.random.Generator
) -> DiscreteParams:
    """One joint draw of the parameters from their priors (variant aware)."""
    mu = prior.mu_mean + math.sqrt(prior.mu_var) * rng.standard_normal()
    theta = _truncnorm_draw(rng, prior.theta_a, prior.theta_b)
    alpha = prior.alpha_mean + math.sqrt(prior.alpha_var) * rng.standard_normal()
    tau_sq = _invgamma_draw(rng, prior.tau_sq_shape, prior.tau_sq_rate)
    if cfg.xi_mode == "estimated":
        xi_sq = _invgamma_draw(rng, prior.xi_sq_shape, prior.xi_sq_rate)
    else:
        xi_sq = cfg.xi_value()
    if cfg.rho_mode == "estimated":
        c = prior.rho_precision
        rho = 2.0 * rng.beta(c / 2.0, c / 2.0) - 1.0
        rho = min(max(rho, -1.0 + 1e-12), 1.0 - 1e-12)
    else:
        rho = cfg.rho_fixed_value
    return DiscreteParams(
        delta_ms=prior.delta_ms,
        mu_d=mu,
        theta_d=theta,
        alpha_d=alpha,
        tau_d=math.sqrt(tau_sq),
        rho=rho,
        xi_sq=xi_sq,
    )


def prior_mean_params(prior: DiscretePriorSpec, cfg: McmcConfig) -> DiscreteParams:
    """Parameters at their prior means (the chain's reproducible start)."""
    theta_mean, _ = truncnorm_moments(prior.theta_a, prior.theta_b)
    theta_mean = min(max(theta_mean, 1e-12), 1.0 - 1e-12)
    xi_sq = prior.xi_sq_mean if cfg.xi_mode == "estimated" else cfg.xi_value()
    rho = 0.0 if cfg.rho_mode == "estimated" else cfg.rho_fixed_value
    return DiscreteParams(
        delta_ms=prior.delta_ms,
        mu_d=prior.mu_mean,
        theta_d=theta_mean,
        alpha_d=prior.alpha_mean,
        tau_d=math.sqrt(prior.tau_sq_mean),
        rho=rho,
        xi_sq=xi_sq,
    )


def simulate_from_params(
    params: DiscreteParams, n_obs: int, init: InitialConditions, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate (h, log_s, Y) from the discrete model, state-aligned.

    The log volatility starts from its stationary law; each return's
    innovation is correlated with the shock forming the next step's
    volatility.  Used for prior-predictive checks and sampler validation.
    """
    if n_obs < 1:
        raise DomainError(f"n_obs must be >= 1, got {n_obs}")
    th, al, ta, rho, mu = (
        params.theta_d,
        params.alpha_d,
        params.tau_d,
        params.rho,
        params.mu_d,
    )
    h = np.empty(n_obs + 1)
    log_s = np.empty(n_obs + 1)
    h[0] = al + math.sqrt(params.stationary_var) * rng.standard_normal()
    log_s[0] = init.eta + math.sqrt(init.kappa_sq) * rng.standard_normal()
    z = rng.standard_normal((n_obs, 2))
    root = math.sqrt(1.0 - rho * rho)
    for i in range(n_obs):
        e1 = z[i, 0]
        e2 = rho * z[i, 0] + root * z[i, 1]
        log_s[i + 1] = log_s[i] + mu + math.exp(h[i]) * e1
        h[i + 1] = al + th * (h[i] - al) + ta * e2
    y = log_s + math.sqrt(params.xi_sq) * rng.standard_normal(n_obs + 1)
    return h, log_s, y


# ---------------------------------------------------------------------------
# leverage bookkeeping shared by the parameter steps
# ---------------------------------------------------------------------------


def _leverage_parts(state: GibbsState, mixture: MixtureTable) -> tuple[np.ndarray, np.ndarray]:
    """Pieces of the volatility transition that do not involve theta or alpha.

    Returns (lev, K) with transition coefficient theta - lev and intercept
    alpha (1 - theta) + K.
    """
    p = state.params
    m_g = mixture.m[state.gamma]
    em = np.exp(m_g / 2.0)
    lev = 2.0 * p.rho * p.tau_d * state.d_sign * mixture.lin_b[state.gamma] * em
    k = p.rho * p.tau_d * state.d_sign * em * mixture.lin_a[state.gamma] + lev * (
        state.y_star - m_g / 2.0
    )
    return lev, k


# ---------------------------------------------------------------------------
# parameter steps
# ---------------------------------------------------------------------------


def step_tau_sq(
    state: GibbsState,
    prior: DiscretePriorSpec,
    rng: np.random.Generator,
    mixture: MixtureTable = LOG_CHI2_MIXTURE,
) -> float:
    """Update of the innovation variance.

    Without leverage the full conditional is inverse gamma: shape grows by
    (n + 1)/2 and the rate accumulates the squared transition residuals
    (deflated by 1 - rho^2) plus the stationary term of the first state,
    and the draw is exact.

    With leverage the transition residual is e_j - rho tau K_j (K_j the
    linearised innovation surrogate), whose cross term is linear in 1/tau
    rather than 1/tau^2, so the inverse gamma evaluated at the current tau
    is only an approximation; sampling it directly leaves a detectable bias
    in simulator-based checks.  The draw is therefore used as a proposal and
    corrected by Metropolis-Hastings against the exact conditional, which
    keeps the kernel invariant at a near-one acceptance rate.
    """
    p = state.params
    n = state.n_obs
    shape = prior.tau_sq_shape + (n + 1) / 2.0
    stat = (1.0 - p.theta_d) * (1.0 + p.theta_d) * (state.h[0] - p.alpha_d) ** 2
    one_m_rho_sq = (1.0 - p.rho) * (1.0 + p.rho)

    if n >= 1:
        lev, k_surr = _leverage_parts(state, mixture)
        # e_j and K_j are free of tau: strip the current tau from lev and K
        e = state.h[1:] - p.alpha_d - p.theta_d * (state.h[:-1] - p.alpha_d)
        if p.rho != 0.0:
            k = (k_surr - lev * state.h[:-1]) / (p.rho * p.tau_d)
        else:
            k = np.zeros(n)
        s_ee = float(np.sum(e * e))
        s_ek = float(np.sum(e * k))
        s_kk = float(np.sum(k * k))
    else:
        s_ee = s_ek = s_kk = 0.0

    base_rate = prior.tau_sq_rate + s_ee / (2.0 * one_m_rho_sq) + 0.5 * stat
    cross = p.rho * s_ek / one_m_rho_sq
    quad = p.rho * p.rho * s_kk / (2.0 * one_m_rho_sq)

    def proposal_rate(tau: float) -> float:
        # rate of the displayed inverse gamma with the residual evaluated at tau
        return base_rate - tau * cross + tau * tau * quad

    def log_target(v: float) -> float:
        return -(shape + 1.0) * math.log(v) - base_rate / v + cross / math.sqrt(v)

    def log_prop(v: float, rate: float) -> float:
        return shape * math.log(rate) - (shape + 1.0) * math.log(v) - rate / v

    cur = p.tau_sq_d
    rate_fwd = proposal_rate(p.tau_d)
    if not (math.isfinite(rate_fwd) and rate_fwd > 0.0):
        raise DomainError(f"tau_sq update produced inadmissible rate {rate_fwd}")
    if cross == 0.0:  # no leverage: the inverse gamma is exact
        return _invgamma_draw(rng, shape, rate_fwd)
    proposal = _invgamma_draw(rng, shape, rate_fwd)
    rate_rev = proposal_rate(math.sqrt(proposal))
    if not (math.isfinite(rate_rev) and rate_rev > 0.0):
        return cur
    log_ratio = (
        log_target(proposal)
        + log_prop(cur, rate_rev)
        - log_target(cur)
        - log_prop(proposal, rate_fwd)
    )
    if math.log(rng.random()) < log_ratio:
        return proposal
    return cur


def _log_norm_kernel(x: float, mean: float, var: float) -> float:
    return -0.5 * (x - mean) ** 2 / var


def step_theta(
    state: GibbsState,
    prior: DiscretePriorSpec,
    rng: np.random.Generator,
    prop_scale: float = 1.0,
    mixture: MixtureTable = LOG_CHI2_MIXTURE,
) -> tuple[float, bool, bool]:
    """Metropolis-Hastings update of the volatility autocorrelation.

    The prior times the transition-residual product collapses to a normal
    kernel in theta, which (truncated to [0, 1]) serves as an independence
    proposal; the stationary factor sqrt(1-theta^2) exp(-(1-theta^2)
    (h_1-alpha)^2 / (2 tau^2)) decides acceptance.  Returns (value,
    accepted, used_prior_fallback).
    """
    p = state.params
    lev, k = _leverage_parts(state, mixture)
    x = state.h[:-1] - p.alpha_d
    w = state.h[1:] + lev * state.h[:-1] - p.alpha_d - k
    s2 = p.tau_sq_d * (1.0 - p.rho * p.rho)
    prec = 1.0 / prior.theta_b**2 + float(np.sum(x * x)) / s2
    mean = (prior.theta_a / prior.theta_b**2 + float(np.sum(w * x)) / s2) / prec
    prop_var = prop_scale * prop_scale / prec

    fallback = False
    try:
        proposal = _truncnorm_draw(rng, mean, math.sqrt(prop_var))
        prop_mean, prop_v = mean, prop_var
    except DomainError:
        proposal = _truncnorm_draw(rng, prior.theta_a, prior.theta_b)
        prop_mean, prop_v = prior.theta_a, prior.theta_b**2
        fallback = True

    hterm = (state.h[0] - p.alpha_d) ** 2 / (2.0 * p.tau_sq_d)

    def log_stationary(t: float) -> float:
        return 0.5 * math.log((1.0 - t) * (1.0 + t)) - (1.0 - t * t) * hterm

    cur = p.theta_d
    log_ratio = (
        _log_norm_kernel(proposal, mean, 1.0 / prec)
        + log_stationary(proposal)
        + _log_norm_kernel(cur, prop_mean, prop_v)
        - _log_norm_kernel(cur, mean, 1.0 / prec)
        - log_stationary(cur)
        - _log_norm_kernel(proposal, prop_mean, prop_v)
    )
    if math.log(rng.random()) < log_ratio:
        return proposal, True, fallback
    return cur, False, fallback


def step_alpha(
    state: GibbsState,
    prior: DiscretePriorSpec,
    rng: np.random.Generator,
    prop_scale: float = 1.0,
    mixture: MixtureTable = LOG_CHI2_MIXTURE,
) -> tuple[float, bool]:
    """Metropolis-Hastings update of the log-volatility level.

    Mirrors the autocorrelation step: the prior and the transition residuals
    give a normal proposal; the h_1 stationary factor decides acceptance.
    """
    p = state.params
    lev, k = _leverage_parts(state, mixture)
    f_all = p.theta_d - lev
    u = state.h[1:] - f_all * state.h[:-1] - k
    one_m_theta = 1.0 - p.theta_d
    s2 = p.tau_sq_d * (1.0 - p.rho * p.rho)
    n = state.n_obs
    prec = 1.0 / prior.alpha_var + n * one_m_theta**2 / s2
    mean = (prior.alpha_mean / prior.alpha_var + one_m_theta * float(np.sum(u)) / s2) / prec
    prop_var = prop_scale * prop_scale / prec
    proposal = mean + math.sqrt(prop_var) * rng.standard_normal()

    stat_prec = (1.0 - p.theta_d * p.theta_d) / p.tau_sq_d

    def log_stationary(a: float) -> float:
        return -0.5 * stat_prec * (state.h[0] - a) ** 2

    cur = p.alpha_d
    log_ratio = (
        _log_norm_kernel(proposal, mean, 1.0 / prec)
        + log_stationary(proposal)
        + _log_norm_kernel(cur, mean, prop_var)
        - _log_norm_kernel(cur, mean, 1.0 / prec)
        - log_stationary(cur)
        - _log_norm_kernel(proposal, mean, prop_var)
    )
    if math.log(rng.random()) < log_ratio:
        return proposal, True
    return cur, False


def step_xi_sq(
    state: GibbsState,
    prior: DiscretePriorSpec,
    rng: np.random.Generator,
    xi_mode: str = "estimated",
    xi_fixed_value: float = 0.0,
) -> float:
    """Conjugate inverse-gamma draw of the noise variance (no-op when fixed)."""
    if xi_mode == "fixed_zero":
        return 0.0
    if xi_mode == "fixed":
        return xi_fixed_value
    resid = state.y_obs[1:] - state.log_s[1:]
    shape = prior.xi_sq_shape + state.n_obs / 2.0
    rate = prior.xi_sq_rate + 0.5 * float(np.sum(resid * resid))
    return _invgamma_draw(rng, shape, rate)


def step_mu(state: GibbsState, prior: DiscretePriorSpec, rng: np.random.Generator) -> float:
    """Conjugate normal draw of the per-period drift.

    Precision-weighted mean of the returns combined with the prior; callers
    must refresh the transformed returns afterwards.
    """
    ret = np.diff(state.log_s)
    inv_sig_sq = np.exp(-2.0 * state.h[:-1])
    prec = 1.0 / prior.mu_var + float(np.sum(inv_sig_sq))
    mean = (prior.mu_mean / prior.mu_var + float(np.sum(ret * inv_sig_sq))) / prec
    return mean + rng.standard_normal() / math.sqrt(prec)


def step_rho(
    state: GibbsState,
    prior: DiscretePriorSpec,
    rng: np.random.Generator,
    walk_scale: float = 0.5,
) -> tuple[float, bool]:
    """Random-walk Metropolis on the Fisher transform of the correlation.

    Uses the exact bivariate density of the standardised price/volatility
    innovation pairs plus the symmetric beta prior.
    """
    p = state.params
    ret = np.diff(state.log_s)
    e1 = (ret - p.mu_d) * np.exp(-state.h[:-1])
    e2 = (state.h[1:] - p.alpha_d - p.theta_d * (state.h[:-1] - p.alpha_d)) / p.tau_d
    s11 = float(np.sum(e1 * e1))
    s22 = float(np.sum(e2 * e2))
    s12 = float(np.sum(e1 * e2))
    n = state.n_obs
    half_c = prior.rho_precision / 2.0

    def log_post(r: float) -> float:
        r2 = (1.0 - r) * (1.0 + r)
        if r2 <= 0.0:
            return -math.inf
        ll = -0.5 * n * math.log(r2) - (s11 - 2.0 * r * s12 + s22) / (2.0 * r2)
        lp = (half_c - 1.0) * (math.log1p(r) + math.log1p(-r))
        return ll + lp + math.log(r2)  # last term: Fisher-transform Jacobian

    cur = p.rho
    z = math.atanh(min(max(cur, -1.0 + 1e-15), 1.0 - 1e-15))
    proposal = math.tanh(z + walk_scale * rng.standard_normal())
    if math.log(rng.random()) < log_post(proposal) - log_post(cur):
        return proposal, True
    return cur, False


# ---------------------------------------------------------------------------
# latent-block steps
# ---------------------------------------------------------------------------


def step_indicators(
    state: GibbsState, rng: np.random.Generator, mixture: MixtureTable = LOG_CHI2_MIXTURE
) -> np.ndarray:
    """Joint categorical draw of all mixture indicators."""
    u = rng.random(state.n_obs)
    return _kernels.draw_indicators(
        state.y_star,
        state.h[:-1],
        np.log(mixture.p),
        mixture.m / 2.0,
        mixture.v_sq / 4.0,
        u,
    )


def step_volatilities(
    state: GibbsState, rng: np.random.Generator, mixture: MixtureTable = LOG_CHI2_MIXTURE
) -> np.ndarray:
    """Joint draw of the log-volatility path via filter/backward sampler.

    The state one step past the final return carries no observation; it is
    drawn from its transition after the in-sample path.
    """
    p = state.params
    model = build_volatility_ssm(state.tobs(), state.gamma, p, mixture)
    filt = forward_filter(model)
    hs = backward_sample(model, filt, rng)
    f_all, c_all = volatility_transition(state.tobs(), state.gamma, p, mixture)
    q = p.tau_sq_d * (1.0 - p.rho * p.rho)
    h_last = f_all[-1] * hs[-1] + c_all[-1] + math.sqrt(q) * rng.standard_normal()
    return np.concatenate([hs, [h_last]])


def step_log_prices(
    state: GibbsState,
    init: InitialConditions,
    rng: np.random.Generator,
) -> np.ndarray:
    """Joint draw of the latent log prices.

    With zero noise variance the observed prices are the latent prices
    exactly.  Otherwise the price block is a linear-Gaussian random walk
    with drift observed under independent noise; the session-open state has
    no direct observation and is drawn from its conditional afterwards.
    """
    p = state.params
    if p.xi_sq == 0.0:
        return state.y_obs.copy()
    n = state.n_obs
    sig_sq = np.exp(2.0 * state.h[:-1])  # variance of return i+1 at index i
    model = LinearGaussianSSM(
        y=state.y_obs[1:],
        F=np.ones(n - 1),
        c=np.full(n - 1, p.mu_d),
        Q=sig_sq[1:],
        H=np.ones(n),
        g=np.zeros(n),
        R=np.full(n, p.xi_sq),
        m0=init.eta + p.mu_d,
        P0=init.kappa_sq + sig_sq[0],
    )
    filt = forward_filter(model)
    xs = backward_sample(model, filt, rng)
    w = init.kappa_sq / (init.kappa_sq + sig_sq[0])
    mean0 = init.eta + w * (xs[0] - init.eta - p.mu_d)
    x0 = mean0 + math.sqrt((1.0 - w) * init.kappa_sq) * rng.standard_normal()
    return np.concatenate([[x0], xs])


# ---------------------------------------------------------------------------
# scan / chain driver
# ---------------------------------------------------------------------------


@dataclass
class ScanStats:
    accept_theta: bool = False
    accept_alpha: bool = False
    accept_rho: bool = False
    theta_prior_fallback: bool = False


def init_state(
    series_y: np.ndarray,
    prior: DiscretePriorSpec,
    cfg: McmcConfig,
    rng: np.random.Generator,
    mixture: MixtureTable = LOG_CHI2_MIXTURE,
) -> GibbsState:
    """Neutral, reproducible chain start.

    Parameters sit at their prior means, the latent prices at the data, the
    volatilities at the prior level, and the indicators at a mixture-prior
    draw.
    """
    n = len(series_y) - 1
    params = prior_mean_params(prior, cfg)
    gamma = rng.choice(mixture.n_components, size=n, p=mixture.p)
    return GibbsState(
        y_obs=np.asarray(series_y, dtype=np.float64),
        h=np.full(n + 1, prior.alpha_mean),
        log_s=np.asarray(series_y, dtype=np.float64).copy(),
        gamma=gamma.astype(np.int64),
        params=params,
    )


def gibbs_scan(
    state: GibbsState,
    prior: DiscretePriorSpec,
    cfg: McmcConfig,
    rng: np.random.Generator,
    init: InitialConditions,
    rho_walk_scale: float | None = None,
    mixture: MixtureTable = LOG_CHI2_MIXTURE,
) -> ScanStats:
    """One full sweep over latents and parameters, mutating ``state``."""
    stats = ScanStats()
    state.log_s = step_log_prices(state, init, rng)
    state.refresh_transform()
    state.gamma = step_indicators(state, rng, mixture)
    state.h = step_volatilities(state, rng, mixture)

    tau_sq = step_tau_sq(state, prior, rng, mixture)
    state.params = replace(state.params, tau_d=math.sqrt(tau_sq))

    theta, acc_t, fb = step_theta(state, prior, rng, cfg.theta_prop_scale, mixture)
    state.params = replace(state.params, theta_d=theta)
    stats.accept_theta = acc_t
    stats.theta_prior_fallback = fb

    alpha, acc_a = step_alpha(state, prior, rng, cfg.alpha_prop_scale, mixture)
    state.params = replace(state.params, alpha_d=alpha)
    stats.accept_alpha = acc_a

    xi_sq = step_xi_sq(state, prior, rng, cfg.xi_mode, cfg.xi_fixed_value)
    state.params = replace(state.params, xi_sq=xi_sq)

    mu = step_mu(state, prior, rng)
    state.params = replace(state.params, mu_d=mu)
    state.refresh_transform()

    if cfg.rho_mode == "estimated":
        scale = cfg.rho_walk_scale if rho_walk_scale is None else rho_walk_scale
        rho, acc_r = step_rho(state, prior, rng, scale)
        state.params = replace(state.params, rho=rho)
        stats.accept_rho = acc_r

    state.iteration += 1
    return stats


def _complete_loglik(state: GibbsState) -> float:
    """Log density of the observations and returns given latents and parameters."""
    p = state.params
    ret = np.diff(state.log_s)
    sig = np.exp(state.h[:-1])
    e2 = (state.h[1:] - p.alpha_d - p.theta_d * (state.h[:-1] - p.alpha_d)) / p.tau_d
    r2 = (1.0 - p.rho) * (1.0 + p.rho)
    mean = p.mu_d + p.rho * sig * e2
    var = sig * sig * r2
    ll = -0.5 * float(
        np.sum(np.log(2.0 * np.pi * var) + (ret - mean) ** 2 / var)
    )
    if p.xi_sq > 0.0:
        resid = state.y_obs[1:] - state.log_s[1:]
        n = state.n_obs
        ll += -0.5 * (
            n * math.log(2.0 * math.pi * p.xi_sq) + float(np.sum(resid * resid)) / p.xi_sq
        )
    return ll


@dataclass
class ChainOutput:
    """Retained draws and diagnostics of one chain.

    Parameter draws are stored on the discrete scale and mapped to the
    continuous scale through the single :func:`hfsv.model.continuize` code
    path.  ``iv_draws`` holds the in-sample integrated variance of each
    retained iteration (sum of squared discrete-scale volatilities over the
    observed returns).  ``h_paths`` (optional) stores thinned discrete-scale
    volatility paths, one row per stored draw.
    """

    delta_ms: float
    n_obs: int
    seed: int | None
    mu_d: np.ndarray
    theta_d: np.ndarray
    alpha_d: np.ndarray
    tau_sq_d: np.ndarray
    rho: np.ndarray
    xi_sq: np.ndarray
    mu_hat: np.ndarray
    theta_hat: np.ndarray
    alpha_hat: np.ndarray
    tau_sq_hat: np.ndarray
    iv_draws: np.ndarray
    loglik: np.ndarray
    accept_rates: dict[str, float]
    theta_prior_fallbacks: int
    rho_walk_scale_final: float
    h_paths: np.ndarray | None = None

    @property
    def n_retained(self) -> int:
        return len(self.mu_d)

    def params_at(self, i: int) -> DiscreteParams:
        return DiscreteParams(
            delta_ms=self.delta_ms,
            mu_d=float(self.mu_d[i]),
            theta_d=float(self.theta_d[i]),
            alpha_d=float(self.alpha_d[i]),
            tau_d=float(math.sqrt(self.tau_sq_d[i])),
            rho=float(self.rho[i]),
            xi_sq=float(self.xi_sq[i]),
        )

    def continuous_at(self, i: int) -> ContinuousParams:
        return continuize(self.params_at(i))


def run_chain(
    series: ObservedSeries,
    prior: DiscretePriorSpec,
    cfg: McmcConfig,
    mixture: MixtureTable = LOG_CHI2_MIXTURE,
) -> ChainOutput:
    """Run one Gibbs chain on a uniformly sampled series.

    Deterministic given the config seed.  With ``iterations == 0`` the
    output holds the single initialisation record.  Any step failure aborts
    with the iteration index attached.
    """
    if abs(series.delta_obs_ms - prior.delta_ms) > 1e-9:
        raise DomainError(
            f"prior was elicited at delta={prior.delta_ms} but the series is "
            f"sampled at delta={series.delta_obs_ms}"
        )
    n = series.n_obs
    if n < 1:
        raise DomainError("need at least one return to run the sampler")
    rng = np.random.default_rng(cfg.seed)
    init = InitialConditions(
        eta=float(series.Y[0]) if cfg.eta is None else cfg.eta,
        kappa_sq=cfg.kappa_sq,
    )
    state = init_state(series.Y, prior, cfg, rng, mixture)

    # iterations == 0 keeps just the initialisation record
    keep = 1 if cfg.iterations == 0 else (cfg.iterations - cfg.burn_in) // cfg.thin
    rec = {
        name: np.empty(keep)
        for name in ("mu_d", "theta_d", "alpha_d", "tau_sq_d", "rho", "xi_sq", "iv", "loglik")
    }
    store_paths = cfg.path_thin > 0
    paths: list[np.ndarray] = []

    def record(idx: int) -> None:
        p = state.params
        rec["mu_d"][idx] = p.mu_d
        rec["theta_d"][idx] = p.theta_d
        rec["alpha_d"][idx] = p.alpha_d
        rec["tau_sq_d"][idx] = p.tau_sq_d
        rec["rho"][idx] = p.rho
        rec["xi_sq"][idx] = p.xi_sq
        rec["iv"][idx] = float(np.sum(np.exp(2.0 * state.h[:-1])))
        rec["loglik"][idx] = _complete_loglik(state)
        if store_paths and idx % cfg.path_thin == 0:
            paths.append(state.h.copy())

    if cfg.iterations == 0:
        record(0)
        return _finalize(rec, 1, {}, 0, cfg.rho_walk_scale, paths, series, cfg)

    acc = {"theta": 0, "alpha": 0, "rho": 0}
    post_iters = 0
    fallbacks = 0
    rho_scale = cfg.rho_walk_scale
    kept = 0
    for it in range(1, cfg.iterations + 1):
        try:
            stats = gibbs_scan(state, prior, cfg, rng, init, rho_scale, mixture)
        except (DomainError, FilterError) as exc:
            raise FilterError(f"chain aborted at iteration {it}: {exc}") from exc
        fallbacks += int(stats.theta_prior_fallback)
        in_burn = it <= cfg.burn_in
        if in_burn and cfg.adapt_rho and cfg.rho_mode == "estimated":
            gain = 2.0 / math.sqrt(99.0 + it)
            rho_scale *= math.exp(gain * ((1.0 if stats.accept_rho else 0.0) - 0.3))
            rho_scale = min(max(rho_scale, 1e-3), 20.0)
        if not in_burn:
            post_iters += 1
            acc["theta"] += int(stats.accept_theta)
            acc["alpha"] += int(stats.accept_alpha)
            acc["rho"] += int(stats.accept_rho)
            if (it - cfg.burn_in) % cfg.thin == 0 and kept < keep:
                record(kept)
                kept += 1
    rates = {
        name: (count / post_iters if post_iters else math.nan) for name, count in acc.items()
    }
    if cfg.rho_mode != "estimated":
        rates["rho"] = math.nan
    return _finalize(rec, kept, rates, fallbacks, rho_scale, paths, series, cfg)


def _finalize(
    rec: dict[str, np.ndarray],
    kept: int,
    rates: dict[str, float],
    fallbacks: int,
    rho_scale: float,
    paths: list[np.ndarray],
    series: ObservedSeries,
    cfg: McmcConfig,
) -> ChainOutput:
    sl = slice(0, kept)
    n_keep = kept
    mu_hat = np.empty(n_keep)
    theta_hat = np.empty(n_keep)
    alpha_hat = np.empty(n_keep)
    tau_sq_hat = np.empty(n_keep)
    for i in range(n_keep):
        c = continuize(
            DiscreteParams(
                delta_ms=series.delta_obs_ms,
                mu_d=float(rec["mu_d"][i]),
                theta_d=float(rec["theta_d"][i]),
                alpha_d=float(rec["alpha_d"][i]),
                tau_d=float(math.sqrt(rec["tau_sq_d"][i])),
                rho=float(rec["rho"][i]),
                xi_sq=float(rec["xi_sq"][i]),
            )
        )
        mu_hat[i] = c.mu_hat
        theta_hat[i] = c.theta_hat
        alpha_hat[i] = c.alpha_hat
        tau_sq_hat[i] = c.tau_sq_hat
    return ChainOutput(
        delta_ms=series.delta_obs_ms,
        n_obs=series.n_obs,
        seed=cfg.seed,
        mu_d=rec["mu_d"][sl].copy(),
        theta_d=rec["theta_d"][sl].copy(),
        alpha_d=rec["alpha_d"][sl].copy(),
        tau_sq_d=rec["tau_sq_d"][sl].copy(),
        rho=rec["rho"][sl].copy(),
        xi_sq=rec["xi_sq"][sl].copy(),
        mu_hat=mu_hat,
        theta_hat=theta_hat,
        alpha_hat=alpha_hat,
        tau_sq_hat=tau_sq_hat,
        iv_draws=rec["iv"][sl].copy(),
        loglik=rec["loglik"][sl].copy(),
        accept_rates=rates,
        theta_prior_fallbacks=fallbacks,
        rho_walk_scale_final=rho_scale,
        h_paths=np.array(paths) if paths else None,
    )


def effective_sample_size(draws: np.ndarray) -> float:
    """Autocorrelation-based effective sample size (initial positive sequence)."""
    x = np.asarray(draws, dtype=np.float64)
    n = len(x)
    if n < 4:
        return float(n)
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return float(n)
    acf_sum = 0.0
    for lag in range(1, n // 2):
        c = float(np.dot(x[:-lag], x[lag:])) / n / var
        if c <= 0.0:
            break
        acf_sum += c
    return n / (1.0 + 2.0 * acf_sum)
