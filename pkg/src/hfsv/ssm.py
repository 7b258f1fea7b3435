"""Scalar time-varying linear-Gaussian state-space engine.

Forward filter, exact backward sampler and smoother for models of the form

    x[j+1] = F[j] x[j] + c[j] + N(0, Q[j])        j = 0..n-2
    y[j]   = H[j] x[j] + g[j] + N(0, R[j])        j = 0..n-1
    x[0]  ~ N(m0, P0)

plus the machinery that reduces the volatility block of the price model to
this form: the log-abs-return transform, the 10-component normal mixture for
log(chi^2_1)/2, and the L2-optimal linearisation of exp() used to fold the
price/volatility innovation correlation into the state recursion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, FilterError
from .model import DiscreteParams

__all__ = [
    "LinearGaussianSSM",
    "FilterResult",
    "MixtureTable",
    "LOG_CHI2_MIXTURE",
    "TransformedObs",
    "RETURN_FLOOR",
    "forward_filter",
    "backward_sample",
    "smoother_moments",
    "transform_returns",
    "linearization_constants",
    "volatility_transition",
    "build_volatility_ssm",
]

# floor for |return - mu| before taking logs; keeps cent-rounded flat prices
# from producing -inf observations
RETURN_FLOOR = 1e-12


@dataclass(frozen=True)
class LinearGaussianSSM:
    """Arrays describing one scalar state-space model instance."""

    y: np.ndarray
    F: np.ndarray
    c: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    g: np.ndarray
    R: np.ndarray
    m0: float
    P0: float

    def __post_init__(self) -> None:
        n = len(self.y)
        if n < 1:
            raise DomainError("state-space model needs at least one observation")
        for name in ("H", "g", "R"):
            if len(getattr(self, name)) != n:
                raise DomainError(f"{name} must have length {n}")
        for name in ("F", "c", "Q"):
            if len(getattr(self, name)) != n - 1:
                raise DomainError(f"{name} must have length {n - 1}")
        if np.any(self.Q < 0.0):
            raise DomainError("state noise variances Q must be >= 0")
        if np.any(self.R <= 0.0):
            raise DomainError("observation noise variances R must be > 0")
        if self.P0 <= 0.0:
            raise DomainError(f"initial variance P0 must be > 0, got {self.P0}")

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class FilterResult:
    filtered_mean: np.ndarray
    filtered_var: np.ndarray
    loglik: float


def forward_filter(model: LinearGaussianSSM) -> FilterResult:
    """Run the forward predict/update recursions.

    The log likelihood is the sum of the one-step predictive log densities.
    """
    mf, pf, ll = _kernels.kalman_filter(
        np.ascontiguousarray(model.y, dtype=np.float64),
        np.ascontiguousarray(model.F, dtype=np.float64),
        np.ascontiguousarray(model.c, dtype=np.float64),
        np.ascontiguousarray(model.Q, dtype=np.float64),
        np.ascontiguousarray(model.H, dtype=np.float64),
        np.ascontiguousarray(model.g, dtype=np.float64),
        np.ascontiguousarray(model.R, dtype=np.float64),
        float(model.m0),
        float(model.P0),
    )
    if not (np.isfinite(ll) and np.all(np.isfinite(mf)) and np.all(np.isfinite(pf))):
        raise FilterError("forward filter produced non-finite moments")
    return FilterResult(filtered_mean=mf, filtered_var=pf, loglik=float(ll))


def backward_sample(
    model: LinearGaussianSSM, filt: FilterResult, rng: np.random.Generator
) -> np.ndarray:
    """Exact joint draw of the state path from the smoothing distribution."""
    z = rng.standard_normal(model.n)
    x = _kernels.backward_draw(
        np.ascontiguousarray(model.F, dtype=np.float64),
        np.ascontiguousarray(model.c, dtype=np.float64),
        np.ascontiguousarray(model.Q, dtype=np.float64),
        filt.filtered_mean,
        filt.filtered_var,
        z,
    )
    if not np.all(np.isfinite(x)):
        raise FilterError("backward sampler produced non-finite states")
    return x


def smoother_moments(model: LinearGaussianSSM, filt: FilterResult) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed means and variances (Rauch-Tung-Striebel recursion)."""
    ms, ps = _kernels.rts_smooth(
        np.ascontiguousarray(model.F, dtype=np.float64),
        np.ascontiguousarray(model.c, dtype=np.float64),
        np.ascontiguousarray(model.Q, dtype=np.float64),
        filt.filtered_mean,
        filt.filtered_var,
    )
    return ms, ps


def linearization_constants(v_sq: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """L2-optimal linear approximation of exp() under a mixture component.

    For e* ~ N(m/2, v^2/4), the approximation exp(e*) ~ exp(m/2) (a + b (2e* - m))
    minimising the expected squared error has a = exp(v^2/8) and b = a / 2.
    """
    v_sq = np.asarray(v_sq, dtype=np.float64)
    if np.any(v_sq <= 0.0):
        raise DomainError("v_sq must be > 0")
    a = np.exp(v_sq / 8.0)
    return a, 0.5 * a


@dataclass(frozen=True)
class MixtureTable:
    """Normal mixture approximating log(chi^2_1)/2, with linearisation constants.

    Component l contributes weight p[l], mean m[l]/2 and variance v_sq[l]/4
    to the distribution of log(eps^2)/2 for standard normal eps.  ``lin_a``
    and ``lin_b`` are the L2-optimal constants approximating exp() under each
    component (see :func:`linearization_constants`).
    """

    p: np.ndarray
    m: np.ndarray
    v_sq: np.ndarray
    lin_a: np.ndarray = field(init=False)
    lin_b: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        m = np.asarray(self.m, dtype=np.float64)
        v_sq = np.asarray(self.v_sq, dtype=np.float64)
        if not (len(p) == len(m) == len(v_sq)):
            raise DomainError("mixture arrays must have equal length")
        if abs(float(p.sum()) - 1.0) > 1e-5:
            raise DomainError(f"mixture weights sum to {p.sum()}, expected 1 within 1e-5")
        if np.any(v_sq <= 0.0):
            raise DomainError("mixture variances must be > 0")
        mean = float(np.sum(p * m / 2.0))
        if abs(mean - (-0.63518)) > 5e-3:
            raise DomainError(
                f"mixture mean {mean} is not the log(chi^2_1)/2 mean (-0.63518)"
            )
        a, b = linearization_constants(v_sq)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "v_sq", v_sq)
        object.__setattr__(self, "lin_a", a)
        object.__setattr__(self, "lin_b", b)

    @property
    def n_components(self) -> int:
        return len(self.p)

    def mean(self) -> float:
        return float(np.sum(self.p * self.m / 2.0))

    def variance(self) -> float:
        mu = self.mean()
        second = np.sum(self.p * ((self.m / 2.0) ** 2 + self.v_sq / 4.0))
        return float(second - mu * mu)


# 10-component mixture of Omori, Chib, Shephard & Nakajima (2007), stated for
# log(chi^2_1) and used here for log(chi^2_1)/2 via the m/2, v^2/4 scaling
LOG_CHI2_MIXTURE = MixtureTable(
    p=np.array(
        [0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115]
    ),
    m=np.array(
        [1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]
    ),
    v_sq=np.array(
        [0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342]
    ),
)


@dataclass(frozen=True)
class TransformedObs:
    """Log-absolute demeaned returns with their signs.

    ``y_star[j] = log |dlog S - mu|`` for the (j+1)-th return; steps where the
    absolute demeaned return fell below the floor are flagged and floored.
    """

    y_star: np.ndarray
    d: np.ndarray
    degenerate: np.ndarray

    @property
    def n(self) -> int:
        return len(self.y_star)


def transform_returns(log_s: np.ndarray, mu_d: float, floor: float = RETURN_FLOOR) -> TransformedObs:
    """Transform a log-price path into the observations of the volatility block."""
    log_s = np.asarray(log_s, dtype=np.float64)
    if len(log_s) < 2:
        raise DomainError("need at least two log prices to form a return")
    dev = np.diff(log_s) - mu_d
    mag = np.abs(dev)
    degenerate = mag < floor
    y_star = np.log(np.maximum(mag, floor))
    d = np.where(dev >= 0.0, 1.0, -1.0)
    return TransformedObs(y_star=y_star, d=d, degenerate=degenerate)


def volatility_transition(
    tobs: TransformedObs, gamma: np.ndarray, params: DiscreteParams, mixture: MixtureTable
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step AR coefficients and intercepts of the volatility recursion.

    Conditional on the mixture component and the return sign, the correlated
    part of the volatility shock is replaced by its linearised conditional
    mean, leaving independent N(0, tau^2 (1 - rho^2)) innovations.  Writing
    the standardised observation residual in terms of y* and h gives

        F[j] = theta - 2 d[j] rho tau b_l exp(m_l / 2)
        c[j] = alpha (1 - theta) + d[j] rho tau exp(m_l / 2)
               (a_l + 2 b_l (y*[j] - m_l / 2))

    with l = gamma[j].  Entry j governs the step from state j to j+1.
    """
    if len(gamma) != tobs.n:
        raise DomainError("gamma and transformed observations must have equal length")
    theta, tau, rho, alpha = params.theta_d, params.tau_d, params.rho, params.alpha_d
    m_g = mixture.m[gamma]
    a_g = mixture.lin_a[gamma]
    b_g = mixture.lin_b[gamma]
    em = np.exp(m_g / 2.0)
    lev = 2.0 * rho * tau * tobs.d * b_g * em
    F = theta - lev
    c = alpha * (1.0 - theta) + rho * tau * tobs.d * em * a_g + lev * (tobs.y_star - m_g / 2.0)
    return F, c


def build_volatility_ssm(
    tobs: TransformedObs,
    gamma: np.ndarray,
    params: DiscreteParams,
    mixture: MixtureTable,
) -> LinearGaussianSSM:
    """Assemble the linear-Gaussian form of the volatility block.

    States are the discrete-scale log volatilities driving each return; the
    state after the final return is not part of this system (it carries no
    observation and can be extended with one transition draw).
    """
    if abs(params.rho) >= 1.0:
        raise DomainError("|rho| = 1 makes the state noise degenerate")
    n = tobs.n
    F, c = volatility_transition(tobs, gamma, params, mixture)
    q = params.tau_sq_d * (1.0 - params.rho * params.rho)
    return LinearGaussianSSM(
        y=tobs.y_star,
        F=F[: n - 1],
        c=c[: n - 1],
        Q=np.full(n - 1, q),
        H=np.ones(n),
        g=mixture.m[gamma] / 2.0,
        R=mixture.v_sq[gamma] / 4.0,
        m0=params.alpha_d,
        P0=params.stationary_var,
    )
