"""Scale-coherent prior elicitation.

Users state first and second moments of the continuous-time parameters once;
this module converts them into conditionally conjugate hyperparameters at any
sampling period.  Location parameters map exactly.  The autocorrelation
coefficient gets a [0, 1]-truncated normal whose first two moments are made
to match the moments of ``exp(-theta_hat * delta)`` (computed by a
second-order Taylor expansion) by solving a 2x2 nonlinear system.  The
innovation variance gets an inverse gamma matched to delta-method moments of
the variance transform.  Matching can be infeasible when the continuous
moments put non-trivial mass outside the admissible range; elicitation then
fails loudly rather than clamping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, ElicitationError

__all__ = [
    "ContinuousPriorMoments",
    "DiscretePriorSpec",
    "truncnorm_moments",
    "theta_moment_targets",
    "elicit_theta",
    "tau_sq_moment_targets",
    "elicit_tau_sq",
    "elicit_location_priors",
    "elicit_xi_and_rho",
    "invgamma_from_moments",
    "rho_precision_from_sd",
    "elicit",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ContinuousPriorMoments:
    """First two moments of each continuous-time parameter.

    ``rho_precision`` is the total concentration ``c`` of the symmetric beta
    prior on (rho + 1) / 2; ``c = 2`` is the uniform prior on [-1, 1].
    """

    mu_mean: float
    mu_sd: float
    theta_mean: float
    theta_sd: float
    alpha_mean: float
    alpha_sd: float
    tau_sq_mean: float
    tau_sq_sd: float
    xi_sq_mean: float
    xi_sq_sd: float
    rho_precision: float = 2.0

    def __post_init__(self) -> None:
        for name in ("mu_sd", "theta_sd", "alpha_sd", "tau_sq_sd", "xi_sq_sd"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.theta_mean <= 0.0:
            raise DomainError(f"theta_mean must be > 0, got {self.theta_mean}")
        if self.tau_sq_mean <= 0.0:
            raise DomainError(f"tau_sq_mean must be > 0, got {self.tau_sq_mean}")
        if self.xi_sq_mean <= 0.0:
            raise DomainError(f"xi_sq_mean must be > 0, got {self.xi_sq_mean}")
        if self.rho_precision <= 0.0:
            raise DomainError(f"rho_precision must be > 0, got {self.rho_precision}")


@dataclass(frozen=True)
class DiscretePriorSpec:
    """Hyperparameters of the conjugate priors at one sampling period.

    mu ~ Normal(mu_mean, mu_var); theta ~ Normal(theta_a, theta_b^2)
    truncated to [0, 1]; alpha ~ Normal(alpha_mean, alpha_var);
    tau_sq and xi_sq ~ InvGamma(shape, rate) with density proportional to
    x^(-shape-1) exp(-rate / x); (rho + 1)/2 ~ Beta(c/2, c/2).
    """

    delta_ms: float
    mu_mean: float
    mu_var: float
    theta_a: float
    theta_b: float
    alpha_mean: float
    alpha_var: float
    tau_sq_shape: float
    tau_sq_rate: float
    xi_sq_shape: float
    xi_sq_rate: float
    rho_precision: float = 2.0

    def __post_init__(self) -> None:
        if self.delta_ms <= 0.0:
            raise DomainError(f"delta_ms must be > 0, got {self.delta_ms}")
        for name in ("mu_var", "alpha_var", "theta_b"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("tau_sq_shape", "xi_sq_shape"):
            if getattr(self, name) <= 2.0:
                raise DomainError(
                    f"{name} must exceed 2 so both prior moments are finite, "
                    f"got {getattr(self, name)}"
                )
        for name in ("tau_sq_rate", "xi_sq_rate"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.rho_precision <= 0.0:
            raise DomainError(f"rho_precision must be > 0, got {self.rho_precision}")

    @property
    def tau_sq_mean(self) -> float:
        return self.tau_sq_rate / (self.tau_sq_shape - 1.0)

    @property
    def xi_sq_mean(self) -> float:
        return self.xi_sq_rate / (self.xi_sq_shape - 1.0)


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def truncnorm_moments(
    a: float, b: float, lower: float = 0.0, upper: float = 1.0
) -> tuple[float, float]:
    """Mean and variance of a Normal(a, b^2) truncated to [lower, upper].

    Raises when the interval carries no representable probability mass.
    """
    if b <= 0.0:
        raise DomainError(f"truncation scale b must be > 0, got {b}")
    al = (lower - a) / b
    be = (upper - a) / b
    z = ndtr(be) - ndtr(al)
    if not z > 1e-300:
        raise DomainError(
            f"normal({a}, {b}^2) has vanishing mass on [{lower}, {upper}] (mass={z})"
        )
    pa, pb = _phi(al), _phi(be)
    r1 = (pa - pb) / z
    r2 = (al * pa - be * pb) / z
    mean = a + b * r1
    var = b * b * (1.0 + r2 - r1 * r1)
    return mean, var


def _truncnorm_moments_jac(a: float, b: float) -> np.ndarray:
    """Jacobian of (mean, var) of the [0,1]-truncated normal w.r.t. (a, b)."""
    al = -a / b
    be = (1.0 - a) / b
    z = ndtr(be) - ndtr(al)
    pa, pb = _phi(al), _phi(be)
    r1 = (pa - pb) / z
    r2 = (al * pa - be * pb) / z
    r3 = (al * al * pa - be * be * pb) / z
    r4 = (al**3 * pa - be**3 * pb) / z
    dm_da = 1.0 + r2 - r1 * r1
    dm_db = r1 + r3 - r1 * r2
    dv_da = b * (r3 - r1 - 3.0 * r1 * r2 + 2.0 * r1**3)
    dv_db = 2.0 * b * (1.0 + r2 - r1 * r1) + b * (
        r4 - r2 - r2 * r2 - 2.0 * r1 * r3 + 2.0 * r1 * r1 * r2
    )
    return np.array([[dm_da, dm_db], [dv_da, dv_db]])


def theta_moment_targets(mom: ContinuousPriorMoments, delta_ms: float) -> tuple[float, float]:
    """Taylor-approximated mean and variance of exp(-theta_hat * delta).

    Second-order expansion around the prior mean of theta_hat; degrades when
    theta_sd * delta grows beyond about one half.
    """
    x = mom.theta_mean * delta_ms
    s2 = (mom.theta_sd * delta_ms) ** 2
    m1 = math.exp(-x) * (1.0 + 0.5 * s2)
    m2 = math.exp(-2.0 * x) * (1.0 + 2.0 * s2)
    return m1, m2 - m1 * m1


def elicit_theta(
    mom: ContinuousPriorMoments,
    delta_ms: float,
    *,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Solve for (theta_a, theta_b) matching the truncated-normal moments.

    Damped Newton iteration with the analytic Jacobian, started at the raw
    targets.  The returned pair reproduces the targets to ``tol``; if no
    admissible solution exists (the target spread can exceed what any [0,1]
    truncated normal supports at that mean) an :class:`ElicitationError`
    reports the targets.
    """
    target_mean, target_var = theta_moment_targets(mom, delta_ms)
    if target_var <= 0.0:
        raise ElicitationError(
            f"theta({delta_ms}) variance target is non-positive: {target_var}"
        )

    def fail(reason: str) -> ElicitationError:
        return ElicitationError(
            f"no truncated-normal hyperparameters reproduce the theta({delta_ms}) "
            f"targets mean={target_mean!r}, var={target_var!r}: {reason}"
        )

    a, b = target_mean, math.sqrt(target_var)
    try:
        resid = np.array(truncnorm_moments(a, b)) - (target_mean, target_var)
    except DomainError as exc:
        raise fail(str(exc)) from exc
    for _ in range(max_iter):
        if float(np.max(np.abs(resid))) < tol:
            return a, b
        jac = _truncnorm_moments_jac(a, b)
        try:
            step = np.linalg.solve(jac, resid)
        except np.linalg.LinAlgError as exc:
            raise fail("singular Jacobian") from exc
        # damping: halve until the step stays admissible and improves
        scale = 1.0
        norm0 = float(np.max(np.abs(resid)))
        for _ in range(60):
            a_new, b_new = a - scale * step[0], b - scale * step[1]
            if b_new > 0.0 and abs(a_new) < 1e3:
                try:
                    resid_new = np.array(truncnorm_moments(a_new, b_new)) - (
                        target_mean,
                        target_var,
                    )
                except DomainError:
                    resid_new = None
                if resid_new is not None and float(np.max(np.abs(resid_new))) < norm0:
                    a, b, resid = a_new, b_new, resid_new
                    break
            scale *= 0.5
        else:
            raise fail("Newton iteration stalled (likely infeasible targets)")
    raise fail(f"no convergence within {max_iter} iterations")


def _g_with_derivs(theta: float, delta_ms: float) -> tuple[float, float, float]:
    """g(theta) = (1 - exp(-2 delta theta)) / (2 theta) and its derivatives."""
    e = math.exp(-2.0 * delta_ms * theta)
    g = -math.expm1(-2.0 * delta_ms * theta) / (2.0 * theta)
    gp = delta_ms * e / theta - (1.0 - e) / (2.0 * theta * theta)
    gpp = (
        -2.0 * delta_ms * delta_ms * e * theta * theta
        - 2.0 * delta_ms * e * theta
        + 1.0
        - e
    ) / theta**3
    return g, gp, gpp


def tau_sq_moment_targets(mom: ContinuousPriorMoments, delta_ms: float) -> tuple[float, float]:
    """Delta-method mean and variance of the innovation variance at ``delta_ms``.

    The transform is tau_sq_hat * g(theta_hat); both moments come from
    second-order Taylor expansions about the prior means with all partial
    derivatives evaluated analytically.
    """
    g, gp, gpp = _g_with_derivs(mom.theta_mean, delta_ms)
    at, bt2 = mom.tau_sq_mean, mom.tau_sq_sd**2
    bh2 = mom.theta_sd**2
    # the transform is linear in tau_sq_hat, so only the theta curvature
    # corrects the first moment
    m1 = at * g + 0.5 * bh2 * at * gpp
    m2 = (at * at + bt2) * g * g + bh2 * at * at * (gp * gp + g * gpp)
    return m1, m2 - m1 * m1


def invgamma_from_moments(mean: float, var: float) -> tuple[float, float]:
    """Shape and rate of the inverse gamma with the given mean and variance."""
    if mean <= 0.0:
        raise ElicitationError(f"inverse-gamma mean must be > 0, got {mean}")
    if var <= 0.0:
        raise ElicitationError(
            f"inverse-gamma variance target must be > 0, got {var} (refusing to clamp)"
        )
    shape = mean * mean / var + 2.0
    rate = mean * (shape - 1.0)
    return shape, rate


def elicit_tau_sq(mom: ContinuousPriorMoments, delta_ms: float) -> tuple[float, float]:
    """Inverse-gamma hyperparameters for the innovation variance at ``delta_ms``."""
    mean, var = tau_sq_moment_targets(mom, delta_ms)
    if mean <= 0.0 or var <= 0.0:
        raise ElicitationError(
            f"tau_sq({delta_ms}) delta-method targets are inadmissible: "
            f"mean={mean!r}, var={var!r}"
        )
    return invgamma_from_moments(mean, var)


def elicit_location_priors(
    mom: ContinuousPriorMoments, delta_ms: float
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Normal priors for the drift and the log-volatility level (exact maps).

    Returns ((mu_mean, mu_var), (alpha_mean, alpha_var)).
    """
    if delta_ms <= 0.0:
        raise DomainError(f"delta_ms must be > 0, got {delta_ms}")
    mu = (delta_ms * mom.mu_mean, (delta_ms * mom.mu_sd) ** 2)
    alpha = (mom.alpha_mean + 0.5 * math.log(delta_ms), mom.alpha_sd**2)
    return mu, alpha


def elicit_xi_and_rho(mom: ContinuousPriorMoments) -> tuple[tuple[float, float], float]:
    """Scale-free priors: inverse gamma for xi_sq, beta precision for rho."""
    xi = invgamma_from_moments(mom.xi_sq_mean, mom.xi_sq_sd**2)
    return xi, mom.rho_precision


def rho_precision_from_sd(sd: float) -> float:
    """Beta precision c giving the requested prior sd of rho (sd = 1/sqrt(c+1)).

    Requested sds of 0.5 or more are mapped to the uniform prior (c = 2) with
    a warning; such spreads sit outside the range this family is meant to
    express and usually signal "no real prior information".
    """
    if sd <= 0.0:
        raise DomainError(f"rho sd must be > 0, got {sd}")
    if sd >= 0.5:
        warnings.warn(
            f"rho prior sd {sd} requested; using the uniform prior (precision 2)",
            stacklevel=2,
        )
        return 2.0
    return 1.0 / (sd * sd) - 1.0


def elicit(mom: ContinuousPriorMoments, delta_ms: float) -> DiscretePriorSpec:
    """Full elicitation at one sampling period."""
    (mu_mean, mu_var), (alpha_mean, alpha_var) = elicit_location_priors(mom, delta_ms)
    theta_a, theta_b = elicit_theta(mom, delta_ms)
    tau_shape, tau_rate = elicit_tau_sq(mom, delta_ms)
    (xi_shape, xi_rate), c = elicit_xi_and_rho(mom)
    return DiscretePriorSpec(
        delta_ms=delta_ms,
        mu_mean=mu_mean,
        mu_var=mu_var,
        theta_a=theta_a,
        theta_b=theta_b,
        alpha_mean=alpha_mean,
        alpha_var=alpha_var,
        tau_sq_shape=tau_shape,
        tau_sq_rate=tau_rate,
        xi_sq_shape=xi_shape,
        xi_sq_rate=xi_rate,
        rho_precision=c,
    )
