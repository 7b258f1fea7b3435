"""Model parameters in continuous time and at a fixed sampling period.

The latent system is a geometric random walk for the log price driven by a
log-volatility process that mean-reverts at rate ``theta_hat``.  Solving the
log-volatility SDE exactly over a step of ``delta_ms`` milliseconds yields an
AR(1) recursion whose coefficients are exact functions of the continuous-time
parameters; :func:`discretize` and :func:`continuize` implement that map and
its algebraic inverse.  Because the map is exact, parameters inferred at
different sampling periods can be compared on a single (continuous) scale.

Time is measured in milliseconds throughout the package; all rates are per
millisecond.  Latent volatilities at period ``delta_ms`` absorb a factor
``sqrt(delta_ms)`` so that squared discrete volatilities sum directly to the
integrated variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "ContinuousParams",
    "DiscreteParams",
    "InitialConditions",
    "discretize",
    "continuize",
    "stationary_logvol",
]


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ContinuousParams:
    """Continuous-time parameters (per-millisecond rates).

    Attributes
    ----------
    mu_hat:
        Drift of the log price per millisecond.
    theta_hat:
        Mean-reversion rate of the log volatility per millisecond (> 0).
    alpha_hat:
        Stationary mean of the log volatility (log scale, ms time unit).
    tau_sq_hat:
        Variance rate of the volatility-of-volatility per millisecond (> 0).
    rho:
        Correlation between price and log-volatility innovations, in [-1, 1].
    xi_sq:
        Variance of the additive microstructure noise on the observed log
        price (>= 0); scale free, independent of the sampling period.
    """

    mu_hat: float
    theta_hat: float
    alpha_hat: float
    tau_sq_hat: float
    rho: float
    xi_sq: float = 0.0

    def __post_init__(self) -> None:
        for name in ("mu_hat", "theta_hat", "alpha_hat", "tau_sq_hat", "rho", "xi_sq"):
            _require_finite(name, getattr(self, name))
        if self.theta_hat <= 0.0:
            raise DomainError(f"theta_hat must be > 0, got {self.theta_hat}")
        if self.tau_sq_hat <= 0.0:
            raise DomainError(f"tau_sq_hat must be > 0, got {self.tau_sq_hat}")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.xi_sq < 0.0:
            raise DomainError(f"xi_sq must be >= 0, got {self.xi_sq}")


@dataclass(frozen=True)
class DiscreteParams:
    """Parameters of the exact recursions at sampling period ``delta_ms``.

    ``theta_d`` is kept strictly inside (0, 1); boundary values are rejected
    so that :func:`continuize` is total on valid instances.

    ``log_theta_d`` is an optional precision carrier: when ``theta_d`` sits
    within a few ulp of 1 (tiny mean reversion per step), ``log(theta_d)``
    recomputed from the stored float loses most of its relative accuracy, so
    :func:`discretize` records the exact exponent it used.  A value that is
    inconsistent with ``theta_d`` (e.g. left over after replacing
    ``theta_d``) is discarded automatically.
    """

    delta_ms: float
    mu_d: float
    theta_d: float
    alpha_d: float
    tau_d: float
    rho: float
    xi_sq: float = 0.0
    log_theta_d: float | None = None

    def __post_init__(self) -> None:
        for name in ("delta_ms", "mu_d", "theta_d", "alpha_d", "tau_d", "rho", "xi_sq"):
            _require_finite(name, getattr(self, name))
        if self.delta_ms <= 0.0:
            raise DomainError(f"delta_ms must be > 0, got {self.delta_ms}")
        if not 0.0 < self.theta_d < 1.0:
            raise DomainError(f"theta_d must lie strictly in (0, 1), got {self.theta_d}")
        if self.tau_d <= 0.0:
            raise DomainError(f"tau_d must be > 0, got {self.tau_d}")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.xi_sq < 0.0:
            raise DomainError(f"xi_sq must be >= 0, got {self.xi_sq}")
        if self.log_theta_d is not None:
            stale = (
                not math.isfinite(self.log_theta_d)
                or abs(math.exp(self.log_theta_d) - self.theta_d) > 4e-16 * self.theta_d
            )
            if stale:
                object.__setattr__(self, "log_theta_d", None)

    def _log_theta(self) -> float:
        return math.log(self.theta_d) if self.log_theta_d is None else self.log_theta_d

    @property
    def tau_sq_d(self) -> float:
        return self.tau_d * self.tau_d

    @property
    def stationary_var(self) -> float:
        """Variance of the stationary AR(1) law, tau_d^2 / (1 - theta_d^2)."""
        return self.tau_sq_d / (-math.expm1(2.0 * self._log_theta()))


@dataclass(frozen=True)
class InitialConditions:
    """Prior mean and variance of the log price at the session open."""

    eta: float
    kappa_sq: float

    def __post_init__(self) -> None:
        _require_finite("eta", self.eta)
        _require_finite("kappa_sq", self.kappa_sq)
        if self.kappa_sq <= 0.0:
            raise DomainError(f"kappa_sq must be > 0, got {self.kappa_sq}")


def discretize(p: ContinuousParams, delta_ms: float) -> DiscreteParams:
    """Map continuous-time parameters to the exact recursion at ``delta_ms``.

    The AR(1) coefficient is ``exp(-theta_hat * delta)``, the innovation
    variance is ``tau_sq_hat * (1 - exp(-2 theta_hat delta)) / (2 theta_hat)``,
    the drift scales linearly, and the log-volatility level shifts by
    ``log(delta) / 2`` to absorb the sqrt(delta) volatility normalisation.
    """
    if delta_ms <= 0.0:
        raise DomainError(f"delta_ms must be > 0, got {delta_ms}")
    x = p.theta_hat * delta_ms
    mu_d = p.mu_hat * delta_ms
    theta_d = math.exp(-x)
    alpha_d = p.alpha_hat + 0.5 * math.log(delta_ms)
    tau_sq_d = p.tau_sq_hat * (-math.expm1(-2.0 * x)) / (2.0 * p.theta_hat)
    if not math.isfinite(mu_d):
        raise DomainError(f"mu_d overflowed for delta_ms={delta_ms}")
    if theta_d <= 0.0 or theta_d >= 1.0:
        raise DomainError(
            f"theta_d = exp(-theta_hat*delta) = {theta_d} left (0, 1); "
            f"theta_hat*delta = {x}"
        )
    if not (math.isfinite(tau_sq_d) and tau_sq_d > 0.0):
        raise DomainError(f"tau_d degenerate for delta_ms={delta_ms}: tau_sq_d={tau_sq_d}")
    return DiscreteParams(
        delta_ms=delta_ms,
        mu_d=mu_d,
        theta_d=theta_d,
        alpha_d=alpha_d,
        tau_d=math.sqrt(tau_sq_d),
        rho=p.rho,
        xi_sq=p.xi_sq,
        log_theta_d=-x,
    )


def continuize(d: DiscreteParams) -> ContinuousParams:
    """Exact algebraic inverse of :func:`discretize`."""
    log_theta = d._log_theta()
    theta_hat = -log_theta / d.delta_ms
    tau_sq_hat = d.tau_sq_d * 2.0 * theta_hat / (-math.expm1(2.0 * log_theta))
    return ContinuousParams(
        mu_hat=d.mu_d / d.delta_ms,
        theta_hat=theta_hat,
        alpha_hat=d.alpha_d - 0.5 * math.log(d.delta_ms),
        tau_sq_hat=tau_sq_hat,
        rho=d.rho,
        xi_sq=d.xi_sq,
    )


def stationary_logvol(p: ContinuousParams) -> tuple[float, float]:
    """Mean and variance of the stationary law of the continuous log volatility."""
    return p.alpha_hat, p.tau_sq_hat / (2.0 * p.theta_hat)
