"""Exact-discretization path simulation, microstructure noise, subsampling.

Paths are generated on a fine simulation grid (``delta_sim_ms``), optionally
contaminated with a noise layer on the price level, and then subsampled onto
a coarser observation grid.  Noise is applied on the simulation grid before
subsampling, so every observation grid sees the same noise layer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, GridError
from .model import ContinuousParams, InitialConditions, discretize

__all__ = [
    "MicrostructureSpec",
    "PathSample",
    "ObservedSeries",
    "simulate_path",
    "apply_microstructure",
    "subsample",
    "true_integrated_variance",
]

_NOISE_MODES = ("none", "gaussian", "bid_ask")


@dataclass(frozen=True)
class MicrostructureSpec:
    """Noise layer applied to simulated prices.

    ``gaussian`` adds N(0, xi_sq) directly to the log price.  ``bid_ask``
    perturbs the price level by U[-spread/2, spread/2] and rounds to the
    nearest tick before taking logs, mimicking quote bounce plus price
    discreteness.
    """

    mode: str = "none"
    xi_sq: float = 0.0
    spread: float = 0.0
    tick: float = 0.01

    def __post_init__(self) -> None:
        if self.mode not in _NOISE_MODES:
            raise DomainError(f"noise mode must be one of {_NOISE_MODES}, got {self.mode!r}")
        if self.xi_sq < 0.0:
            raise DomainError(f"xi_sq must be >= 0, got {self.xi_sq}")
        if self.spread < 0.0:
            raise DomainError(f"spread must be >= 0, got {self.spread}")
        if self.mode == "bid_ask" and self.tick <= 0.0:
            raise DomainError(f"tick must be > 0 in bid_ask mode, got {self.tick}")

    def implied_xi_sq(self, ref_price: float) -> float:
        """Noise variance implied by the spread/tick at a reference price.

        Uses the first-order rule xi ~ D / (2 Q) with D the larger of the
        spread and the tick.  Intended for seeding priors only; the generator
        itself is never altered by this value.
        """
        if self.mode == "gaussian":
            return self.xi_sq
        if self.mode == "none":
            return 0.0
        if ref_price <= 0.0:
            raise DomainError(f"ref_price must be > 0, got {ref_price}")
        d = max(self.spread, self.tick)
        return (d / (2.0 * ref_price)) ** 2


@dataclass(frozen=True)
class PathSample:
    """A simulated latent path plus its (possibly noisy) observed log prices.

    ``log_sigma[j]`` is the discrete-scale log volatility multiplying the
    return that ends at grid point ``j``; entry 0 is the stationary draw that
    seeds the recursion and drives no return.
    """

    delta_sim_ms: int
    log_S: np.ndarray
    log_sigma: np.ndarray
    Y: np.ndarray
    seed: int
    noise_redraws: int = 0

    def __post_init__(self) -> None:
        if not (len(self.log_S) == len(self.log_sigma) == len(self.Y)):
            raise DomainError("log_S, log_sigma and Y must have equal length")
        for name in ("log_S", "log_sigma", "Y"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DomainError(f"{name} contains non-finite entries")

    @property
    def n_points(self) -> int:
        return len(self.log_S)

    @property
    def horizon_ms(self) -> int:
        return (self.n_points - 1) * self.delta_sim_ms


@dataclass(frozen=True)
class ObservedSeries:
    """Log prices on a uniform observation grid.

    ``n_obs`` counts returns, i.e. one less than the number of grid points.
    When the series comes from a simulation, the matching true latent values
    are carried along for scoring (``true_log_vol`` is the continuous-scale
    log volatility at the grid points).
    """

    delta_obs_ms: int
    timestamps: np.ndarray
    Y: np.ndarray
    true_log_S: np.ndarray | None = None
    true_log_vol: np.ndarray | None = None
    gap_count: int = 0

    def __post_init__(self) -> None:
        if int(self.delta_obs_ms) != self.delta_obs_ms or self.delta_obs_ms <= 0:
            raise DomainError(f"delta_obs_ms must be a positive integer, got {self.delta_obs_ms}")
        if len(self.timestamps) != len(self.Y):
            raise DomainError("timestamps and Y must have equal length")
        if len(self.Y) < 2:
            raise DomainError("an observed series needs at least two grid points")
        steps = np.diff(self.timestamps)
        if not np.all(steps == self.delta_obs_ms):
            raise DomainError("timestamps must be strictly increasing with spacing delta_obs_ms")

    @property
    def n_obs(self) -> int:
        return len(self.Y) - 1

    def returns(self) -> np.ndarray:
        return np.diff(self.Y)


def simulate_path(
    p: ContinuousParams,
    delta_sim_ms: int,
    horizon_ms: int,
    init: InitialConditions,
    seed: int,
) -> PathSample:
    """Simulate the latent system exactly on the ``delta_sim_ms`` grid.

    The log volatility starts from its stationary law and follows the exact
    AR(1) recursion; each return's innovation is correlated (``rho``) with
    the shock that forms the next step's volatility.  Identical inputs give
    bit-identical output.  ``Y`` equals ``log_S``; use
    :func:`apply_microstructure` to add a noise layer.
    """
    if delta_sim_ms <= 0:
        raise DomainError(f"delta_sim_ms must be > 0, got {delta_sim_ms}")
    if horizon_ms < delta_sim_ms:
        raise DomainError(
            f"horizon_ms={horizon_ms} must be at least delta_sim_ms={delta_sim_ms}"
        )
    n = int(horizon_ms // delta_sim_ms)
    if n + 1 > 500_000_000:
        raise DomainError(f"horizon implies {n + 1} grid points; refusing to allocate")
    d = discretize(p, delta_sim_ms)
    rng = np.random.default_rng(seed)

    h0 = d.alpha_d + np.sqrt(d.stationary_var) * rng.standard_normal()
    log_s0 = init.eta + np.sqrt(init.kappa_sq) * rng.standard_normal()
    z = rng.standard_normal((n, 2))
    z_pre = rng.standard_normal()

    e1 = z[:, 0]
    e2 = d.rho * z[:, 0] + np.sqrt(1.0 - d.rho * d.rho) * z[:, 1]
    # shocks driving log_sigma[1..n]: the pre-step shock, then e2 paired with
    # returns 1..n-1 (e2[n-1] would only create the unused step n+1)
    w = np.concatenate(([z_pre], e2[: n - 1]))

    log_sigma = np.empty(n + 1)
    log_sigma[0] = h0
    dev, _ = lfilter(
        [1.0], [1.0, -d.theta_d], d.tau_d * w, zi=np.array([d.theta_d * (h0 - d.alpha_d)])
    )
    log_sigma[1:] = d.alpha_d + dev

    log_S = np.empty(n + 1)
    log_S[0] = log_s0
    log_S[1:] = log_s0 + np.cumsum(d.mu_d + np.exp(log_sigma[1:]) * e1)

    return PathSample(
        delta_sim_ms=int(delta_sim_ms),
        log_S=log_S,
        log_sigma=log_sigma,
        Y=log_S.copy(),
        seed=seed,
    )


def apply_microstructure(path: PathSample, spec: MicrostructureSpec, seed: int) -> PathSample:
    """Contaminate the observed log prices of a clean path.

    Requires ``Y == log_S`` (noise not yet applied).  In ``bid_ask`` mode the
    price level is perturbed and tick-rounded; perturbations that leave a
    non-positive rounded price are redrawn and counted in ``noise_redraws``.
    """
    if not np.array_equal(path.Y, path.log_S):
        raise DomainError("path already carries a noise layer (Y differs from log_S)")
    if spec.mode == "none":
        return replace(path, Y=path.log_S.copy(), noise_redraws=0)
    rng = np.random.default_rng(seed)
    n_pts = path.n_points
    if spec.mode == "gaussian":
        y = path.log_S + np.sqrt(spec.xi_sq) * rng.standard_normal(n_pts)
        return replace(path, Y=y, noise_redraws=0)

    # bid_ask: perturb the price level, then round to the tick grid
    prices = np.exp(path.log_S)
    half = 0.5 * spec.spread
    rounded = np.round((prices + rng.uniform(-half, half, n_pts)) / spec.tick) * spec.tick
    redraws = 0
    bad = rounded <= 0.0
    while np.any(bad):
        redraws += int(bad.sum())
        retry = prices[bad] + rng.uniform(-half, half, int(bad.sum()))
        rounded[bad] = np.round(retry / spec.tick) * spec.tick
        bad = rounded <= 0.0
    return replace(path, Y=np.log(rounded), noise_redraws=redraws)


def subsample(path: PathSample, delta_obs_ms: int) -> ObservedSeries:
    """Take every k-th observation of ``Y`` starting at index 0.

    ``delta_obs_ms`` must be an integer multiple of the simulation period.
    True latent values at the retained grid points ride along for scoring;
    the log volatility is reported on the continuous scale so it is
    comparable across observation grids.
    """
    if delta_obs_ms <= 0:
        raise GridError(f"delta_obs_ms must be > 0, got {delta_obs_ms}")
    ratio = delta_obs_ms / path.delta_sim_ms
    k = int(round(ratio))
    if abs(ratio - k) > 1e-9 or k < 1:
        raise GridError(
            f"delta_obs_ms={delta_obs_ms} is not a multiple of delta_sim_ms={path.delta_sim_ms}"
        )
    idx = np.arange(0, path.n_points, k)
    if len(idx) < 2:
        raise GridError(f"delta_obs_ms={delta_obs_ms} leaves fewer than two grid points")
    true_log_vol = path.log_sigma[idx] - 0.5 * np.log(path.delta_sim_ms)
    return ObservedSeries(
        delta_obs_ms=int(delta_obs_ms),
        timestamps=idx.astype(np.int64) * path.delta_sim_ms,
        Y=path.Y[idx].copy(),
        true_log_S=path.log_S[idx].copy(),
        true_log_vol=true_log_vol,
    )


def true_integrated_variance(path: PathSample, delta_obs_ms: int) -> float:
    """Integrated variance over the horizon covered by the observation grid.

    Sums the squared discrete-scale volatilities on the simulation grid up to
    the last point the observation grid reaches; this is the scoring target
    for interval-coverage studies.
    """
    ratio = delta_obs_ms / path.delta_sim_ms
    k = int(round(ratio))
    if abs(ratio - k) > 1e-9 or k < 1:
        raise GridError(
            f"delta_obs_ms={delta_obs_ms} is not a multiple of delta_sim_ms={path.delta_sim_ms}"
        )
    n_obs = (path.n_points - 1) // k
    m = n_obs * k
    if m < 1:
        raise GridError("observation grid covers no full return")
    return float(np.sum(np.exp(2.0 * path.log_sigma[1 : m + 1])))
