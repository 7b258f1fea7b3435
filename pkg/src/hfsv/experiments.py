"""Scripted simulation studies at desk scale.

Two harnesses: an interval-coverage study comparing the model variants (and
a kernel/bootstrap baseline) across sampling periods, and a study of how the
posterior variance of the log-volatility level responds to finer sampling
versus longer observation windows.  The level study also carries exact
closed forms for the simplified conjugate model, which the sampler results
are compared against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .errors import DomainError
from .estimators import (
    IntervalEstimate,
    default_bandwidth,
    kernel_realized_variance,
    posterior_iv,
    stationary_bootstrap_ci,
)
from .mcmc import McmcConfig, run_chain
from .model import ContinuousParams, InitialConditions, discretize
from .priors import ContinuousPriorMoments, elicit
from .simulate import (
    MicrostructureSpec,
    apply_microstructure,
    simulate_path,
    subsample,
    true_integrated_variance,
)

__all__ = [
    "TABLE_PARAMS",
    "default_prior_moments",
    "CoverageDesign",
    "CoverageCell",
    "CoverageReport",
    "run_coverage_study",
    "AlphaVarianceDesign",
    "AlphaVarianceRow",
    "AlphaVarianceReport",
    "run_alpha_variance_study",
    "posterior_var_alpha_exact",
    "posterior_var_alpha_linearized",
    "posterior_var_alpha_longspan",
    "conjugate_alpha_posterior",
]

# benchmark parameter set: 1% annual drift, 30-minute volatility inertia,
# long-run volatility matching a broad equity index, $0.1 spread at $100
TABLE_PARAMS = ContinuousParams(
    mu_hat=1.7e-12,
    theta_hat=5.6e-7,
    alpha_hat=-13.0,
    tau_sq_hat=1.3e-7,
    rho=0.0,
    xi_sq=2.5e-7,
)

MS_PER_DAY = 23_400_000  # 6.5 trading hours


def default_prior_moments(
    params: ContinuousParams = TABLE_PARAMS,
    theta_sd: float = 3e-7,
) -> ContinuousPriorMoments:
    """Diffuse prior moments centred on a parameter set.

    Standard deviations sit roughly an order of magnitude above each mean,
    except for the mean-reversion rate: a spread much wider than the rate
    itself puts substantial mass on autocorrelations no [0,1]-truncated
    normal can represent, making the moment matching infeasible, so its
    default spread is about half the mean.
    """
    return ContinuousPriorMoments(
        mu_mean=params.mu_hat,
        mu_sd=1e-11,
        theta_mean=params.theta_hat,
        theta_sd=theta_sd,
        alpha_mean=params.alpha_hat,
        alpha_sd=10.0,
        tau_sq_mean=params.tau_sq_hat,
        tau_sq_sd=1e-6,
        xi_sq_mean=params.xi_sq if params.xi_sq > 0 else 2.5e-7,
        xi_sq_sd=1e-6,
        rho_precision=2.0,
    )


# ---------------------------------------------------------------------------
# closed forms for the simplified conjugate model
# ---------------------------------------------------------------------------


def posterior_var_alpha_exact(
    theta_hat: float,
    tau_sq_hat: float,
    prior_var: float,
    delta_ms: float,
    n_steps: int,
) -> float:
    """Posterior variance of the level when the log volatility is observed.

    For N transition steps at period delta, the reciprocal variance is
    1/prior_var + (2 theta / tau^2) (1 + N tanh(theta delta / 2)); the "1"
    is the stationary information in the first observation.
    """
    if theta_hat <= 0.0 or tau_sq_hat <= 0.0 or delta_ms <= 0.0:
        raise DomainError("theta_hat, tau_sq_hat and delta_ms must be > 0")
    prior_prec = 0.0 if math.isinf(prior_var) else 1.0 / prior_var
    info = (2.0 * theta_hat / tau_sq_hat) * (
        1.0 + n_steps * math.tanh(theta_hat * delta_ms / 2.0)
    )
    return 1.0 / (prior_prec + info)


def posterior_var_alpha_linearized(
    theta_hat: float,
    tau_sq_hat: float,
    prior_var: float,
    horizon_ms: float,
) -> float:
    """Small-(theta delta) linearisation: information depends on T only.

    Replaces tanh(theta delta / 2) by theta delta / 2, giving
    1/prior_var + (2 theta / tau^2)(1 + theta T / 2); valid for
    theta * delta <= 1, where refining the grid adds no information.
    """
    prior_prec = 0.0 if math.isinf(prior_var) else 1.0 / prior_var
    info = (2.0 * theta_hat / tau_sq_hat) * (1.0 + theta_hat * horizon_ms / 2.0)
    return 1.0 / (prior_prec + info)


def posterior_var_alpha_longspan(theta_hat: float, tau_sq_hat: float, horizon_ms: float) -> float:
    """Long-span limit: variance inversely proportional to the horizon.

    Valid when the prior is wider than the stationary law and the horizon
    covers many inertia times.
    """
    return (tau_sq_hat / theta_hat) / (theta_hat * horizon_ms)


def conjugate_alpha_posterior(
    logvol: np.ndarray,
    theta_hat: float,
    tau_sq_hat: float,
    delta_ms: float,
    prior_mean: float,
    prior_var: float,
) -> tuple[float, float]:
    """Exact normal posterior of the level from exact log-vol observations.

    ``logvol`` holds continuous-scale log volatilities on a uniform grid of
    period ``delta_ms``.  Accumulates the stationary term for the first
    point plus one Gaussian transition term per step; independent of the
    closed form in :func:`posterior_var_alpha_exact`.
    """
    x = np.asarray(logvol, dtype=np.float64)
    if len(x) < 1:
        raise DomainError("need at least one log-volatility observation")
    theta_d = math.exp(-theta_hat * delta_ms)
    tau_sq_d = tau_sq_hat * (-math.expm1(-2.0 * theta_hat * delta_ms)) / (2.0 * theta_hat)
    stat_var = tau_sq_hat / (2.0 * theta_hat)
    prior_prec = 0.0 if math.isinf(prior_var) else 1.0 / prior_var
    prec = prior_prec + 1.0 / stat_var
    lin = (0.0 if prior_prec == 0.0 else prior_mean * prior_prec) + x[0] / stat_var
    if len(x) >= 2:
        resid = x[1:] - theta_d * x[:-1]
        coef = 1.0 - theta_d
        prec += len(resid) * coef * coef / tau_sq_d
        lin += coef * float(np.sum(resid)) / tau_sq_d
    var = 1.0 / prec
    return lin * var, var


# ---------------------------------------------------------------------------
# coverage study
# ---------------------------------------------------------------------------

VARIANTS = ("xi_zero", "xi_fixed", "xi_estimated")


def _variant_config(variant: str, base: McmcConfig, xi_fixed_value: float) -> McmcConfig:
    if variant == "xi_zero":
        return replace(base, xi_mode="fixed_zero", xi_fixed_value=0.0)
    if variant == "xi_fixed":
        return replace(base, xi_mode="fixed", xi_fixed_value=xi_fixed_value)
    if variant == "xi_estimated":
        return replace(base, xi_mode="estimated")
    raise DomainError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


@dataclass(frozen=True)
class CoverageDesign:
    """Grid and budgets of one coverage study."""

    n_replicates: int = 50
    sampling_periods_ms: tuple[int, ...] = (300_000, 60_000, 30_000, 15_000)
    variants: tuple[str, ...] = ("xi_zero", "xi_estimated")
    params: ContinuousParams = TABLE_PARAMS
    noise: MicrostructureSpec = field(
        default_factory=lambda: MicrostructureSpec(mode="bid_ask", spread=0.1, tick=0.01)
    )
    delta_sim_ms: int = 1000
    horizon_ms: int = MS_PER_DAY
    eta: float = math.log(100.0)
    kappa_sq: float = 1e-4
    iterations: int = 8000
    burn_in: int = 3000
    level: float = 0.05
    include_kernel_baseline: bool = True
    bootstrap_draws: int = 400
    theta_prior_sd: float = 3e-7
    n_jobs: int = 1
    max_failure_fraction: float = 0.10

    def __post_init__(self) -> None:
        if self.n_replicates < 0:
            raise DomainError("n_replicates must be >= 0")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise DomainError(f"unknown variants {bad}; expected subset of {VARIANTS}")


@dataclass(frozen=True)
class CoverageCell:
    """Aggregated result of one (sampling period, method) cell."""

    delta_ms: int
    method: str
    n_fits: int
    n_failures: int
    coverage_pct: float
    mean_width: float
    mean_seconds_per_fit: float


@dataclass(frozen=True)
class CoverageReport:
    design: CoverageDesign
    seed: int
    cells: tuple[CoverageCell, ...]

    def cell(self, delta_ms: int, method: str) -> CoverageCell:
        for c in self.cells:
            if c.delta_ms == delta_ms and c.method == method:
                return c
        raise KeyError(f"no cell for delta_ms={delta_ms}, method={method!r}")

    def to_rows(self) -> list[dict]:
        return [
            {
                "delta_ms": c.delta_ms,
                "method": c.method,
                "n_fits": c.n_fits,
                "n_failures": c.n_failures,
                "coverage_pct": c.coverage_pct,
                "mean_width": c.mean_width,
                "mean_seconds_per_fit": c.mean_seconds_per_fit,
            }
            for c in self.cells
        ]

    def render_table(self) -> str:
        """Plain-text table: methods down, sampling periods across."""
        deltas = sorted({c.delta_ms for c in self.cells}, reverse=True)
        methods = []
        for c in self.cells:
            if c.method not in methods:
                methods.append(c.method)
        label = {300_000: "5 min", 60_000: "60 sec", 30_000: "30 sec", 15_000: "15 sec", 5_000: "5 sec"}
        header = ["Sampling period".ljust(28)] + [
            label.get(d, f"{d} ms").rjust(9) for d in deltas
        ]
        lines = ["".join(header)]
        for m in methods:
            row = [m.ljust(28)]
            for d in deltas:
                try:
                    row.append(f"{self.cell(d, m).coverage_pct:9.0f}")
                except KeyError:
                    row.append(" " * 9)
            lines.append("".join(row))
        return "\n".join(lines)


def _coverage_one_replicate(design: CoverageDesign, master_seed: int, rep: int) -> list[dict]:
    """All fits for one simulated day; returns one record per cell entry."""
    seeds = np.random.SeedSequence((master_seed, rep)).generate_state(4)
    path_seed, noise_seed, chain_seed, boot_seed = (int(s) for s in seeds)
    init = InitialConditions(eta=design.eta, kappa_sq=design.kappa_sq)
    clean = simulate_path(design.params, design.delta_sim_ms, design.horizon_ms, init, path_seed)
    noisy = apply_microstructure(clean, design.noise, noise_seed)
    xi_seed_value = design.noise.implied_xi_sq(math.exp(design.eta))

    records: list[dict] = []
    for delta in design.sampling_periods_ms:
        series = subsample(noisy, delta)
        truth = true_integrated_variance(noisy, delta)
        moments = default_prior_moments(design.params, theta_sd=design.theta_prior_sd)
        prior = elicit(moments, delta)
        base = McmcConfig(
            iterations=design.iterations,
            burn_in=design.burn_in,
            seed=chain_seed,
            rho_mode="fixed",
            rho_fixed_value=design.params.rho,
            eta=None,
            kappa_sq=design.kappa_sq,
        )
        for variant in design.variants:
            cfg = _variant_config(variant, base, xi_seed_value)
            rec = {"delta_ms": delta, "method": variant, "rep": rep}
            t0 = time.perf_counter()
            try:
                chain = run_chain(series, prior, cfg)
                _, est = posterior_iv(chain, design.level)
                rec.update(
                    covered=est.covers(truth), width=est.width, seconds=time.perf_counter() - t0
                )
            except Exception as exc:  # recorded, never silently dropped
                rec.update(error=repr(exc), seconds=time.perf_counter() - t0)
            records.append(rec)
        if design.include_kernel_baseline:
            rec = {"delta_ms": delta, "method": "kernel_bootstrap", "rep": rep}
            t0 = time.perf_counter()
            try:
                est = stationary_bootstrap_ci(
                    series,
                    lambda s: kernel_realized_variance(s, default_bandwidth(s.n_obs)),
                    n_boot=design.bootstrap_draws,
                    level=design.level,
                    seed=boot_seed,
                )
                rec.update(
                    covered=est.covers(truth), width=est.width, seconds=time.perf_counter() - t0
                )
            except Exception as exc:
                rec.update(error=repr(exc), seconds=time.perf_counter() - t0)
            records.append(rec)
    return records


def run_coverage_study(design: CoverageDesign, seed: int) -> CoverageReport:
    """Replicate days, fit every (period, variant) cell, aggregate coverage.

    Deterministic given (design, seed): every replicate derives its seeds
    from the master seed and its index.  Raises if more than the configured
    fraction of fits fail, since coverage over survivors is biased.
    """
    if design.n_replicates == 0:
        return CoverageReport(design=design, seed=seed, cells=())
    runner = Parallel(n_jobs=design.n_jobs) if design.n_jobs != 1 else None
    if runner is not None:
        all_recs = runner(
            delayed(_coverage_one_replicate)(design, seed, rep)
            for rep in range(design.n_replicates)
        )
    else:
        all_recs = [
            _coverage_one_replicate(design, seed, rep) for rep in range(design.n_replicates)
        ]
    flat = [r for recs in all_recs for r in recs]

    n_fail = sum(1 for r in flat if "error" in r)
    if n_fail > design.max_failure_fraction * len(flat):
        examples = [r["error"] for r in flat if "error" in r][:3]
        raise DomainError(
            f"{n_fail}/{len(flat)} fits failed, above the "
            f"{design.max_failure_fraction:.0%} budget; first errors: {examples}"
        )

    cells = []
    methods = list(design.variants) + (
        ["kernel_bootstrap"] if design.include_kernel_baseline else []
    )
    for delta in design.sampling_periods_ms:
        for method in methods:
            group = [r for r in flat if r["delta_ms"] == delta and r["method"] == method]
            ok = [r for r in group if "covered" in r]
            cells.append(
                CoverageCell(
                    delta_ms=delta,
                    method=method,
                    n_fits=len(ok),
                    n_failures=len(group) - len(ok),
                    coverage_pct=(
                        100.0 * float(np.mean([r["covered"] for r in ok])) if ok else math.nan
                    ),
                    mean_width=float(np.mean([r["width"] for r in ok])) if ok else math.nan,
                    mean_seconds_per_fit=(
                        float(np.mean([r["seconds"] for r in group])) if group else math.nan
                    ),
                )
            )
    return CoverageReport(design=design, seed=seed, cells=tuple(cells))


# ---------------------------------------------------------------------------
# level-uncertainty study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaVarianceDesign:
    """Design of the level-uncertainty study.

    One day is simulated with a 15-minute inertia timescale; scenario
    "shrink_delta" sweeps the sampling period at fixed horizon, scenario
    "grow_horizon" sweeps the horizon at fixed period.
    """

    params: ContinuousParams = replace(TABLE_PARAMS, theta_hat=1.0 / 900_000.0)
    delta_sim_ms: int = 1000
    horizon_ms: int = MS_PER_DAY
    delta_sweep_ms: tuple[int, ...] = (60_000, 30_000, 15_000, 5_000)
    horizon_fractions: tuple[float, ...] = (1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6, 1.0)
    horizon_delta_ms: int = 60_000
    noise: MicrostructureSpec = field(
        default_factory=lambda: MicrostructureSpec(mode="bid_ask", spread=0.1, tick=0.01)
    )
    eta: float = math.log(100.0)
    kappa_sq: float = 1e-4
    iterations: int = 8000
    burn_in: int = 3000
    theta_prior_sd: float = 3e-7
    run_mcmc: bool = True


@dataclass(frozen=True)
class AlphaVarianceRow:
    scenario: str
    delta_ms: int
    horizon_ms: int
    n_steps: int
    var_closed_form: float
    var_conjugate: float
    var_mcmc: float


@dataclass(frozen=True)
class AlphaVarianceReport:
    design: AlphaVarianceDesign
    seed: int
    rows: tuple[AlphaVarianceRow, ...]

    def scenario_rows(self, scenario: str) -> list[AlphaVarianceRow]:
        return [r for r in self.rows if r.scenario == scenario]

    def to_rows(self) -> list[dict]:
        return [
            {
                "scenario": r.scenario,
                "delta_ms": r.delta_ms,
                "horizon_ms": r.horizon_ms,
                "n_steps": r.n_steps,
                "var_closed_form": r.var_closed_form,
                "var_conjugate": r.var_conjugate,
                "var_mcmc": r.var_mcmc,
            }
            for r in self.rows
        ]


def _alpha_row(
    design: AlphaVarianceDesign,
    scenario: str,
    noisy,
    delta: int,
    horizon: int,
    moments: ContinuousPriorMoments,
    chain_seed: int,
) -> AlphaVarianceRow:
    p = design.params
    n_sim_points = int(horizon // design.delta_sim_ms) + 1
    k = delta // design.delta_sim_ms
    idx = np.arange(0, n_sim_points, k)
    n_steps = len(idx) - 1
    # exact observations for the conjugate model: continuous-scale log vol
    logvol = noisy.log_sigma[idx] - 0.5 * math.log(design.delta_sim_ms)
    var_cf = posterior_var_alpha_exact(
        p.theta_hat, p.tau_sq_hat, moments.alpha_sd**2, delta, n_steps
    )
    _, var_conj = conjugate_alpha_posterior(
        logvol, p.theta_hat, p.tau_sq_hat, delta, moments.alpha_mean, moments.alpha_sd**2
    )
    var_mcmc = math.nan
    if design.run_mcmc:
        series = subsample(_truncate(noisy, horizon, design.delta_sim_ms), delta)
        prior = elicit(moments, delta)
        cfg = McmcConfig(
            iterations=design.iterations,
            burn_in=design.burn_in,
            seed=chain_seed,
            xi_mode="estimated",
            rho_mode="fixed",
            rho_fixed_value=p.rho,
            kappa_sq=design.kappa_sq,
        )
        chain = run_chain(series, prior, cfg)
        var_mcmc = float(np.var(chain.alpha_hat))
    return AlphaVarianceRow(
        scenario=scenario,
        delta_ms=delta,
        horizon_ms=horizon,
        n_steps=n_steps,
        var_closed_form=var_cf,
        var_conjugate=var_conj,
        var_mcmc=var_mcmc,
    )


def _truncate(path, horizon_ms: int, delta_sim_ms: int):
    n_points = int(horizon_ms // delta_sim_ms) + 1
    if n_points >= path.n_points:
        return path
    return replace(
        path,
        log_S=path.log_S[:n_points],
        log_sigma=path.log_sigma[:n_points],
        Y=path.Y[:n_points],
    )


def run_alpha_variance_study(design: AlphaVarianceDesign, seed: int) -> AlphaVarianceReport:
    """Run both sweeps on one simulated dataset.

    Scenario "shrink_delta" holds the horizon fixed and refines the grid;
    scenario "grow_horizon" holds the period fixed and extends the horizon.
    Each row records the closed-form, conjugate-model and (optionally) full
    posterior variances of the continuous-scale level.
    """
    seeds = np.random.SeedSequence((seed, 0)).generate_state(3)
    path_seed, noise_seed, chain_seed0 = (int(s) for s in seeds)
    init = InitialConditions(eta=design.eta, kappa_sq=design.kappa_sq)
    clean = simulate_path(design.params, design.delta_sim_ms, design.horizon_ms, init, path_seed)
    noisy = apply_microstructure(clean, design.noise, noise_seed)
    moments = default_prior_moments(design.params, theta_sd=design.theta_prior_sd)

    rows = []
    for i, delta in enumerate(design.delta_sweep_ms):
        rows.append(
            _alpha_row(
                design, "shrink_delta", noisy, delta, design.horizon_ms, moments, chain_seed0 + i
            )
        )
    for i, frac in enumerate(design.horizon_fractions):
        horizon = int(design.horizon_ms * frac)
        horizon -= horizon % design.horizon_delta_ms
        rows.append(
            _alpha_row(
                design,
                "grow_horizon",
                noisy,
                design.horizon_delta_ms,
                horizon,
                moments,
                chain_seed0 + 100 + i,
            )
        )
    return AlphaVarianceReport(design=design, seed=seed, rows=tuple(rows))
