"""Causal-effect estimators and parametric-bootstrap inference.

``fit_mr_quantile`` runs coordinate ascent on the asymmetric Laplace
likelihood of the Wald ratios: the location update is a weighted quantile at
the current skewness, and the inverse-scale and skewness updates are exact
closed forms. Baselines cover the inverse-variance-weighted mean, weighted
linear regression with an unconstrained intercept, and the weighted median.
Standard errors for the quantile-based estimators come from a parametric
bootstrap that resamples both summary statistics and refits everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import (
    AllInstrumentsDroppedError,
    DegenerateFitError,
    EmptyInputError,
    MrQuantileError,
    TooFewBootstrapReplicatesError,
    TooFewInstrumentsError,
    TooManyFailedReplicatesError,
)
from .ratios import RatioSet, compute_ratios, quantile_weights, ratio_variance
from .summary_data import HarmonizedSet
from .wqr import LOSS_FLOOR, AldParams, tau_root, weighted_quantile

METHODS = ("mr_quantile", "ivw", "egger", "weighted_median")
BOOTSTRAP_METHODS = ("mr_quantile", "weighted_median")

# Extra stability required before a fit is declared converged: consecutive
# parameter triples must agree to this relative tolerance, so that converged
# fits are genuine fixed points of the three updates.
PARAM_STABILITY = 1e-12

_MAX_FAILED_FRACTION = 0.05


@dataclass(frozen=True)
class SolverConfig:
    """Coordinate-ascent settings for the quantile estimator."""

    tol: float = 1e-8
    max_iter: int = 1000
    tau_init: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.tau_init < 1.0:
            raise ValueError("tau_init must be in (0, 1)")


@dataclass(frozen=True)
class BootstrapConfig:
    """Parametric bootstrap settings."""

    n_boot: int = 1000
    seed: int = 0
    alpha_level: float = 0.05

    def __post_init__(self):
        if self.n_boot < 1:
            raise ValueError("n_boot must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if not 0.0 < self.alpha_level < 1.0:
            raise ValueError("alpha_level must be in (0, 1)")


@dataclass(frozen=True)
class AldFit:
    """Result of the iterative ALD maximum-likelihood fit."""

    params: AldParams
    loglik_trace: tuple[float, ...]
    iterations: int
    converged: bool
    std_residuals: np.ndarray


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with uncertainty and method-specific extras."""

    method: str
    theta_hat: float
    se: float
    ci_low: float
    ci_high: float
    alpha_level: float
    n_instruments: int
    rr_scale: dict | None = None
    extras: dict = field(default_factory=dict)


def _rr_scale(outcome_type: str, theta: float, ci_low: float, ci_high: float) -> dict | None:
    if outcome_type != "binary_rare":
        return None
    return {
        "rr": math.exp(theta),
        "rr_ci_low": math.exp(ci_low),
        "rr_ci_high": math.exp(ci_high),
    }


def _zcrit(alpha_level: float) -> float:
    return float(norm.ppf(1.0 - alpha_level / 2.0))


def _fit_wqr_arrays(
    r: np.ndarray, w: np.ndarray, cfg: SolverConfig
) -> tuple[float, float, float, list[float], int, bool]:
    """Coordinate ascent on the ALD likelihood over (theta, lam, tau).

    Sorting is done once; each cycle costs O(log p) via prefix sums. Returns
    (theta, tau, lam, trace, iterations, converged).
    """
    p = r.size
    if p == 0:
        raise EmptyInputError("no instruments")
    order = np.argsort(r, kind="stable")
    rs = r[order]
    cw = np.cumsum(w[order])
    cwr = np.cumsum(w[order] * rs)
    w_tot = cw[-1]
    wr_tot = cwr[-1]
    sum_log_w = float(np.sum(np.log(w)))
    floor = LOSS_FLOOR * p * (w_tot / p)

    tau = cfg.tau_init
    trace: list[float] = []
    prev: tuple[float, float, float] | None = None
    converged = False
    iterations = 0
    while iterations < cfg.max_iter:
        iterations += 1
        # Location: weighted tau-quantile (smallest value whose cumulative
        # weight reaches tau * total).
        k = min(int(np.searchsorted(cw, tau * w_tot, side="left")), p - 1)
        theta = float(rs[k])
        # Weighted residual mass strictly above / below theta.
        lo = int(np.searchsorted(rs, theta, side="left"))
        hi = int(np.searchsorted(rs, theta, side="right"))
        w_lo = cw[lo - 1] if lo > 0 else 0.0
        wr_lo = cwr[lo - 1] if lo > 0 else 0.0
        w_hi = cw[hi - 1] if hi > 0 else 0.0
        wr_hi = cwr[hi - 1] if hi > 0 else 0.0
        above = max((wr_tot - wr_hi) - theta * (w_tot - w_hi), 0.0)
        below = max(theta * w_lo - wr_lo, 0.0)
        # Inverse scale at the current tau.
        loss = tau * above + (1.0 - tau) * below
        if loss < floor:
            raise DegenerateFitError(
                f"weighted check-loss sum {loss:.3e} below floor {floor:.3e}"
            )
        lam = p / loss
        # Skewness given the new location and inverse scale.
        tau = tau_root(lam * (above - below), p)
        ll = (
            sum_log_w
            + p * math.log(lam * tau * (1.0 - tau))
            - lam * (tau * above + (1.0 - tau) * below)
        )
        trace.append(ll)
        if prev is not None and len(trace) >= 2 and abs(trace[-1] - trace[-2]) < cfg.tol:
            th0, lm0, ta0 = prev
            if (
                theta == th0
                and abs(lam - lm0) <= PARAM_STABILITY * abs(lm0)
                and abs(tau - ta0) <= PARAM_STABILITY * ta0
            ):
                converged = True
                break
        prev = (theta, lam, tau)
    return theta, tau, lam, trace, iterations, converged


def fit_mr_quantile(rs: RatioSet, cfg: SolverConfig | None = None) -> AldFit:
    """Iterative maximum-likelihood fit of (theta, lam, tau), weighting each
    ratio by the inverse of its standard error.

    Iteration stops when the log-likelihood change drops below ``cfg.tol``
    and the parameter triple has stabilized, or at ``cfg.max_iter`` (in which
    case ``converged`` is False rather than an error).

    Raises
    ------
    DegenerateFitError
        When the weighted residual loss collapses to zero, e.g. with a single
        instrument or all ratios identical.
    """
    cfg = cfg or SolverConfig()
    r = np.asarray(rs.ratio, dtype=float)
    w = quantile_weights(rs)
    theta, tau, lam, trace, iterations, converged = _fit_wqr_arrays(r, w, cfg)
    params = AldParams(theta=theta, tau=tau, lam=lam)
    residuals = w * lam * (r - theta)
    return AldFit(
        params=params,
        loglik_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        std_residuals=residuals,
    )


def fit_ivw(rs: RatioSet, alpha_level: float = 0.05) -> EstimateReport:
    """Inverse-variance-weighted mean of the ratios.

    Equivalent to the fixed-effect weighted regression of the outcome betas
    on the exposure betas through the origin with weights ``1 / se_y**2``.
    """
    if len(rs.ratio) == 0:
        raise EmptyInputError("no instruments")
    recs = rs.source.records
    bx = np.array([rec.beta_x for rec in recs], dtype=float)
    by = np.array([rec.beta_y for rec in recs], dtype=float)
    sy = np.array([rec.se_y for rec in recs], dtype=float)
    wy = bx * bx / (sy * sy)
    theta = float(np.sum(wy * (by / bx)) / np.sum(wy))
    se = float(1.0 / math.sqrt(np.sum(wy)))
    z = _zcrit(alpha_level)
    ci_low, ci_high = theta - z * se, theta + z * se
    return EstimateReport(
        method="ivw",
        theta_hat=theta,
        se=se,
        ci_low=ci_low,
        ci_high=ci_high,
        alpha_level=alpha_level,
        n_instruments=len(recs),
        rr_scale=_rr_scale(rs.source.outcome_type, theta, ci_low, ci_high),
    )


def fit_egger(data: HarmonizedSet, alpha_level: float = 0.05) -> EstimateReport:
    """Weighted linear regression of outcome betas on exposure betas with an
    unconstrained intercept, after orienting all instruments to a nonnegative
    exposure effect. The slope estimates the causal effect; the intercept
    captures directional pleiotropy.
    """
    if len(data.records) < 3:
        raise TooFewInstrumentsError(
            f"egger needs >= 3 instruments, got {len(data.records)}"
        )
    bx = np.array([rec.beta_x for rec in data.records], dtype=float)
    by = np.array([rec.beta_y for rec in data.records], dtype=float)
    sy = np.array([rec.se_y for rec in data.records], dtype=float)
    flip = bx < 0
    bx = np.where(flip, -bx, bx)
    by = np.where(flip, -by, by)
    w = 1.0 / (sy * sy)

    design = np.column_stack([np.ones_like(bx), bx])
    xtwx = design.T @ (design * w[:, None])
    xtwy = design.T @ (w * by)
    coef = np.linalg.solve(xtwx, xtwy)
    resid = by - design @ coef
    dof = len(bx) - 2
    sigma2 = float(np.sum(w * resid * resid) / dof) if dof > 0 else float("nan")
    cov = sigma2 * np.linalg.inv(xtwx)
    intercept, slope = float(coef[0]), float(coef[1])
    se_slope = float(math.sqrt(cov[1, 1]))
    se_intercept = float(math.sqrt(cov[0, 0]))
    z = _zcrit(alpha_level)
    ci_low, ci_high = slope - z * se_slope, slope + z * se_slope
    return EstimateReport(
        method="egger",
        theta_hat=slope,
        se=se_slope,
        ci_low=ci_low,
        ci_high=ci_high,
        alpha_level=alpha_level,
        n_instruments=len(bx),
        rr_scale=_rr_scale(data.outcome_type, slope, ci_low, ci_high),
        extras={"intercept": intercept, "intercept_se": se_intercept},
    )


def _refit_theta(
    bx: np.ndarray,
    by: np.ndarray,
    sx: np.ndarray,
    sy: np.ndarray,
    method: str,
    cfg: SolverConfig,
    min_abs_beta_x: float,
) -> float:
    """Recompute ratios, weights, and the point estimate from raw betas."""
    with np.errstate(divide="ignore", invalid="ignore"):
        var = ratio_variance(bx, sx, by, sy)
    keep = (np.abs(bx) > min_abs_beta_x) & np.isfinite(var) & (var >= 1e-30)
    if not keep.any():
        raise AllInstrumentsDroppedError("all instruments dropped in replicate")
    r = by[keep] / bx[keep]
    var = var[keep]
    if method == "mr_quantile":
        w = 1.0 / np.sqrt(var)
        theta, _, _, _, _, _ = _fit_wqr_arrays(r, w, cfg)
        return theta
    return weighted_quantile(r, 1.0 / var, 0.5)


def bootstrap_se(
    data: HarmonizedSet,
    method: str,
    cfg: SolverConfig | None = None,
    boot: BootstrapConfig | None = None,
    *,
    ci_method: str = "normal",
    min_abs_beta_x: float = 0.0,
) -> EstimateReport:
    """Parametric-bootstrap standard error for the quantile-based estimators.

    Each replicate ``b`` redraws every instrument's betas from normals
    centered at the observed values with the reported standard errors (its
    RNG stream is keyed by ``(seed, b)``, so results do not depend on
    execution order), then recomputes ratios, weights, and the full fit. The
    SE is the sample standard deviation of the replicate estimates; the CI is
    normal-theory around the original-data estimate unless
    ``ci_method="percentile"``.

    Raises
    ------
    TooManyFailedReplicatesError
        When 5% or more of the replicates fail to fit.
    TooFewBootstrapReplicatesError
        When ``boot.n_boot < 2``.
    """
    if method not in BOOTSTRAP_METHODS:
        raise ValueError(f"method must be one of {BOOTSTRAP_METHODS}, got {method!r}")
    if ci_method not in ("normal", "percentile"):
        raise ValueError(f"unknown ci_method: {ci_method!r}")
    cfg = cfg or SolverConfig()
    boot = boot or BootstrapConfig()
    if boot.n_boot < 2:
        raise TooFewBootstrapReplicatesError("bootstrap SE needs n_boot >= 2")

    rs = compute_ratios(data, min_abs_beta_x)
    extras: dict = {}
    if method == "mr_quantile":
        fit = fit_mr_quantile(rs, cfg)
        theta = fit.params.theta
        extras = {
            "tau_hat": fit.params.tau,
            "lambda_hat": fit.params.lam,
            "converged": fit.converged,
            "iterations": fit.iterations,
        }
    else:
        theta = weighted_quantile(rs.ratio, 1.0 / rs.var_ratio, 0.5)

    bx0 = np.array([rec.beta_x for rec in data.records], dtype=float)
    by0 = np.array([rec.beta_y for rec in data.records], dtype=float)
    sx0 = np.array([rec.se_x for rec in data.records], dtype=float)
    sy0 = np.array([rec.se_y for rec in data.records], dtype=float)

    estimates = np.empty(boot.n_boot)
    n_ok = 0
    n_failed = 0
    for b in range(boot.n_boot):
        rng = np.random.default_rng([boot.seed, b])
        by = rng.normal(by0, sy0)
        bx = rng.normal(bx0, sx0)
        try:
            estimates[n_ok] = _refit_theta(bx, by, sx0, sy0, method, cfg, min_abs_beta_x)
        except MrQuantileError:
            n_failed += 1
            continue
        n_ok += 1
    if n_failed >= _MAX_FAILED_FRACTION * boot.n_boot:
        raise TooManyFailedReplicatesError(
            f"{n_failed} of {boot.n_boot} bootstrap replicates failed"
        )
    sample = estimates[:n_ok]
    se = float(np.std(sample, ddof=1))
    if ci_method == "percentile":
        ci_low, ci_high = (
            float(np.quantile(sample, boot.alpha_level / 2.0)),
            float(np.quantile(sample, 1.0 - boot.alpha_level / 2.0)),
        )
    else:
        z = _zcrit(boot.alpha_level)
        ci_low, ci_high = theta - z * se, theta + z * se
    extras["n_boot_failed"] = n_failed
    return EstimateReport(
        method=method,
        theta_hat=theta,
        se=se,
        ci_low=ci_low,
        ci_high=ci_high,
        alpha_level=boot.alpha_level,
        n_instruments=len(rs.ratio),
        rr_scale=_rr_scale(data.outcome_type, theta, ci_low, ci_high),
        extras=extras,
    )


def fit_weighted_median(rs: RatioSet, boot: BootstrapConfig | None = None) -> EstimateReport:
    """Weighted median of the ratios (inverse-variance weights) with a
    parametric-bootstrap standard error."""
    if len(rs.ratio) == 0:
        raise EmptyInputError("no instruments")
    return bootstrap_se(rs.source, "weighted_median", boot=boot)
