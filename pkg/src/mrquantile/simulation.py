"""Monte Carlo study designs and the replication harness.

Two designs are provided. The strong-pleiotropy design simulates
individual-level data for two independent samples and derives per-variant
marginal regression summary statistics; invalid variants carry large direct
(and optionally confounder-mediated) effects. The weak-invalid-IV design
draws summary statistics directly from normal distributions, with pleiotropic
effect sizes scaled by per-variant heritability fractions.

Every random draw is keyed by (seed, replicate, variant) so that replicates
and variants can be generated in any order, or in parallel, with identical
results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import MrQuantileError
from .estimators import (
    BootstrapConfig,
    EstimateReport,
    SolverConfig,
    bootstrap_se,
    fit_egger,
    fit_ivw,
)
from .ratios import compute_ratios
from .summary_data import HarmonizedSet, InstrumentRecord, Provenance

SCENARIOS = ("no_pleiotropy", "uncorrelated", "correlated")

# Sub-stream tags for replicate-level draws, kept clear of variant indices.
_REP_STREAM = 0x5EED
_BOOT_STREAM = 0xB007


@dataclass(frozen=True)
class StrongSimConfig:
    """Individual-level design with strong pleiotropic effects.

    A fraction ``q`` of variants is invalid: under ``uncorrelated`` they get
    direct outcome effects drawn from Uniform(0.2, 0.3); under ``correlated``
    they additionally act on the confounder with effects from
    Uniform(-0.1, 0.1). Genotypes are Binomial(2, maf) with maf from
    Uniform(0.1, 0.3); variant-exposure effects are Uniform(0.1, 0.2) or
    Uniform(-0.2, -0.1) with equal probability.
    """

    n: int = 50_000
    p: int = 30
    scenario: str = "no_pleiotropy"
    q: float = 0.0
    theta0: float = 0.0
    beta_xu: float = 1.0
    beta_yu: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not 0.0 <= self.q < 1.0:
            raise ValueError("q must be in [0, 1)")
        if (self.q == 0.0) != (self.scenario == "no_pleiotropy"):
            raise ValueError("q must be 0 exactly when scenario is no_pleiotropy")
        if self.n < 3 or self.p < 1:
            raise ValueError("need n >= 3 and p >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def m(self) -> int:
        """Number of invalid instruments, round(q * p)."""
        return int(round(self.q * self.p))


@dataclass(frozen=True)
class WeakSimConfig:
    """Summary-level design with weak pleiotropic effects.

    The first ``m`` variants are invalid. Direct outcome effects have
    variance ``h_y2 / p``, confounder effects ``h_u2 / p``, and
    variant-exposure effects ``h_x2 / p``; summary statistics are drawn with
    standard errors ``1 / sqrt(n)`` on both sides.
    """

    n: int = 50_000
    p: int = 50
    m: int = 30
    h_y2: float = 0.2
    h_u2: float = 0.0
    h_x2: float = 0.5
    theta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.m <= self.p:
            raise ValueError("need 0 <= m <= p")
        if min(self.h_y2, self.h_u2, self.h_x2) < 0:
            raise ValueError("heritability fractions must be >= 0")
        if self.n < 1 or self.p < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class ReplicateRecord:
    """One (replicate, method) outcome row."""

    rep: int
    method: str
    theta_hat: float | None
    se: float | None
    reject: bool | None
    converged: bool | None
    error: str | None = None


@dataclass(frozen=True)
class MethodAggregate:
    """Per-method performance metrics over successful replicates.

    bias, sd, and rmse use the population convention (divide by the number of
    replicates), so rmse**2 = bias**2 + sd**2.
    """

    method: str
    n_fit: int
    n_failed: int
    bias: float
    sd: float
    rmse: float
    rejection_rate: float


@dataclass(frozen=True)
class SimulationResult:
    design: dict
    n_replicates: int
    theta_true: float
    per_replicate: tuple[ReplicateRecord, ...]
    aggregates: dict[str, MethodAggregate]
    moment_convention: str = "population (divide by R)"
    extra: dict = field(default_factory=dict)


def _strong_effects(cfg: StrongSimConfig, rep_index: int):
    """Per-variant draws for one replicate of the strong design.

    Returns (maf, gamma, alpha, phi, invalid_mask); alpha and phi are already
    masked to the invalid set and scenario.
    """
    p = cfg.p
    maf = np.empty(p)
    gamma = np.empty(p)
    alpha_raw = np.empty(p)
    phi_raw = np.empty(p)
    for i in range(p):
        rng = np.random.default_rng([cfg.seed, rep_index, i])
        maf[i] = rng.uniform(0.1, 0.3)
        if rng.random() < 0.5:
            gamma[i] = rng.uniform(0.1, 0.2)
        else:
            gamma[i] = rng.uniform(-0.2, -0.1)
        alpha_raw[i] = rng.uniform(0.2, 0.3)
        phi_raw[i] = rng.uniform(-0.1, 0.1)

    rep_rng = np.random.default_rng([cfg.seed, rep_index, _REP_STREAM])
    invalid = np.zeros(p, dtype=bool)
    if cfg.m > 0:
        invalid[rep_rng.choice(p, size=cfg.m, replace=False)] = True
    alpha = np.where(invalid & (cfg.scenario != "no_pleiotropy"), alpha_raw, 0.0)
    phi = np.where(invalid & (cfg.scenario == "correlated"), phi_raw, 0.0)
    return maf, gamma, alpha, phi, invalid, rep_rng


def _genotypes(cfg: StrongSimConfig, rep_index: int, maf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Binomial(2, maf) genotype matrices for the two independent samples.

    Each variant's genotypes come from their own sub-stream, keyed separately
    from its effect draws.
    """
    g1 = np.empty((cfg.n, cfg.p))
    g2 = np.empty((cfg.n, cfg.p))
    for i in range(cfg.p):
        rng = np.random.default_rng([cfg.seed, rep_index, i, 1])
        g1[:, i] = rng.binomial(2, maf[i], size=cfg.n)
        g2[:, i] = rng.binomial(2, maf[i], size=cfg.n)
    return g1, g2


def marginal_regressions(g: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column simple linear regression of ``y`` on each genotype.

    Variables are mean-centered; the slope standard error uses the usual
    residual-variance formula with n - 2 degrees of freedom.
    """
    n = g.shape[0]
    gc = g - g.mean(axis=0)
    yc = y - y.mean()
    sgg = np.einsum("ij,ij->j", gc, gc)
    sgy = gc.T @ yc
    beta = sgy / sgg
    syy = float(yc @ yc)
    rss = np.maximum(syy - beta * sgy, 0.0)
    se = np.sqrt(rss / (n - 2) / sgg)
    return beta, se


def _records(beta_x, se_x, beta_y, se_y, tag: str) -> HarmonizedSet:
    records = tuple(
        InstrumentRecord(f"snp{i:04d}", float(beta_x[i]), float(se_x[i]), float(beta_y[i]), float(se_y[i]))
        for i in range(len(beta_x))
    )
    provenance = Provenance(
        exposure_path=tag, outcome_path=tag, pval_threshold=1.0,
        n_exposure_pass=len(records), retained=len(records),
    )
    return HarmonizedSet(records, "continuous", provenance)


def generate_strong(cfg: StrongSimConfig, rep_index: int) -> HarmonizedSet:
    """Simulate one replicate of the strong-pleiotropy design.

    Two independent samples of size ``n`` are generated from the structural
    model; sample 1 provides the variant-outcome marginal regressions and
    sample 2 the variant-exposure ones.
    """
    maf, gamma, alpha, phi, _, rep_rng = _strong_effects(cfg, rep_index)
    g1, g2 = _genotypes(cfg, rep_index, maf)

    e_u1 = rep_rng.standard_normal(cfg.n)
    e_x1 = rep_rng.standard_normal(cfg.n)
    e_y1 = rep_rng.standard_normal(cfg.n)
    e_u2 = rep_rng.standard_normal(cfg.n)
    e_x2 = rep_rng.standard_normal(cfg.n)

    u1 = g1 @ phi + e_u1
    x1 = g1 @ gamma + cfg.beta_xu * u1 + e_x1
    y1 = cfg.theta0 * x1 + g1 @ alpha + cfg.beta_yu * u1 + e_y1
    u2 = g2 @ phi + e_u2
    x2 = g2 @ gamma + cfg.beta_xu * u2 + e_x2

    beta_y, se_y = marginal_regressions(g1, y1)
    beta_x, se_x = marginal_regressions(g2, x2)
    return _records(beta_x, se_x, beta_y, se_y, "simulated:strong")


def generate_weak(cfg: WeakSimConfig, rep_index: int) -> HarmonizedSet:
    """Simulate one replicate of the weak-invalid-IV summary-level design."""
    p = cfg.p
    sd_x = np.sqrt(cfg.h_x2 / p)
    sd_y = np.sqrt(cfg.h_y2 / p)
    sd_u = np.sqrt(cfg.h_u2 / p)
    se = 1.0 / np.sqrt(cfg.n)

    beta_x = np.empty(p)
    beta_y = np.empty(p)
    for i in range(p):
        rng = np.random.default_rng([cfg.seed, rep_index, i])
        gamma = rng.normal(0.0, sd_x)
        alpha = rng.normal(0.0, sd_y) if i < cfg.m else 0.0
        phi = rng.normal(0.0, sd_u) if i < cfg.m else 0.0
        beta_x[i] = rng.normal(gamma + phi, se)
        beta_y[i] = rng.normal(cfg.theta * (gamma + phi) + alpha + phi, se)
    se_vec = np.full(p, se)
    return _records(beta_x, se_vec, beta_y, se_vec, "simulated:weak")


def _fit_one(
    data: HarmonizedSet,
    method: str,
    solver: SolverConfig,
    boot: BootstrapConfig,
) -> EstimateReport:
    if method == "ivw":
        return fit_ivw(compute_ratios(data), alpha_level=boot.alpha_level)
    if method == "egger":
        return fit_egger(data, alpha_level=boot.alpha_level)
    return bootstrap_se(data, method, solver, boot)


def _replicate_boot_seed(seed: int, rep_index: int) -> int:
    ss = np.random.SeedSequence([seed, rep_index, _BOOT_STREAM])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_study(
    design: StrongSimConfig | WeakSimConfig,
    methods: Iterable[str] = ("mr_quantile", "ivw"),
    R: int = 100,
    boot: BootstrapConfig | None = None,
    solver: SolverConfig | None = None,
    threads: int = 1,
) -> SimulationResult:
    """Run ``R`` replicates of a design, fitting each requested method.

    Each replicate records the point estimate, its SE, and whether the
    two-sided test of a zero effect rejects at the bootstrap config's alpha
    level (the method's CI excludes zero). Failed fits are recorded with
    their error and excluded from the aggregates. Results are identical for
    any thread count because every random stream is keyed by replicate index.
    """
    if R < 2:
        raise ValueError("R must be >= 2")
    methods = tuple(methods)
    boot = boot or BootstrapConfig()
    solver = solver or SolverConfig()
    is_strong = isinstance(design, StrongSimConfig)
    generate = generate_strong if is_strong else generate_weak
    theta_true = design.theta0 if is_strong else design.theta

    def one_replicate(rep: int) -> list[ReplicateRecord]:
        data = generate(design, rep)
        rep_boot = BootstrapConfig(
            n_boot=boot.n_boot,
            seed=_replicate_boot_seed(boot.seed, rep),
            alpha_level=boot.alpha_level,
        )
        rows: list[ReplicateRecord] = []
        for method in methods:
            try:
                report = _fit_one(data, method, solver, rep_boot)
            except MrQuantileError as exc:
                rows.append(ReplicateRecord(rep, method, None, None, None, None,
                                            f"{type(exc).__name__}: {exc}"))
                continue
            reject = report.ci_low > 0.0 or report.ci_high < 0.0
            rows.append(ReplicateRecord(
                rep, method, report.theta_hat, report.se, reject,
                bool(report.extras.get("converged", True)),
            ))
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(one_replicate, range(R)))
    else:
        per_rep = [one_replicate(rep) for rep in range(R)]
    records = tuple(row for rows in per_rep for row in rows)

    aggregates: dict[str, MethodAggregate] = {}
    for method in methods:
        thetas = np.array([r.theta_hat for r in records
                           if r.method == method and r.error is None])
        rejects = np.array([r.reject for r in records
                            if r.method == method and r.error is None], dtype=bool)
        n_failed = sum(1 for r in records if r.method == method and r.error is not None)
        if thetas.size:
            bias = float(np.mean(thetas) - theta_true)
            sd = float(np.std(thetas))
            rmse = float(np.sqrt(np.mean((thetas - theta_true) ** 2)))
            rate = float(np.mean(rejects))
        else:
            bias = sd = rmse = rate = float("nan")
        aggregates[method] = MethodAggregate(
            method=method, n_fit=int(thetas.size), n_failed=n_failed,
            bias=bias, sd=sd, rmse=rmse, rejection_rate=rate,
        )

    design_echo = {"design": "strong" if is_strong else "weak"}
    design_echo.update({k: getattr(design, k) for k in design.__dataclass_fields__})
    return SimulationResult(
        design=design_echo,
        n_replicates=R,
        theta_true=theta_true,
        per_replicate=records,
        aggregates=aggregates,
        extra={"n_boot": boot.n_boot, "boot_seed": boot.seed,
               "alpha_level": boot.alpha_level},
    )
