"""Wald ratios, their delta-method variances, and instrument weights.

For each variant the ratio ``beta_y / beta_x`` estimates the causal effect,
with first-order variance ``se_y**2 / beta_x**2 + beta_y**2 * se_x**2 /
beta_x**4`` (the covariance term is zero for two independent GWAS). The
quantile machinery weights ratios by inverse standard error; the weighted
median baseline uses inverse variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllInstrumentsDroppedError
from .summary_data import HarmonizedSet, subset

# Variances below this are treated as degenerate to keep weights finite.
VAR_FLOOR = 1e-30


@dataclass(frozen=True)
class RatioSet:
    """Per-variant ratio estimates aligned with their source records."""

    ratio: np.ndarray
    var_ratio: np.ndarray
    snp_ids: tuple[str, ...]
    source: HarmonizedSet
    n_dropped: int = 0


def ratio_variance(
    beta_x: np.ndarray, se_x: np.ndarray, beta_y: np.ndarray, se_y: np.ndarray
) -> np.ndarray:
    """Delta-method variance of ``beta_y / beta_x`` for independent samples."""
    bx2 = beta_x * beta_x
    return se_y * se_y / bx2 + beta_y * beta_y * se_x * se_x / (bx2 * bx2)


def compute_ratios(data: HarmonizedSet, min_abs_beta_x: float = 0.0) -> RatioSet:
    """Build the ratio estimates for a harmonized set.

    Records with ``abs(beta_x) <= min_abs_beta_x`` or a non-finite or
    degenerate ratio variance are dropped and counted in ``n_dropped``.

    Raises
    ------
    AllInstrumentsDroppedError
        When no record survives the filters.
    """
    if min_abs_beta_x < 0:
        raise ValueError("min_abs_beta_x must be >= 0")
    beta_x = np.array([rec.beta_x for rec in data.records], dtype=float)
    se_x = np.array([rec.se_x for rec in data.records], dtype=float)
    beta_y = np.array([rec.beta_y for rec in data.records], dtype=float)
    se_y = np.array([rec.se_y for rec in data.records], dtype=float)

    with np.errstate(divide="ignore", invalid="ignore"):
        var = ratio_variance(beta_x, se_x, beta_y, se_y)
    keep = (np.abs(beta_x) > min_abs_beta_x) & np.isfinite(var) & (var >= VAR_FLOOR)
    n_dropped = int(len(keep) - keep.sum())
    if not keep.any():
        raise AllInstrumentsDroppedError(
            f"all {len(keep)} instruments dropped (threshold {min_abs_beta_x}, "
            f"variance floor {VAR_FLOOR})"
        )

    idx = np.flatnonzero(keep)
    source = subset(data, idx) if n_dropped else data
    return RatioSet(
        ratio=beta_y[idx] / beta_x[idx],
        var_ratio=var[idx],
        snp_ids=tuple(data.records[i].snp_id for i in idx),
        source=source,
        n_dropped=n_dropped,
    )


def quantile_weights(rs: RatioSet) -> np.ndarray:
    """Inverse-standard-error weights, ``1 / sqrt(var_ratio)``."""
    return 1.0 / np.sqrt(rs.var_ratio)


def median_weights(rs: RatioSet) -> np.ndarray:
    """Inverse-variance weights, ``1 / var_ratio``."""
    return 1.0 / rs.var_ratio
