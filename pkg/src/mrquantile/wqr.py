"""Weighted quantile regression and asymmetric Laplace likelihood machinery.

The location problem ``argmin_theta sum_i w_i rho_tau(r_i - theta)`` is solved
exactly by a sorted cumulative-weight scan: the weighted tau-quantile is the
smallest sample value whose cumulative weight reaches ``tau`` times the total.
The same check loss appears in the asymmetric Laplace (ALD) log-density
``log(w * lam) + log(tau * (1 - tau)) - w * lam * rho_tau(r - theta)``, whose
exact coordinate-wise maximizers in ``lam`` and ``tau`` are closed-form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, EmptyInputError, NonPositiveWeightError

# Defensive clamp for the skewness update; the closed form already lands
# strictly inside (0, 1) but downstream log(tau * (1 - tau)) must stay finite.
TAU_CLAMP = 1e-6

# Scale-aware floor under the weighted check-loss sum, below which the
# inverse-scale update diverges.
LOSS_FLOOR = 1e-12


@dataclass(frozen=True)
class AldParams:
    """Asymmetric Laplace parameters: location, skewness, inverse scale."""

    theta: float
    tau: float
    lam: float

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if not self.lam > 0.0:
            raise ValueError(f"lam must be > 0, got {self.lam}")


def check_loss(u, tau: float):
    """Check loss: ``tau * u`` for ``u >= 0``, ``(tau - 1) * u`` for ``u < 0``.

    Accepts scalars or arrays; nonnegative everywhere and zero only at zero.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 0, tau * u, (tau - 1.0) * u)
    return float(out) if out.ndim == 0 else out


def _validate_pair(values, weights) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.size == 0:
        raise EmptyInputError("empty value vector")
    if v.shape != w.shape:
        raise ValueError(f"length mismatch: {v.shape} values vs {w.shape} weights")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if not np.all(np.isfinite(w) & (w > 0)):
        raise NonPositiveWeightError("weights must be finite and > 0")
    return v, w


def weighted_quantile(values, weights, tau: float) -> float:
    """Weighted tau-quantile: the smallest value whose cumulative weight
    (over values less than or equal to it, in sorted order) reaches
    ``tau`` times the total weight.

    This is an exact minimizer of ``sum_i w_i rho_tau(values_i - theta)``.
    Ties between equal values are resolved by input order, which never
    changes the returned value.
    """
    v, w = _validate_pair(values, weights)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    order = np.argsort(v, kind="stable")
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, tau * cw[-1], side="left"))
    return float(v[order[min(k, v.size - 1)]])


def ald_logpdf(r: float, params: AldParams, w: float = 1.0) -> float:
    """Log-density of the ALD with per-observation inverse scale ``w * lam``."""
    if not w > 0:
        raise NonPositiveWeightError(f"w must be > 0, got {w}")
    lam_i = w * params.lam
    return (
        math.log(lam_i)
        + math.log(params.tau * (1.0 - params.tau))
        - lam_i * check_loss(r - params.theta, params.tau)
    )


def log_likelihood(ratios, weights, params: AldParams) -> float:
    """ALD log-likelihood of the ratio vector under weights ``w_i``:

    ``sum log w_i + p * log(lam * tau * (1 - tau)) - lam * sum w_i *
    rho_tau(r_i - theta)``.
    """
    r, w = _validate_pair(ratios, weights)
    p = r.size
    loss = float(np.sum(w * check_loss(r - params.theta, params.tau)))
    return (
        float(np.sum(np.log(w)))
        + p * math.log(params.lam * params.tau * (1.0 - params.tau))
        - params.lam * loss
    )


def update_lambda(ratios, weights, theta: float, tau: float) -> float:
    """Exact conditional maximizer of the ALD likelihood in the inverse scale:
    the number of instruments divided by the weighted check-loss sum.

    Raises
    ------
    DegenerateFitError
        When the loss sum falls below the scale-aware floor (all residuals
        essentially zero), signalling a diverging inverse scale.
    """
    r, w = _validate_pair(ratios, weights)
    p = r.size
    loss = float(np.sum(w * check_loss(r - theta, tau)))
    floor = LOSS_FLOOR * p * float(np.mean(w))
    if loss < floor:
        raise DegenerateFitError(
            f"weighted check-loss sum {loss:.3e} below floor {floor:.3e}"
        )
    return p / loss


def tau_root(a: float, p: int) -> float:
    """Valid root of ``a * tau**2 - tau * (2p + a) + p = 0`` in (0, 1).

    Uses the conjugate form ``0.5 - a / (2 * (2p + hypot(a, 2p)))``, which is
    continuous in ``a`` and evaluates to exactly 0.5 at ``a = 0``.
    """
    tau = 0.5 - a / (2.0 * (2.0 * p + math.hypot(a, 2.0 * p)))
    return min(max(tau, TAU_CLAMP), 1.0 - TAU_CLAMP)


def update_tau(ratios, weights, theta: float, lam: float) -> float:
    """Exact conditional maximizer of the ALD likelihood in the skewness,
    given location and inverse scale.

    The result is strictly inside (0, 1); its deviation from 0.5 has the
    opposite sign of the weighted mean residual.
    """
    r, w = _validate_pair(ratios, weights)
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    a = lam * float(np.sum(w * (r - theta)))
    return tau_root(a, r.size)
