"""Combining rules for multiply imputed estimates.

Two rule sets are provided:

* ``conventional`` -- Rubin's rules for an infinite population, with the
  Barnard-Rubin small-sample degrees of freedom.
* ``simplified`` -- the finite-population variant. When every unit of the
  population is recorded there is no sampling variance, so the within
  variance drops out: ``T = (1 + 1/m) B``, ``r = inf`` and ``nu = m - 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .data import RepeatedEstimates
from .mathkit import t_quantile


class Rule(str, enum.Enum):
    CONVENTIONAL = "conventional"
    SIMPLIFIED = "simplified"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PooledResult:
    q_bar: float
    u_bar: float
    b: float
    t: float
    r: float
    nu: float
    fmi: float
    ci_low: float
    ci_high: float
    rule: Rule
    level: float = 0.95
    m: int = 0
    degenerate: bool = False

    @property
    def ci_width(self) -> float:
        return self.ci_high - self.ci_low

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def _check_m(m: int) -> None:
    if m < 2:
        raise ValueError(f"pooling needs m >= 2 imputations, got {m}")


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise ValueError(f"interval level must lie in (0, 1), got {level}")


def _mean(x: np.ndarray) -> float:
    # centred on the first element so identical inputs pool to that exact value
    x0 = x[0]
    return float(x0 + (x - x0).sum() / x.size)


def _between(q: np.ndarray, q_bar: float) -> float:
    d = q - q_bar
    return float(d @ d) / (q.size - 1)


def _interval(q_bar: float, t: float, nu: float, level: float) -> tuple[float, float]:
    if t == 0.0:
        return q_bar, q_bar
    half = t_quantile((1.0 + level) / 2.0, nu) * math.sqrt(t)
    return q_bar - half, q_bar + half


def barnard_rubin_df(m: int, r: float, fmi_lambda: float, nu_com: float) -> float:
    """Small-sample degrees of freedom (Barnard & Rubin, 1999).

    Harmonic combination of the large-sample ``(m-1)(1 + 1/r)^2`` and the
    observed-data ``nu_com (nu_com+1)/(nu_com+3) (1 - lambda)``.
    """
    _check_m(m)
    if not nu_com > 0:
        raise ValueError(f"complete-data degrees of freedom must be positive, got {nu_com}")
    if r < 0:
        raise ValueError(f"r must be non-negative, got {r}")
    if not 0.0 <= fmi_lambda <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {fmi_lambda}")
    nu_old = math.inf if r < 1e-150 else (m - 1) * (1.0 + 1.0 / r) ** 2
    if math.isinf(nu_com):
        return nu_old
    nu_obs = nu_com * (nu_com + 1.0) / (nu_com + 3.0) * (1.0 - fmi_lambda)
    if nu_obs == 0.0:
        # lambda == 1: no within variance left; the large-sample df is the only information
        return nu_old
    if math.isinf(nu_old):
        return nu_obs
    return 1.0 / (1.0 / nu_old + 1.0 / nu_obs)


def adjusted_fmi(r: float, nu: float) -> float:
    if math.isinf(r):
        return 1.0
    return (r + 2.0 / (nu + 3.0)) / (r + 1.0)


def pool_conventional(est: RepeatedEstimates, nu_com: float, level: float = 0.95) -> PooledResult:
    if est.is_vector:
        raise ValueError("use pool_vector for vector-valued estimates")
    m = est.m
    _check_m(m)
    _check_level(level)
    if not nu_com > 0:
        raise ValueError(f"complete-data degrees of freedom must be positive, got {nu_com}")
    q = est.q_hats
    q_bar = _mean(q)
    u_bar = float(est.u_bars.sum() / m)
    b = _between(q, q_bar)
    inflated_b = (1.0 + 1.0 / m) * b
    t = u_bar + inflated_b
    if u_bar > 0:
        r = inflated_b / u_bar
    else:
        r = math.inf if b > 0 else 0.0
    lam = inflated_b / t if t > 0 else 0.0
    nu = barnard_rubin_df(m, r, lam, nu_com)
    lo, hi = _interval(q_bar, t, nu, level)
    return PooledResult(q_bar, u_bar, b, t, r, nu, adjusted_fmi(r, nu), lo, hi,
                        Rule.CONVENTIONAL, level, m, degenerate=t == 0.0)


def pool_simplified(est: RepeatedEstimates, level: float = 0.95) -> PooledResult:
    """Finite-population pooling: the within variance is ignored entirely."""
    if est.is_vector:
        raise ValueError("use pool_vector for vector-valued estimates")
    m = est.m
    _check_m(m)
    _check_level(level)
    q = est.q_hats
    q_bar = _mean(q)
    b = _between(q, q_bar)
    t = (1.0 + 1.0 / m) * b
    nu = float(m - 1)
    lo, hi = _interval(q_bar, t, nu, level)
    return PooledResult(q_bar, 0.0, b, t, math.inf, nu, 1.0, lo, hi,
                        Rule.SIMPLIFIED, level, m, degenerate=t == 0.0)


def pool(est: RepeatedEstimates, rule: Rule | str, nu_com: float = math.inf,
         level: float = 0.95) -> PooledResult:
    rule = Rule(rule)
    if rule is Rule.SIMPLIFIED:
        return pool_simplified(est, level)
    return pool_conventional(est, nu_com, level)


def between_matrix(est: RepeatedEstimates) -> np.ndarray:
    """Full k x k between-imputation covariance of vector estimates."""
    q = np.atleast_2d(est.q_hats.T).T
    _check_m(q.shape[0])
    d = q - q.mean(axis=0)
    return d.T @ d / (q.shape[0] - 1)


def pool_vector(est: RepeatedEstimates, rule: Rule | str, nu_com: float = math.inf,
                level: float = 0.95) -> list[PooledResult]:
    """Componentwise pooling of length-k estimates.

    Off-diagonal between covariance is available from :func:`between_matrix`;
    intervals use only the diagonal.
    """
    if not est.is_vector:
        return [pool(est, rule, nu_com, level)]
    k = est.q_hats.shape[1]
    return [
        pool(RepeatedEstimates(est.q_hats[:, j], est.u_bars[:, j, j]), rule, nu_com, level)
        for j in range(k)
    ]
