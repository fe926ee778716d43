"""Small numeric kernel: Cholesky, MVN draws, least squares, chi-square, t quantiles."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream backed by the counter-based Philox generator.

    ``(seed, stream_id, path)`` fully determines the draw sequence. Child
    streams from :meth:`spawn` are derived through ``SeedSequence`` spawn keys,
    so sibling streams never overlap.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for v in (self.seed, self.stream_id, *self.path):
            if not 0 <= v < 2**64:
                raise ValueError(f"stream keys must be unsigned 64-bit, got {v}")

    def spawn(self, *keys: int) -> RngStream:
        return RngStream(self.seed, self.stream_id, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix not positive definite: pivot {pivot} is {value:.6g}")
        self.pivot = pivot


def cholesky(a) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a (Cholesky-Banachiewicz)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if np.abs(a - a.T).max() > 1e-12 * max(1.0, np.abs(a).max()):
        raise ValueError("matrix is not symmetric")
    k = a.shape[0]
    L = np.zeros_like(a)
    for i in range(k):
        for j in range(i + 1):
            s = a[i, j] - L[i, :j] @ L[j, :j]
            if i == j:
                if not s > 0.0:
                    raise NotPositiveDefiniteError(i, s)
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L


def mvn_sample(mu, chol_sigma, rng, size: int | None = None) -> np.ndarray:
    """mu + L z with z standard normal; ``size`` rows when given."""
    mu = np.asarray(mu, dtype=float)
    L = np.asarray(chol_sigma, dtype=float)
    if mu.ndim != 1 or L.shape != (mu.size, mu.size):
        raise ValueError(f"dimension mismatch: mu {mu.shape}, chol_sigma {L.shape}")
    gen = as_generator(rng)
    if size is None:
        return mu + L @ gen.standard_normal(mu.size)
    return mu + gen.standard_normal((size, mu.size)) @ L.T


def ridge_constant(xtx: np.ndarray) -> float:
    return 1e-8 * float(np.trace(xtx)) / xtx.shape[0]


def least_squares(x, y) -> tuple[np.ndarray, float, np.ndarray]:
    """OLS fit returning (beta_hat, rss, (X'X + kI)^-1).

    beta_hat is the unpenalised minimiser; the small ridge k only stabilises
    the inverse used for posterior draws.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, q = x.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if n < q:
        raise ValueError(f"{n} rows cannot identify {q} coefficients")
    xtx = x.T @ x
    ridged = xtx + ridge_constant(xtx) * np.eye(q)
    L = cholesky(ridged)
    L_inv = np.linalg.inv(L)
    xtx_inv = L_inv.T @ L_inv
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    return beta, float(resid @ resid), xtx_inv


def draw_chi_square(df: float, rng) -> float:
    if not df > 0:
        raise ValueError(f"chi-square degrees of freedom must be positive, got {df}")
    return float(as_generator(rng).chisquare(df))


def _t_pdf(t: float, df: float) -> float:
    logc = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    u = abs(t) / math.sqrt(df)
    log_kernel = 2 * math.log(u) + math.log1p(1 / (u * u)) if u > 1e150 else math.log1p(u * u)
    return math.exp(logc - (df + 1) / 2 * log_kernel)


def _t_upper_tail(t: float, df: float) -> float:
    """P(T > t) for t >= 0."""
    u = t / math.sqrt(df)
    return 0.5 * special.betainc(df / 2, 0.5, 1.0 / (1.0 + u * u))


def _t_quantile_large_df(p: float, df: float) -> float:
    # Cornish-Fisher expansion around the normal quantile; truncation error O(df^-5)
    z = float(special.ndtri(p))
    z2 = z * z
    g1 = z * (z2 + 1) / 4
    g2 = z * ((5 * z2 + 16) * z2 + 3) / 96
    g3 = z * (((3 * z2 + 19) * z2 + 17) * z2 - 15) / 384
    g4 = z * ((((79 * z2 + 776) * z2 + 1482) * z2 - 1920) * z2 - 945) / 92160
    return z + (g1 + (g2 + (g3 + g4 / df) / df) / df) / df


@functools.lru_cache(maxsize=4096)
def t_quantile(p: float, df: float) -> float:
    """Inverse CDF of Student's t with (possibly fractional) ``df``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if p == 0.5:
        return 0.0
    tail = p if p < 0.5 else 1.0 - p
    if df > 1e5:
        t = _t_quantile_large_df(tail, df)
        return t if p < 0.5 else -t
    # P(|T| > t) = I_x(df/2, 1/2) with x = df/(df+t^2); pick the better-conditioned side
    if 2 * tail < 0.5:
        x = special.betaincinv(df / 2, 0.5, 2 * tail)
        t = math.sqrt(df * (1.0 - x) / x) if x > 0 else math.inf
    else:
        y = special.betaincinv(0.5, df / 2, 1.0 - 2 * tail)
        t = math.sqrt(df * y / (1.0 - y))
    if t < 1e100:
        # Newton polish; keep a step only if it shrinks the residual
        resid = _t_upper_tail(t, df) - tail
        for _ in range(3):
            if abs(resid) <= 1e-16 * tail:
                break
            dens = _t_pdf(t, df)
            if not dens > 0:
                break
            cand = t + resid / dens
            cand_resid = _t_upper_tail(cand, df) - tail if cand >= 0 else math.inf
            if not abs(cand_resid) < abs(resid):
                break
            t, resid = cand, cand_resid
    return -t if p < 0.5 else t
