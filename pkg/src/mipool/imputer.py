"""Chained-equations multiple imputation with Bayesian linear-regression draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ImputationStack, IncompleteDataset
from .mathkit import RngStream, as_generator, cholesky, least_squares


class ImputationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ImputerConfig:
    m: int = 5
    iterations: int = 10
    rng: RngStream = RngStream(0)

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError(f"m must be at least 2, got {self.m}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")


def norm_draw(y_obs, x_obs, x_mis, rng) -> np.ndarray:
    """Posterior-predictive draws for the missing rows of a normal linear model.

    Draws sigma^2 from its scaled inverse chi-square posterior, then beta
    given sigma^2, then adds residual noise to the predictions at ``x_mis``.
    Design matrices must already contain the intercept column.
    """
    y_obs = np.asarray(y_obs, dtype=float)
    x_obs = np.asarray(x_obs, dtype=float)
    x_mis = np.asarray(x_mis, dtype=float)
    n0, q = x_obs.shape
    if n0 <= q:
        raise ImputationError(f"{n0} observed rows cannot support {q} predictors")
    if x_mis.ndim != 2 or x_mis.shape[1] != q:
        raise ValueError(f"x_mis has shape {x_mis.shape}, expected (n, {q})")
    gen = as_generator(rng)
    try:
        beta_hat, rss, xtx_inv = least_squares(x_obs, y_obs)
        chol_v = cholesky(xtx_inv)
    except np.linalg.LinAlgError as exc:
        raise ImputationError(f"regression is singular: {exc}") from exc
    sigma = math.sqrt(rss / gen.chisquare(n0 - q))
    beta = beta_hat + sigma * (chol_v @ gen.standard_normal(q))
    return x_mis @ beta + sigma * gen.standard_normal(x_mis.shape[0])


def _run_chain(ds: IncompleteDataset, iterations: int, gen: np.random.Generator) -> np.ndarray:
    data = np.array(ds.values)
    mask = ds.mask
    n, k = data.shape
    targets = ds.incomplete_columns()
    for j in targets:
        obs = mask[:, j]
        if not obs.any():
            raise ImputationError(f"column {ds.column_names[j]!r} has no observed values")
        if obs.sum() < k + 1:
            raise ImputationError(
                f"column {ds.column_names[j]!r} has {obs.sum()} observed rows, "
                f"needs at least {k + 1}"
            )
        data[~obs, j] = gen.choice(data[obs, j], size=int((~obs).sum()), replace=True)
    if not targets:
        return data
    design = np.ones((n, k))
    for _ in range(iterations):
        for j in targets:
            obs = mask[:, j]
            design[:, 1:] = np.delete(data, j, axis=1)
            data[~obs, j] = norm_draw(data[obs, j], design[obs], design[~obs], gen)
    return data


def mice(ds: IncompleteDataset, cfg: ImputerConfig) -> ImputationStack:
    """Impute ``ds`` ``cfg.m`` times, one independent Gibbs chain per imputation.

    Missing cells start as random draws from their column's observed values.
    Each iteration then visits incomplete columns left to right, regressing
    each on all other columns plus an intercept. Chain ``l`` draws from
    ``cfg.rng.spawn(l)``.
    """
    completions = np.empty((cfg.m, ds.n_rows, ds.n_cols))
    for chain in range(cfg.m):
        gen = cfg.rng.spawn(chain).generator()
        completions[chain] = _run_chain(ds, cfg.iterations, gen)
    return ImputationStack(completions, ds.mask, ds.column_names)
