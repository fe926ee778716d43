"""Monte Carlo coverage study: finite populations, MCAR deletion, imputation, pooling."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import IncompleteDataset, mean_analyzer, stack_estimates
from .imputer import ImputationError, ImputerConfig, mice
from .mathkit import RngStream, as_generator, cholesky, mvn_sample
from .pooling import PooledResult, Rule, pool_conventional, pool_simplified

log = logging.getLogger(__name__)

DEFAULT_RATES = (0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95)
COLUMNS = ("X", "Y1", "Y2")
TARGETS = ("Y1", "Y2")
MAX_RETRIES = 10

# substream children of one replication attempt
_POPULATION, _AMPUTATION, _IMPUTATION = 0, 1, 2


@dataclass(frozen=True)
class SimulationConfig:
    n_pop: int = 1000
    mu: tuple[float, ...] = (1.0, 2.0, 3.0)
    sigma: tuple[tuple[float, ...], ...] = (
        (1.0, 0.1, 0.1),
        (0.1, 1.0, 0.1),
        (0.1, 0.1, 1.0),
    )
    miss_rates: tuple[float, ...] = DEFAULT_RATES
    m: int = 5
    iterations: int = 10
    reps: int = 10000
    level: float = 0.95
    seed: int = 20150101

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        object.__setattr__(self, "sigma", tuple(tuple(float(v) for v in row) for row in self.sigma))
        object.__setattr__(self, "miss_rates", tuple(float(r) for r in self.miss_rates))
        if self.n_pop < 1:
            raise ValueError(f"n_pop must be positive, got {self.n_pop}")
        if len(self.mu) != len(COLUMNS) or np.shape(self.sigma) != (len(COLUMNS),) * 2:
            raise ValueError("mu must have length 3 and sigma must be 3 x 3")
        for rate in self.miss_rates:
            if not 0.0 < rate < 1.0:
                raise ValueError(f"missingness rate {rate} outside (0, 1)")
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {self.level}")
        cholesky(self.sigma)  # rejects non-SPD sigma early
        ImputerConfig(self.m, self.iterations)


def rate_key(rate: float) -> int:
    """Stable integer label of a missingness rate for substream addressing."""
    return int(round(rate * 1_000_000))


def generate_population(cfg: SimulationConfig, rng) -> IncompleteDataset:
    values = mvn_sample(cfg.mu, cholesky(cfg.sigma), rng, size=cfg.n_pop)
    return IncompleteDataset.complete(values, COLUMNS)


def ampute_mcar(ds: IncompleteDataset, cols: Iterable[int | str], rate: float,
                rng) -> IncompleteDataset:
    """Delete each cell of ``cols`` independently with probability ``rate``."""
    if not 0.0 < rate < 1.0:
        raise ValueError(f"missingness rate {rate} outside (0, 1)")
    gen = as_generator(rng)
    targets = sorted({ds.column_index(c) for c in cols})
    keep = np.ones(ds.shape, dtype=bool)
    for j in targets:
        keep[:, j] = gen.random(ds.n_rows) >= rate
    return ds.with_mask(keep)


@dataclass(frozen=True)
class VariableOutcome:
    variable: str
    truth: float
    conventional: PooledResult
    simplified: PooledResult

    def result(self, rule: Rule) -> PooledResult:
        return self.conventional if rule is Rule.CONVENTIONAL else self.simplified


@dataclass(frozen=True)
class Replication:
    rate: float
    rep_index: int
    retries: int
    outcomes: tuple[VariableOutcome, ...]


def replication_stream(cfg: SimulationConfig, rate: float, rep_index: int,
                       attempt: int = 0) -> RngStream:
    return RngStream(cfg.seed).spawn(rate_key(rate), rep_index, attempt)


def run_replication(cfg: SimulationConfig, rate: float, rep_index: int) -> Replication:
    """One population, one deletion pattern, m imputations, both pooling rules.

    The truth is the pre-deletion mean of the generated population. A
    replication whose imputation fails is redrawn from the next substream,
    at most ``MAX_RETRIES`` times.
    """
    for attempt in range(MAX_RETRIES + 1):
        stream = replication_stream(cfg, rate, rep_index, attempt)
        population = generate_population(cfg, stream.spawn(_POPULATION))
        incomplete = ampute_mcar(population, TARGETS, rate, stream.spawn(_AMPUTATION))
        try:
            stack = mice(incomplete, ImputerConfig(cfg.m, cfg.iterations,
                                                   stream.spawn(_IMPUTATION)))
        except ImputationError as exc:
            log.debug("rate %s rep %d attempt %d failed: %s", rate, rep_index, attempt, exc)
            continue
        outcomes = []
        for name in TARGETS:
            col = population.column_index(name)
            truth = float(population.values[:, col].mean())
            est = stack_estimates(stack, mean_analyzer(col))
            outcomes.append(VariableOutcome(
                name,
                truth,
                pool_conventional(est, nu_com=cfg.n_pop - 1, level=cfg.level),
                pool_simplified(est, level=cfg.level),
            ))
        return Replication(rate, rep_index, attempt, tuple(outcomes))
    raise ImputationError(
        f"replication {rep_index} at rate {rate} failed after {MAX_RETRIES} retries"
    )


@dataclass(frozen=True)
class ConditionSummary:
    variable: str
    pct_missing: float
    rule: Rule
    avg_r: float
    avg_nu: float
    avg_fmi: float
    avg_ciw: float
    coverage: float
    bias: float
    reps: int
    bias_se: float = 0.0
    retries: int = 0


def summarize(replications: Sequence[Replication], variable: str, rule: Rule) -> ConditionSummary:
    """Aggregate one (rate, variable, rule) cell; input order fixes the float sums."""
    if not replications:
        raise ValueError("no replications to summarise")
    rate = replications[0].rate
    outs = [next(o for o in rep.outcomes if o.variable == variable) for rep in replications]
    res = [o.result(rule) for o in outs]
    n = len(res)
    errors = np.array([p.q_bar - o.truth for p, o in zip(res, outs)])
    rs = np.array([p.r for p in res])
    if rule is Rule.SIMPLIFIED or np.isinf(rs).any():
        avg_r = math.inf
    else:
        avg_r = float(rs.mean())
    return ConditionSummary(
        variable=variable,
        pct_missing=rate,
        rule=rule,
        avg_r=avg_r,
        avg_nu=float(np.mean([p.nu for p in res])),
        avg_fmi=float(np.mean([p.fmi for p in res])),
        avg_ciw=float(np.mean([p.ci_width for p in res])),
        coverage=sum(p.covers(o.truth) for p, o in zip(res, outs)) / n,
        bias=float(errors.mean()),
        bias_se=float(errors.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        reps=n,
        retries=sum(rep.retries for rep in replications),
    )


def _run_task(args: tuple[SimulationConfig, float, int]) -> Replication:
    return run_replication(*args)


@dataclass
class _Progress:
    total: int
    every: int = 100
    callback: Callable[[int, int], None] | None = None
    done: int = field(default=0)

    def tick(self) -> None:
        self.done += 1
        if self.callback and (self.done % self.every == 0 or self.done == self.total):
            self.callback(self.done, self.total)


def run_study(cfg: SimulationConfig, rules: Sequence[Rule | str] = (Rule.CONVENTIONAL, Rule.SIMPLIFIED),
              workers: int = 1,
              progress: Callable[[int, int], None] | None = None) -> list[ConditionSummary]:
    """Run every (rate, replication) and summarise per variable, rate and rule.

    Rows come out variable-major, then by ascending rate, then in ``rules``
    order. Results are independent of ``workers``: each replication owns its
    substream and aggregation happens in replication order.
    """
    rules = [Rule(r) for r in rules]
    rates = sorted(set(cfg.miss_rates))
    tasks = [(cfg, rate, i) for rate in rates for i in range(cfg.reps)]
    tracker = _Progress(len(tasks), callback=progress)
    results: list[Replication] = []
    if workers <= 1:
        for task in tasks:
            results.append(_run_task(task))
            tracker.tick()
    else:
        chunk = max(1, min(50, len(tasks) // (4 * workers)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rep in pool.map(_run_task, tasks, chunksize=chunk):
                results.append(rep)
                tracker.tick()
    by_rate = {rate: results[k * cfg.reps:(k + 1) * cfg.reps] for k, rate in enumerate(rates)}
    return [
        summarize(by_rate[rate], variable, rule)
        for variable in TARGETS
        for rate in rates
        for rule in rules
    ]
