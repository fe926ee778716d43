import math

import numpy as np
import pytest

from conftest import DESK_RATES, find_row
from mipool.data import IncompleteDataset
from mipool.mathkit import RngStream
from mipool.pooling import Rule
from mipool.simulation import (
    SimulationConfig,
    ampute_mcar,
    generate_population,
    run_replication,
    run_study,
    summarize,
)


def test_config_defaults_follow_the_design():
    cfg = SimulationConfig()
    assert cfg.n_pop == 1000
    assert cfg.mu == (1.0, 2.0, 3.0)
    assert cfg.sigma[0] == (1.0, 0.1, 0.1)
    assert cfg.miss_rates[0] == 0.10 and cfg.miss_rates[-1] == 0.95
    assert (cfg.m, cfg.iterations, cfg.reps, cfg.level) == (5, 10, 10000, 0.95)


@pytest.mark.parametrize("kwargs", [
    {"miss_rates": (0.0,)},
    {"miss_rates": (1.0,)},
    {"reps": 0},
    {"m": 1},
    {"sigma": ((1, 2, 0), (2, 1, 0), (0, 0, 1))},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimulationConfig(**kwargs)


def test_population_minimal():
    ds = generate_population(SimulationConfig(n_pop=1), RngStream(1))
    assert ds.shape == (1, 3)
    assert ds.mask.all()


def test_population_grand_mean():
    cfg = SimulationConfig()
    means = np.array([generate_population(cfg, RngStream(3, i)).values.mean(axis=0)
                      for i in range(200)])
    se = 1.0 / math.sqrt(200 * cfg.n_pop)
    assert np.abs(means.mean(axis=0) - np.array(cfg.mu)).max() <= 3 * se


def test_population_diagonal_sigma_is_uncorrelated():
    cfg = SimulationConfig(n_pop=100_000, sigma=np.eye(3))
    corr = np.corrcoef(generate_population(cfg, RngStream(4)).values, rowvar=False)
    assert np.abs(corr - np.eye(3)).max() <= 0.01


def test_amputation_rate_concentrates():
    ds = IncompleteDataset.complete(np.zeros((1_000_000, 1)), ("Y1",))
    out = ampute_mcar(ds, ["Y1"], 0.3, RngStream(5))
    assert abs((~out.mask).mean() - 0.3) <= 0.002


def test_amputation_duplicate_columns_and_untouched_covariate():
    pop = generate_population(SimulationConfig(), RngStream(6))
    once = ampute_mcar(pop, ["Y1", "Y2"], 0.5, RngStream(7))
    twice = ampute_mcar(pop, ["Y1", "Y2", "Y1", 2], 0.5, RngStream(7))
    assert (once.mask == twice.mask).all()
    assert once.mask[:, 0].all()
    assert not once.mask[:, 1:].all()


@pytest.mark.parametrize("rate", [0.0, 1.0, -0.1])
def test_amputation_rate_domain(rate):
    pop = generate_population(SimulationConfig(n_pop=5), RngStream(1))
    with pytest.raises(ValueError):
        ampute_mcar(pop, ["Y1"], rate, RngStream(1))


def test_replication_without_deletions_is_degenerate_at_truth():
    rep = run_replication(SimulationConfig(n_pop=200), 1e-12, 0)
    for out in rep.outcomes:
        assert out.simplified.degenerate
        assert out.simplified.ci_low == out.simplified.ci_high == out.truth
        assert out.simplified.covers(out.truth)
        assert out.conventional.covers(out.truth)


def test_replication_is_reproducible():
    cfg = SimulationConfig(n_pop=300, seed=42)
    assert run_replication(cfg, 0.5, 3) == run_replication(cfg, 0.5, 3)
    assert run_replication(cfg, 0.5, 3) != run_replication(cfg, 0.5, 4)


def test_reps_one_summary_is_the_replication():
    cfg = SimulationConfig(n_pop=300, reps=1, miss_rates=(0.3,), seed=8)
    rows = run_study(cfg)
    rep = run_replication(cfg, 0.3, 0)
    assert [r.variable for r in rows] == ["Y1", "Y1", "Y2", "Y2"]
    for row in rows:
        out = next(o for o in rep.outcomes if o.variable == row.variable)
        res = out.result(row.rule)
        assert row.avg_nu == res.nu
        assert row.avg_ciw == res.ci_width
        assert row.avg_fmi == res.fmi
        assert row.coverage == float(res.covers(out.truth))
        assert row.bias == res.q_bar - out.truth
        assert row.reps == 1
        assert row.avg_r == res.r


def test_row_order_and_rule_filter():
    cfg = SimulationConfig(n_pop=200, reps=2, miss_rates=(0.5, 0.2))
    rows = run_study(cfg, rules=["simplified"])
    assert [(r.variable, r.pct_missing, r.rule) for r in rows] == [
        ("Y1", 0.2, Rule.SIMPLIFIED), ("Y1", 0.5, Rule.SIMPLIFIED),
        ("Y2", 0.2, Rule.SIMPLIFIED), ("Y2", 0.5, Rule.SIMPLIFIED),
    ]


def test_worker_count_does_not_change_results():
    cfg = SimulationConfig(n_pop=200, reps=6, miss_rates=(0.3, 0.8), seed=5)
    assert run_study(cfg, workers=1) == run_study(cfg, workers=2)


def test_progress_callback():
    calls = []
    run_study(SimulationConfig(n_pop=100, reps=3, miss_rates=(0.2,)),
              progress=lambda done, total: calls.append((done, total)))
    assert calls == [(3, 3)]


def test_summarize_rejects_empty():
    with pytest.raises(ValueError):
        summarize([], "Y1", Rule.SIMPLIFIED)


@pytest.mark.slow
def test_simplified_coverage_at_half_missing():
    cfg = SimulationConfig(reps=1000, miss_rates=(0.5,), seed=777)
    rows = run_study(cfg, rules=["simplified"])
    assert 0.93 <= find_row(rows, "Y1", 0.5, "simplified").coverage <= 0.97


# -- invariants over the shared desk-scale run --------------------------------

def _mc_se(p, n):
    return math.sqrt(p * (1 - p) / n)


@pytest.mark.slow
@pytest.mark.parametrize("variable", ["Y1", "Y2"])
def test_conventional_covers_at_least_as_often(desk_study, variable):
    _, rows, _ = desk_study
    for rate in DESK_RATES:
        conv = find_row(rows, variable, rate, "conventional")
        simp = find_row(rows, variable, rate, "simplified")
        # paired design; allow Monte Carlo noise where both sit at nominal
        assert conv.coverage >= simp.coverage - 3 * _mc_se(0.95, conv.reps)
    low = find_row(rows, variable, 0.10, "conventional")
    assert low.coverage > 0.95 + 3 * _mc_se(0.95, low.reps)


@pytest.mark.slow
@pytest.mark.parametrize("variable", ["Y1", "Y2"])
def test_width_gap_shrinks_with_missingness(desk_study, variable):
    _, rows, _ = desk_study
    ratios = [find_row(rows, variable, rate, "conventional").avg_ciw
              / find_row(rows, variable, rate, "simplified").avg_ciw for rate in DESK_RATES]
    # the gap closes until both rules are equivalent, then stays in that band
    band = (0.97, 1.05)
    reached = next(i for i, r in enumerate(ratios) if band[0] <= r <= band[1])
    for a, b in zip(ratios[:reached], ratios[1:reached + 1]):
        assert b <= a
    assert all(band[0] <= r <= band[1] for r in ratios[reached:])
    assert ratios[0] > 1.5


@pytest.mark.slow
def test_estimates_unbiased_and_rows_consistent(desk_study):
    _, rows, _ = desk_study
    for row in rows:
        assert abs(row.bias) <= 3 * row.bias_se
        assert 0.0 <= row.coverage <= 1.0
        assert row.avg_ciw >= 0
        if row.rule is Rule.SIMPLIFIED:
            assert math.isinf(row.avg_r) and row.avg_nu == 4.0 and row.avg_fmi == 1.0
