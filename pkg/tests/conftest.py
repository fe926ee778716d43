import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {name} -- {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


DESK_RATES = (0.10, 0.50, 0.90, 0.95)
DESK_REPS = 1000


@pytest.fixture(scope="session")
def desk_study():
    """Desk-scale run shared by the harness invariants and the acceptance gate."""
    import time

    from mipool.simulation import SimulationConfig, run_study

    cfg = SimulationConfig(reps=DESK_REPS, miss_rates=DESK_RATES)
    start = time.perf_counter()
    rows = run_study(cfg, workers=1)
    return cfg, rows, time.perf_counter() - start


def find_row(rows, variable, rate, rule):
    from mipool.pooling import Rule

    rule = Rule(rule)
    return next(r for r in rows
                if r.variable == variable and r.pct_missing == rate and r.rule is rule)
