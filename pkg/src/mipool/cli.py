"""Command-line front end: run a coverage study, write the table CSV and an SVG plot."""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .pooling import Rule
from .simulation import DEFAULT_RATES, ConditionSummary, SimulationConfig, run_study

HEADER = ("variable", "pct_missing", "rule", "r", "nu", "fmi", "ciw", "cov", "bias", "reps")
SEED_ENV = "MIPOOL_SEED"
DESK_REPS = 1000
DEFAULT_SEED = SimulationConfig().seed


@dataclass(frozen=True)
class RunOptions:
    config: SimulationConfig
    rules: tuple[Rule, ...]
    out: Path | None
    plot: Path | None
    threads: int


def _rate_list(text: str) -> tuple[float, ...]:
    rates = []
    for part in text.split(","):
        part = part.strip()
        try:
            rate = float(part)
        except ValueError:
            raise argparse.ArgumentTypeError(f"malformed rate {part!r}") from None
        if not 0.0 < rate < 1.0:
            raise argparse.ArgumentTypeError(f"rate {part} outside (0, 1)")
        rates.append(rate)
    if not rates:
        raise argparse.ArgumentTypeError("empty rate list")
    return tuple(rates)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed {text} is not an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mipool",
        description="Coverage of conventional vs finite-population pooling rules "
                    "for multiply imputed means.",
    )
    p.add_argument("--n-pop", type=_positive_int, default=1000, help="population size")
    p.add_argument("--m", type=int, default=5, help="number of imputations (>= 2)")
    p.add_argument("--iterations", type=_positive_int, default=10,
                   help="chained-equations iterations")
    p.add_argument("--reps", type=_positive_int, default=DESK_REPS,
                   help="replications per missingness rate")
    p.add_argument("--rates", type=_rate_list, default=DEFAULT_RATES,
                   help="comma-separated missingness rates in (0, 1)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.add_argument("--seed", type=_seed, default=None,
                   help=f"master seed (falls back to ${SEED_ENV})")
    p.add_argument("--rules", choices=("both", "conventional", "simplified"), default="both")
    p.add_argument("--out", type=Path, default=None, help="CSV path (default: stdout)")
    p.add_argument("--plot", type=Path, default=None, help="SVG coverage plot path")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
    return p


def parse_args(argv: Sequence[str] | None = None) -> RunOptions:
    parser = build_parser()
    ns = parser.parse_args(argv)
    seed = ns.seed
    if seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            seed = _seed(env) if env else DEFAULT_SEED
        except (ValueError, argparse.ArgumentTypeError):
            parser.error(f"${SEED_ENV}={env!r} is not a valid seed")
    try:
        cfg = SimulationConfig(
            n_pop=ns.n_pop, miss_rates=ns.rates, m=ns.m, iterations=ns.iterations,
            reps=ns.reps, level=ns.level, seed=seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
    rules = (Rule.CONVENTIONAL, Rule.SIMPLIFIED) if ns.rules == "both" else (Rule(ns.rules),)
    return RunOptions(cfg, rules, ns.out, ns.plot, ns.threads)


def _fmt(x: float, digits: int = 4) -> str:
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    if math.isnan(x):
        return "NaN"
    s = f"{x:.{digits}f}"
    return "0." + "0" * digits if s == "-0." + "0" * digits else s


def format_row(row: ConditionSummary) -> list[str]:
    return [
        row.variable,
        _fmt(row.pct_missing),
        row.rule.value,
        _fmt(row.avg_r),
        _fmt(row.avg_nu),
        _fmt(row.avg_fmi),
        _fmt(row.avg_ciw),
        _fmt(row.coverage, 3),
        _fmt(row.bias),
        str(row.reps),
    ]


def render_report(rows: Sequence[ConditionSummary]) -> str:
    if not rows:
        raise ValueError("no rows to report")
    buf = io.StringIO()
    buf.write(",".join(HEADER) + "\n")
    for row in rows:
        buf.write(",".join(format_row(row)) + "\n")
    return buf.getvalue()


def write_report(rows: Sequence[ConditionSummary], path: str | Path) -> None:
    text = render_report(rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# plot geometry
_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 170, 30, 60
Y_MIN, Y_MAX = 0.90, 1.005
_COLORS = {Rule.CONVENTIONAL: "#c0392b", Rule.SIMPLIFIED: "#2471a3"}
_DASHES = ("", "6,4", "2,3", "8,3,2,3")


def _sx(x: float, x_min: float, x_max: float) -> float:
    span = (x_max - x_min) or 1.0
    return _LEFT + (x - x_min) / span * (_W - _LEFT - _RIGHT)


def _sy(y: float) -> float:
    y = min(max(y, Y_MIN), Y_MAX)
    return _TOP + (Y_MAX - y) / (Y_MAX - Y_MIN) * (_H - _TOP - _BOTTOM)


def render_coverage_plot(rows: Sequence[ConditionSummary], level: float = 0.95,
                         rules: Sequence[Rule] = (Rule.CONVENTIONAL, Rule.SIMPLIFIED)) -> str:
    """Coverage against missingness rate, one polyline per (variable, rule)."""
    rules = [Rule(r) for r in rules]
    variables = list(dict.fromkeys(r.variable for r in rows))
    for var in variables:
        present = {r.rule for r in rows if r.variable == var}
        missing = [rule.value for rule in rules if rule not in present]
        if missing:
            raise ValueError(f"no {', '.join(missing)} rows for variable {var}")
    rates = sorted({r.pct_missing for r in rows})
    x_min, x_max = rates[0], rates[-1]
    if x_min == x_max:
        x_min, x_max = x_min - 0.05, x_max + 0.05

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
    ]
    x0, x1 = _LEFT, _W - _RIGHT
    for tick in (0.90, 0.92, 0.94, 0.96, 0.98, 1.00):
        y = _sy(tick)
        out.append(f'<line class="grid" x1="{x0}" y1="{y:.2f}" x2="{x1}" y2="{y:.2f}" '
                   f'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{tick:.2f}</text>')
    for rate in rates:
        x = _sx(rate, x_min, x_max)
        out.append(f'<text x="{x:.2f}" y="{_H - _BOTTOM + 18}" text-anchor="middle">'
                   f'{rate:.2f}</text>')
    out.append(f'<rect x="{x0}" y="{_TOP}" width="{x1 - x0}" height="{_H - _TOP - _BOTTOM}" '
               f'fill="none" stroke="black" stroke-width="1"/>')
    ny = _sy(level)
    out.append(f'<line class="nominal" x1="{x0}" y1="{ny:.2f}" x2="{x1}" y2="{ny:.2f}" '
               f'stroke="black" stroke-width="1" stroke-dasharray="4,4"/>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{_H - 15}" text-anchor="middle">'
               f'proportion missing</text>')
    out.append(f'<text x="18" y="{(_TOP + _H - _BOTTOM) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(_TOP + _H - _BOTTOM) / 2:.1f})">coverage</text>')

    legend_y = _TOP + 10
    for vi, var in enumerate(variables):
        dash = _DASHES[vi % len(_DASHES)]
        for rule in rules:
            pts = sorted((r.pct_missing, r.coverage) for r in rows
                         if r.variable == var and r.rule is rule)
            coords = " ".join(f"{_sx(x, x_min, x_max):.2f},{_sy(y):.2f}" for x, y in pts)
            style = f' stroke-dasharray="{dash}"' if dash else ""
            label = escape(f"{var} {rule.value}")
            out.append(f'<polyline data-variable="{escape(var)}" data-rule="{rule.value}" '
                       f'points="{coords}" fill="none" stroke="{_COLORS[rule]}" '
                       f'stroke-width="2"{style}/>')
            lx = x1 + 15
            out.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 25}" y2="{legend_y}" '
                       f'stroke="{_COLORS[rule]}" stroke-width="2"{style}/>')
            out.append(f'<text x="{lx + 32}" y="{legend_y + 4}">{label}</text>')
            legend_y += 18
    out.append(f'<line x1="{x1 + 15}" y1="{legend_y}" x2="{x1 + 40}" y2="{legend_y}" '
               f'stroke="black" stroke-dasharray="4,4"/>')
    out.append(f'<text x="{x1 + 47}" y="{legend_y + 4}">nominal {level:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_coverage_plot(rows: Sequence[ConditionSummary], path: str | Path,
                        level: float = 0.95,
                        rules: Sequence[Rule] = (Rule.CONVENTIONAL, Rule.SIMPLIFIED)) -> None:
    svg = render_coverage_plot(rows, level, rules)
    with open(path, "w") as fh:
        fh.write(svg)


def _progress(done: int, total: int) -> None:
    print(f"[mipool] {done}/{total} replications", file=sys.stderr, flush=True)


def main(argv: Sequence[str] | None = None) -> int:
    opts = parse_args(argv)
    cfg = opts.config
    try:
        rows = run_study(cfg, rules=opts.rules, workers=opts.threads, progress=_progress)
        retries = sum(r.retries for r in rows
                      if r.rule is opts.rules[0] and r.variable == rows[0].variable)
        if retries:
            print(f"[mipool] {retries} replications were redrawn after imputation failure",
                  file=sys.stderr)
        if opts.out is None:
            sys.stdout.write(render_report(rows))
        else:
            write_report(rows, opts.out)
        if opts.plot is not None:
            write_coverage_plot(rows, opts.plot, cfg.level, opts.rules)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"mipool: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
