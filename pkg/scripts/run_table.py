"""Run the full coverage study and write table.csv + coverage.svg into an output directory.

    python scripts/run_table.py --reps 10000 --threads 4 --outdir results/
"""

import argparse
import sys
import time
from pathlib import Path

from mipool.cli import write_coverage_plot, write_report
from mipool.simulation import SimulationConfig, run_study


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=SimulationConfig().seed)
    p.add_argument("--outdir", type=Path, default=Path("results"))
    args = p.parse_args()

    cfg = SimulationConfig(reps=args.reps, seed=args.seed)
    args.outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rows = run_study(cfg, workers=args.threads,
                     progress=lambda d, t: print(f"{d}/{t}", file=sys.stderr, flush=True))
    write_report(rows, args.outdir / "table.csv")
    write_coverage_plot(rows, args.outdir / "coverage.svg", cfg.level)

    print(f"{'var':<4}{'%mis':>6}  {'r':>7}{'nu':>9}{'fmi':>6}{'ciw':>7}{'cov':>7}"
          f"  |{'ciw':>7}{'cov':>7}   (conventional | simplified)")
    for conv, simp in zip(rows[::2], rows[1::2]):
        print(f"{conv.variable:<4}{conv.pct_missing * 100:>6.0f}  {conv.avg_r:>7.2f}{conv.avg_nu:>9.2f}"
              f"{conv.avg_fmi:>6.2f}{conv.avg_ciw:>7.2f}{conv.coverage:>7.3f}"
              f"  |{simp.avg_ciw:>7.2f}{simp.coverage:>7.3f}")
    print(f"{time.perf_counter() - start:.0f}s, outputs in {args.outdir}/", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
