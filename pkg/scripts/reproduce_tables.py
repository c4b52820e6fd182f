"""Regenerate the 1D and 2D error/iteration tables as CSV files.

Usage: python3 scripts/reproduce_tables.py [--out-dir results] [--extended]

``--extended`` adds N = 1024 and 2048 to the 2D tables (several minutes).
"""

import argparse
from pathlib import Path

from blprecond.experiments import Case, ExperimentSpec, run_table

TABLES = {
    Case.ONE_D: ([1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8], [128, 256, 512, 1024, 2048]),
    Case.PARABOLIC: ([1e-5, 1e-6, 1e-7, 1e-8], [128, 256, 512]),
    Case.EXPONENTIAL: ([1e-4, 1e-5, 1e-6, 1e-7], [128, 256, 512]),
}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--extended", action="store_true")
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for case, (eps_list, N_list) in TABLES.items():
        if args.extended and case is not Case.ONE_D:
            N_list = N_list + [1024, 2048]
        out = args.out_dir / f"table_{case.value}.csv"
        rows = run_table(ExperimentSpec(case, eps_list, N_list, out=out))
        print(f"{out}: {len(rows)} rows")
        for r in rows:
            status = "" if r.converged else f"  FAILED {r.message}"
            print(f"  eps={r.eps:g} N={r.N}: error {r.error:.4e}, {r.iterations} its{status}")


if __name__ == "__main__":
    main()
