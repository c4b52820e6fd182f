"""Instrumented flops per FGMRES iteration as N doubles.

Usage: python3 scripts/flop_scaling.py [--eps 1e-7] [--n 128 256 512 1024]
"""

import argparse

from blprecond.experiments import Case, flops_per_iteration


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=1e-7)
    ap.add_argument("--n", type=int, nargs="+", default=[128, 256, 512, 1024])
    args = ap.parse_args()
    for case in (Case.PARABOLIC, Case.EXPONENTIAL):
        prev = None
        for N in args.n:
            per_iter, iters = flops_per_iteration(case, args.eps, N)
            ratio = f"  x{per_iter / prev:.3f}" if prev else ""
            print(f"{case.value:12s} N={N:5d}: {iters} its, {per_iter:.3e} flops/it{ratio}")
            prev = per_iter


if __name__ == "__main__":
    main()
