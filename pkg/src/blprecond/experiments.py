"""Table reproduction, verification sweeps and the banded-LU cross-check."""

from __future__ import annotations

import csv
import enum
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .discretize import assemble_upwind_1d, assemble_upwind_2d
from .krylov import StoppingRule, fgmres_2d, gmres_1d
from .linalg import FlopCounter, max_norm, thomas_factor, thomas_solve
from .mesh import (LayerCase, build_shishkin_1d, build_shishkin_2d, partition_1d, partition_regions,
                   piecewise_uniform)
from .mgcorner import CornerSolveError, MgVariant
from .precond1d import build_preconditioner_1d, unit_eigenvector_residuals, verify_spectrum
from .precond2d import build_block_preconditioner, ideal_matrix, splitting_radius_report
from .problem import example_1d, manufactured_case

CSV_HEADER = ["case", "eps", "N", "error", "iters", "setup_s", "solve_s", "mg_cycles"]
BENCHMARK_REFINEMENT = 64
BANDED_MAX_N = 256


class Case(enum.Enum):
    ONE_D = "1d"
    PARABOLIC = "parabolic"
    EXPONENTIAL = "exponential"

    @property
    def layer_case(self) -> LayerCase:
        if self is Case.ONE_D:
            raise ValueError("the 1D case has no 2D layer structure")
        return LayerCase(self.value)


@dataclass
class ExperimentSpec:
    case: Case
    eps_list: list[float] = field(default_factory=list)
    N_list: list[int] = field(default_factory=list)
    k_const: float = 1.0
    sigma: float = 2.5
    max_iters: int = 200
    out: Path | None = None
    seed: int = 0

    def __post_init__(self):
        self.case = Case(self.case)
        for eps in self.eps_list:
            if not 0 < eps <= 1:
                raise ValueError(f"eps must lie in (0, 1], got {eps}")
        for N in self.N_list:
            if N < 4 or N % 2:
                raise ValueError(f"N must be even and at least 4, got {N}")
            if self.case is Case.EXPONENTIAL and N & (N - 1):
                raise ValueError(f"full coarsening needs a power-of-two N, got {N}")

    def cells(self) -> list[tuple[float, int]]:
        return [(eps, N) for eps in self.eps_list for N in self.N_list]


@dataclass
class TableRow:
    case: Case
    eps: float
    N: int
    error: float
    iterations: int
    setup_seconds: float
    solve_seconds: float
    cycles_per_apply: float = np.nan
    converged: bool = True
    message: str = ""

    def csv_fields(self) -> list[str]:
        def num(v: float) -> str:
            return "" if not np.isfinite(v) else f"{v:.6e}"

        return [self.case.value, num(self.eps), str(self.N), num(self.error), str(self.iterations),
                num(self.setup_seconds), num(self.solve_seconds), num(self.cycles_per_apply)]


def benchmark_error_1d(eps: float, N: int, c_lower: float | None = None) -> float:
    """Max-norm error of the direct upwind solution against a 64N-interval one.

    The benchmark mesh has the same transition point; the comparison is at
    the coarse meshpoints, which the fine mesh contains.
    """
    problem = example_1d(eps) if c_lower is None else example_1d(eps, c_lower)
    mesh = build_shishkin_1d(eps, N, problem.c_lower)
    A, f = assemble_upwind_1d(mesh, problem, eps)
    u = thomas_solve(thomas_factor(A), f)
    fine = piecewise_uniform(mesh.tau, BENCHMARK_REFINEMENT * N)
    Af, ff = assemble_upwind_1d(fine, problem, eps)
    uf = thomas_solve(thomas_factor(Af), ff)
    return max_norm(u - uf[BENCHMARK_REFINEMENT - 1::BENCHMARK_REFINEMENT])


def run_cell_1d(eps: float, N: int, k_const: float = 1.0, max_iters: int = 200) -> TableRow:
    t0 = time.perf_counter()
    problem = example_1d(eps)
    mesh = build_shishkin_1d(eps, N, problem.c_lower)
    A, f = assemble_upwind_1d(mesh, problem, eps)
    p = build_preconditioner_1d(A, partition_1d(mesh)[0])
    setup = time.perf_counter() - t0
    _, stats = gmres_1d(A, f, p, StoppingRule.max_norm_1d(N, k_const), max_iters)
    error = benchmark_error_1d(eps, N)
    return TableRow(Case.ONE_D, eps, N, error, stats.iterations, setup, stats.wall_time,
                    converged=stats.converged)


def _setup_2d(case: Case, eps: float, N: int, sigma: float):
    mc = manufactured_case(case.layer_case, eps)
    pr = mc.problem
    mesh = build_shishkin_2d(eps, N, case.layer_case, pr.c1_lower, pr.c2_lower, sigma)
    part = partition_regions(mesh)
    A, b = assemble_upwind_2d(mesh, pr, eps, part)
    return mc, mesh, part, A, b


def exact_on_mesh(mc, mesh, part) -> np.ndarray:
    X, Y = np.meshgrid(mesh.x_mesh.interior, mesh.y_mesh.interior)
    return part.from_grid(mc.u_exact(X, Y))


def run_cell_2d(case: Case, eps: float, N: int, sigma: float = 2.5, max_iters: int = 200,
                flops: FlopCounter | None = None) -> TableRow:
    mc, mesh, part, A, b = _setup_2d(case, eps, N, sigma)
    t0 = time.perf_counter()
    P = build_block_preconditioner(A, part, mesh, mc.problem, eps)
    P.flops = flops
    setup = time.perf_counter() - t0
    try:
        x, stats = fgmres_2d(A, b, P, StoppingRule.euclid_2d(N), max_iters, flops)
    except CornerSolveError as exc:
        return TableRow(case, eps, N, np.nan, len(P.cycles), setup, time.perf_counter() - t0 - setup,
                        float(np.mean(P.cycles)) if P.cycles else np.nan, False, str(exc))
    error = max_norm(x - exact_on_mesh(mc, mesh, part))
    cycles = float(np.mean(P.cycles)) if P.cycles else 0.0
    return TableRow(case, eps, N, error, stats.iterations, setup, stats.wall_time, cycles, stats.converged)


def run_table(spec: ExperimentSpec) -> list[TableRow]:
    """One row per (eps, N) cell; solver failures are recorded and the run goes on."""
    rows = []
    for eps, N in spec.cells():
        if spec.case is Case.ONE_D:
            rows.append(run_cell_1d(eps, N, spec.k_const, spec.max_iters))
        else:
            rows.append(run_cell_2d(spec.case, eps, N, spec.sigma, spec.max_iters))
    rows.sort(key=lambda r: (r.case.value, -r.eps, r.N))
    if spec.out is not None:
        write_csv(rows, spec.out)
    return rows


def format_csv(rows: Iterable[TableRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def write_csv(rows: Iterable[TableRow], path: str | Path) -> None:
    Path(path).write_text(format_csv(rows))


# --- verification -----------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    limit: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return f"{status}  {self.name}: measured {self.measured:.4e}, limit {self.limit:.4e}{extra}"


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 2

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def _verify_1d(spec: ExperimentSpec, corrupt: bool, report: VerificationReport) -> None:
    for eps, N in spec.cells():
        problem = example_1d(eps)
        mesh = build_shishkin_1d(eps, N, problem.c_lower)
        A, _ = assemble_upwind_1d(mesh, problem, eps)
        n_layer = partition_1d(mesh)[0]
        p = build_preconditioner_1d(A, n_layer)
        if corrupt:
            # zero a sub-diagonal entry inside A_LL, which M must keep
            sub = p.matrix.sub.copy()
            sub[0] = 0.0
            p = type(p)(p.matrix.with_sub(sub), thomas_factor(p.matrix.with_sub(sub)), n_layer)
        tag = f"1d eps={eps:g} N={N}"
        rep = verify_spectrum(A, p, eps, N, problem.c_lower, mesh)
        if rep.applicable:
            report.checks.append(Check(f"{tag} spectral bound", rep.within_bound, rep.gamma_max, rep.bound))
        else:
            report.checks.append(Check(f"{tag} spectral bound", True, rep.gamma_max, rep.bound,
                                       "not applicable: eps N too large"))
        if N <= 1024:
            worst = float(unit_eigenvector_residuals(A, p).max())
            report.checks.append(Check(f"{tag} unit eigenvectors", worst <= 1e-12, worst, 1e-12))


def _verify_2d(spec: ExperimentSpec, corrupt: bool, report: VerificationReport) -> None:
    rng = np.random.default_rng(spec.seed)
    radii: dict[int, list[tuple[float, float]]] = {}
    for eps, N in spec.cells():
        tag = f"{spec.case.value} eps={eps:g} N={N}"
        mc, mesh, part, A, _ = _setup_2d(spec.case, eps, N, spec.sigma)
        M_hat = ideal_matrix(A, part)
        if corrupt:
            M_hat = M_hat.tolil()
            M_hat[0, 0] = 0.5 * M_hat[0, 0]  # perturb a kept (diagonal) entry
            M_hat = sp.csr_matrix(M_hat)
        N_hat = M_hat - A
        nmin = float(N_hat.min()) if N_hat.nnz else 0.0
        report.checks.append(Check(f"{tag} N_hat >= 0", nmin >= 0.0, nmin, 0.0))

        P = build_block_preconditioner(A, part, mesh, mc.problem, eps)
        if A.shape[0] <= 2500:
            rho = splitting_radius_report(A, M_hat, max_iters=10000, tol=1e-9)
            report.checks.append(Check(f"{tag} rho(I - M_hat^-1 A) < 1", rho.below_one, rho.rho, 1.0,
                                       "" if rho.converged else "power iteration not converged"))
            radii.setdefault(N, []).append((eps, rho.rho))
            exact = P.with_exact_corner()
            w = rng.standard_normal(A.shape[0])
            err = max_norm(exact(M_hat @ w) - w) / max_norm(w)
            report.checks.append(Check(f"{tag} exact-corner round trip", err <= 1e-11, err, 1e-11))
        h = P.corner
        if h is not None and h.variant is MgVariant.SEMI_X:
            worst = 0.0
            for fine, coarse in zip(h.levels, h.levels[1:]):
                G = (coarse.P.T @ fine.A @ coarse.P).toarray()
                scale = np.abs(G).max()
                worst = max(worst, float(np.abs(coarse.A.toarray() - G).max() / scale))
            report.checks.append(Check(f"{tag} Galerkin coarse operators", worst <= 1e-13, worst, 1e-13))
    for N, pairs in radii.items():
        if len(pairs) < 2:
            continue
        rhos = [rho for _, rho in sorted(pairs, reverse=True)]
        # allow for the power-iteration tolerance
        rises = [b - a * (1 + 1e-6) for a, b in zip(rhos, rhos[1:])]
        worst = max(rises)
        report.checks.append(Check(f"{spec.case.value} N={N} rho non-increasing as eps falls", worst <= 0.0,
                                   worst, 0.0))


def run_verification(spec: ExperimentSpec, corrupt: bool = False) -> VerificationReport:
    """Spectral, splitting and Galerkin checks for every cell of ``spec``.

    ``corrupt`` damages an entry the preconditioner is supposed to keep; it
    exists so the suite can be shown to fail.
    """
    report = VerificationReport()
    if spec.case is Case.ONE_D:
        _verify_1d(spec, corrupt, report)
    else:
        _verify_2d(spec, corrupt, report)
    return report


# --- direct reference -------------------------------------------------------

def banded_reference(A_lex: sp.spmatrix, b_lex: np.ndarray, bandwidth: int) -> np.ndarray:
    """Solve a lexicographically ordered system by banded LU (LAPACK gbsv)."""
    A = sp.dia_matrix(A_lex)
    n = A.shape[0]
    ab = np.zeros((2 * bandwidth + 1, n))
    for off, row in zip(A.offsets, A.data):
        if abs(off) > bandwidth:
            if np.any(row):
                raise ValueError(f"entry outside the band at offset {off}")
            continue
        # dia_matrix stores a[i, i+off] at data[:, i+off]; solve_banded wants ab[u + i - j, j]
        ab[bandwidth - off] = row
    return scipy.linalg.solve_banded((bandwidth, bandwidth), ab, b_lex)


def banded_reference_2d(case: Case, eps: float, N: int, sigma: float = 2.5) -> np.ndarray:
    """Direct solution of the 2D system, returned in region (C, X, Y, I) order."""
    if N > BANDED_MAX_N:
        raise ValueError(f"banded reference is limited to N <= {BANDED_MAX_N}")
    mc = manufactured_case(case.layer_case, eps)
    pr = mc.problem
    mesh = build_shishkin_2d(eps, N, case.layer_case, pr.c1_lower, pr.c2_lower, sigma)
    part = partition_regions(mesh)
    A, b = assemble_upwind_2d(mesh, pr, eps)
    x_lex = banded_reference(A, b, N - 1)
    return part.from_grid(x_lex.reshape(N - 1, N - 1))


def flops_per_iteration(case: Case, eps: float, N: int, sigma: float = 2.5) -> tuple[float, int]:
    """Solve-phase flops divided by FGMRES iterations, and the iteration count."""
    counter = FlopCounter()
    row = run_cell_2d(case, eps, N, sigma, flops=counter)
    if not row.converged:
        raise RuntimeError(f"solve failed at eps={eps}, N={N}: {row.message}")
    return counter.total / row.iterations, row.iterations
