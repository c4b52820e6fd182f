"""Block upper-triangular preconditioner for the 2D upwind operator.

Unknowns are ordered by region C, X, Y, I (see :mod:`blprecond.mesh`) and
``M z = r`` is solved by back substitution, interior first:

* ``M_II``: upper triangle of ``A_II``, i.e. only the east and north
  couplings are kept, solved by one sweep from the top-right corner.
* ``M_YY``: tridiagonal line solves along lines of constant x, ordered
  right-to-left; the coupling to the east line is kept, the west one dropped.
* ``M_XX``: tridiagonal line solves along lines of constant y, ordered
  top-to-bottom; the coupling to the north line is kept, the south dropped.
* ``M_CC``: corner multigrid (:mod:`blprecond.mgcorner`), or any exact solver.

Off-diagonal blocks above the block diagonal are applied exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .linalg import (FlopCounter, descending_line_sweep, factor_lines, power_iteration,
                     upper_triangular_solve)
from .mesh import LayerCase, Mesh2D, Region, RegionPartition
from .mgcorner import (MgHierarchy, build_fullcoarsen_hierarchy, build_semicoarsen_hierarchy,
                       corner_solve, grid_stencil)
from .discretize import rescale_rows_fd_to_fe
from .problem import Problem2D

CornerSolver = Callable[[np.ndarray], np.ndarray]


@dataclass
class LineSolver:
    """Pre-factored tridiagonal lines plus the coupling to the next line.

    Arrays are (nlines, n): line k is solved after line k+1.
    """

    lower: np.ndarray
    u_diag: np.ndarray
    sup: np.ndarray
    couple: np.ndarray

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rhs)
        descending_line_sweep(self.lower, self.u_diag, self.sup, self.couple, rhs, out)
        return out

    @property
    def flops(self) -> int:
        # forward/backward Thomas plus one coupling update per point
        return 7 * self.u_diag.size


def _line_solver(sub, diag, sup, couple) -> LineSolver:
    sub, diag, sup, couple = (np.ascontiguousarray(a, dtype=float) for a in (sub, diag, sup, couple))
    lower = np.zeros_like(diag)
    u_diag = np.empty_like(diag)
    factor_lines(sub, diag, sup, lower, u_diag)
    if np.any(u_diag <= 0) or not np.all(np.isfinite(u_diag)):
        raise ArithmeticError("edge-line factorisation broke down")
    return LineSolver(lower, u_diag, sup, couple)


@dataclass
class BlockPreconditioner2D:
    partition: RegionPartition
    A: sp.csr_matrix
    M_II: sp.csr_matrix
    lines_Y: LineSolver
    lines_X: LineSolver
    corner: MgHierarchy | None
    couplings: dict[str, sp.csr_matrix]
    corner_solver: CornerSolver | None = None
    flops: FlopCounter | None = None
    cycles: list[int] = field(default_factory=list)

    def apply(self, r: np.ndarray, coverage: np.ndarray | None = None) -> np.ndarray:
        return apply_block_inverse(self, r, coverage)

    __call__ = apply

    def ideal_matrix(self) -> sp.csr_matrix:
        """``M-hat``: the preconditioner with the exact corner block ``A_CC``."""
        return ideal_matrix(self.A, self.partition)

    def with_exact_corner(self) -> "BlockPreconditioner2D":
        """Copy whose corner solve is a sparse LU of ``A_CC``."""
        C = self.partition.corner.slice
        lu = spla.splu(sp.csc_matrix(self.A[C, C]))
        return BlockPreconditioner2D(self.partition, self.A, self.M_II, self.lines_Y, self.lines_X,
                                     self.corner, self.couplings, lu.solve, self.flops)


def _block(A: sp.csr_matrix, rows: Region, cols: Region) -> sp.csr_matrix:
    B = sp.csr_matrix(A[rows.slice, cols.slice])
    B.sort_indices()
    return B


def _stencil(A: sp.csr_matrix, reg: Region) -> np.ndarray:
    return grid_stencil(_block(A, reg, reg), reg.nx, reg.ny)


def build_block_preconditioner(A: sp.csr_matrix, partition: RegionPartition, mesh: Mesh2D,
                               problem: Problem2D, eps: float, layer_case: LayerCase | None = None,
                               corner_solver: CornerSolver | None = None,
                               max_cycles: int = 20, corner_norm: str = "l2") -> BlockPreconditioner2D:
    """Extract and factor the diagonal blocks and build the corner hierarchy.

    ``corner_solver`` replaces the multigrid corner (no hierarchy is built).
    """
    layer_case = layer_case or mesh.layer_case
    A = sp.csr_matrix(A)
    A.sort_indices()
    C, X, Y, I = partition.regions
    covered = sum(reg.size for reg in partition.regions)
    if covered != A.shape[0]:
        raise ValueError(f"partition covers {covered} unknowns, matrix has {A.shape[0]}")

    M_II = sp.csr_matrix(sp.triu(_block(A, I, I)))
    M_II.sort_indices()

    # Y: lines of constant x -> transpose grid arrays to (nx, ny); coupling is east
    sY = _stencil(A, Y)
    lines_Y = _line_solver(sY[0, 1].T, sY[1, 1].T, sY[2, 1].T, sY[1, 2].T)
    # X: lines of constant y, arrays are already (ny, nx); coupling is north
    sX = _stencil(A, X)
    lines_X = _line_solver(sX[1, 0], sX[1, 1], sX[1, 2], sX[2, 1])

    couplings = {name: _block(A, a, b) for name, a, b in (
        ("CX", C, X), ("CY", C, Y), ("CI", C, I), ("XY", X, Y), ("XI", X, I), ("YI", Y, I))}

    corner = None
    if corner_solver is None:
        A_cc = _block(A, C, C)
        if layer_case is LayerCase.PARABOLIC_EXPONENTIAL:
            _, scaling = rescale_rows_fd_to_fe(A_cc, mesh.x_mesh.hbar[:C.nx], mesh.y_mesh.hbar[:C.ny])
            corner = build_semicoarsen_hierarchy(A_cc, C.nx, C.ny, scaling, 1e-2, max_cycles)
        else:
            corner = build_fullcoarsen_hierarchy(problem, mesh, eps, A_cc, 1e-3, max_cycles)
        corner.norm = corner_norm
    return BlockPreconditioner2D(partition, A, M_II, lines_Y, lines_X, corner, couplings, corner_solver)


def apply_block_inverse(p: BlockPreconditioner2D, r: np.ndarray,
                        coverage: np.ndarray | None = None) -> np.ndarray:
    """Solve ``M z = r`` region by region: I, then Y, X and finally C."""
    C, X, Y, I = p.partition.regions
    cp = p.couplings
    fl = p.flops
    r = np.asarray(r, dtype=float)
    z = np.empty_like(r)

    zI = np.empty(I.size)
    upper_triangular_solve(p.M_II.indptr, p.M_II.indices, p.M_II.data, np.ascontiguousarray(r[I.slice]), zI)
    z[I.slice] = zI

    rY = r[Y.slice] - cp["YI"] @ zI
    zY = p.lines_Y.solve(np.ascontiguousarray(rY.reshape(Y.ny, Y.nx).T)).T.ravel()
    z[Y.slice] = zY

    rX = r[X.slice] - cp["XY"] @ zY - cp["XI"] @ zI
    zX = p.lines_X.solve(rX.reshape(X.ny, X.nx)).ravel()
    z[X.slice] = zX

    rC = r[C.slice] - cp["CX"] @ zX - cp["CY"] @ zY - cp["CI"] @ zI
    if p.corner_solver is not None:
        z[C.slice] = p.corner_solver(rC)
    else:
        zC, cycles = corner_solve(p.corner, rC, fl)
        p.cycles.append(cycles)
        z[C.slice] = zC

    if fl is not None:
        fl.add("precond", 2 * p.M_II.nnz + p.lines_Y.flops + p.lines_X.flops
               + sum(2 * B.nnz for B in cp.values()) + 3 * (Y.size + X.size + C.size))
    if coverage is not None:
        for reg in (I, Y, X, C):
            coverage[reg.slice] += 1
    return z


def dropped_mask(partition: RegionPartition) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Predicate on (row, col) global indices: True where M-hat drops ``a_rc``."""
    C, X, Y, I = partition.regions
    region_of = np.empty(partition.n, dtype=np.int8)
    for k, reg in enumerate((C, X, Y, I)):
        region_of[reg.slice] = k
    pos = np.empty((partition.n, 2), dtype=np.int64)
    jj, ii = np.nonzero(np.ones_like(partition.global_index, dtype=bool))
    pos[partition.global_index[jj, ii]] = np.column_stack([ii, jj])

    def is_dropped(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rr, rc = region_of[rows], region_of[cols]
        di = pos[cols, 0] - pos[rows, 0]
        dj = pos[cols, 1] - pos[rows, 1]
        lower_block = rc < rr
        same = rr == rc
        drop_I = same & (rr == 3) & ((di < 0) | (dj < 0))
        drop_Y = same & (rr == 2) & (di < 0)
        drop_X = same & (rr == 1) & (dj < 0)
        return lower_block | drop_I | drop_Y | drop_X

    return is_dropped


def ideal_matrix(A: sp.csr_matrix, partition: RegionPartition) -> sp.csr_matrix:
    """``M-hat = A`` minus the entries the block preconditioner discards."""
    coo = sp.coo_matrix(A)
    keep = ~dropped_mask(partition)(coo.row, coo.col)
    M = sp.csr_matrix((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=A.shape)
    M.sort_indices()
    return M


@dataclass
class SplittingReport:
    rho: float
    converged: bool
    iterations: int

    @property
    def below_one(self) -> bool:
        return self.rho < 1.0


def splitting_radius_report(A: sp.csr_matrix, M_hat: sp.csr_matrix, max_iters: int = 5000,
                            tol: float = 1e-10) -> SplittingReport:
    """Power-iteration estimate of ``rho(I - M_hat^{-1} A) = rho(M_hat^{-1} N_hat)``.

    ``N_hat = M_hat - A`` is entrywise non-negative for a regular splitting,
    so the dominant eigenvalue is the Perron root and the all-ones seed is
    not orthogonal to its eigenvector.
    """
    n = A.shape[0]
    if n > 2500:
        raise ValueError("splitting report is limited to n <= 2500")
    N_hat = sp.csr_matrix(M_hat - A)
    N_hat.eliminate_zeros()
    if N_hat.nnz == 0:
        return SplittingReport(0.0, True, 0)
    lu = spla.splu(sp.csc_matrix(M_hat))
    res = power_iteration(lambda v: lu.solve(N_hat @ v), n, max_iters=max_iters, tol=tol)
    return SplittingReport(res.value, res.converged, res.iterations)
