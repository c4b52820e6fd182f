"""Geometric multigrid for the corner block of the 2D operator.

Two variants:

* ``SEMI_X`` -- factor-2 coarsening in x only, operator-induced interpolation
  from the north-south collapsed stencil, Galerkin coarse operators ``P^T A P``.
  Used when the corner is strongly anisotropic (parabolic + exponential layers).
* ``FULL`` -- factor-2 coarsening in both directions, bilinear interpolation
  from mesh coordinates, coarse operators by rediscretisation on a mesh
  whose layer parts are halved (the spacing beyond the transition points is
  left alone, so the transition rows keep their scale).  Used for two
  exponential layers.

Both work on the row-rescaled operator (rows of node (x_i, y_j) multiplied by
``hbar_i kbar_j``) so that ``P^T`` is a sensible restriction, relax with one
point Gauss-Seidel sweep ordered from the top-right to the bottom-left, and
approximate the coarsest solve by four such sweeps.  Grids are numbered
x-fastest and the block is closed by homogeneous Dirichlet values.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .discretize import rescale_rows_fd_to_fe, stencil_to_csr, upwind_stencil_2d
from .linalg import FlopCounter, reverse_gauss_seidel
from .mesh import Mesh2D
from .problem import Problem2D

COARSEST = 4
COARSE_SWEEPS = 4


class MgVariant(enum.Enum):
    SEMI_X = "semi-x"
    FULL = "full"


class DegenerateStencilError(ValueError):
    pass


class CornerSolveError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass
class MgLevel:
    A: sp.csr_matrix
    nx: int
    ny: int
    P: sp.csr_matrix | None = None  # interpolation from this level to the next finer one

    @property
    def n(self) -> int:
        return self.nx * self.ny


@dataclass
class MgHierarchy:
    levels: list[MgLevel]
    variant: MgVariant
    reduction_target: float
    scaling: np.ndarray
    A_fd: sp.csr_matrix  # unscaled finest operator
    max_cycles: int = 20
    norm: str = "l2"
    cycle_log: list[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.levels[0].n


def grid_stencil(A: sp.csr_matrix, nx: int, ny: int) -> np.ndarray:
    """Unpack a CSR matrix on an ``nx x ny`` grid into stencils.

    Returns ``s`` with shape (3, 3, ny, nx); ``s[dj+1, di+1, j, i]`` is the
    coefficient coupling node (i, j) to (i+di, j+dj).
    """
    A = sp.csr_matrix(A)
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    cols = A.indices
    jr, ir = np.divmod(rows, nx)
    jc, ic = np.divmod(cols, nx)
    di, dj = ic - ir, jc - jr
    if np.any(np.abs(di) > 1) or np.any(np.abs(dj) > 1):
        raise ValueError("matrix is not a nine-point stencil on this grid")
    s = np.zeros((3, 3, ny, nx))
    np.add.at(s, (dj + 1, di + 1, jr, ir), A.data)
    return s


def collapse_interpolation_weights(stencil: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights from the west and east coarse neighbours of a fine point.

    The rows of ``stencil`` (shape (3, 3, ...), indexed [dj+1, di+1]) are
    lumped in the north-south direction:
    ``w_west = -sum_dj s[dj, west] / sum_dj s[dj, centre]``, likewise east.
    """
    s = np.asarray(stencil, dtype=float)
    centre = s[0, 1] + s[1, 1] + s[2, 1]
    if np.any(centre <= 0):
        raise DegenerateStencilError("collapsed stencil has a non-positive centre")
    w_west = -(s[0, 0] + s[1, 0] + s[2, 0]) / centre
    w_east = -(s[0, 2] + s[1, 2] + s[2, 2]) / centre
    return w_west, w_east


def semi_x_interpolation(A: sp.csr_matrix, nx: int, ny: int) -> sp.csr_matrix:
    """Operator-induced interpolation for x-semicoarsening.

    Fine points with odd 0-based x-index are kept as coarse points; the
    others interpolate from their west/east neighbours.
    """
    nxc = nx // 2
    s = grid_stencil(A, nx, ny)
    rows, cols, vals = [], [], []
    jj = np.arange(ny)
    for ix in range(nx):
        fine = jj * nx + ix
        if ix % 2 == 1:
            rows.append(fine)
            cols.append(jj * nxc + (ix - 1) // 2)
            vals.append(np.ones(ny))
            continue
        w_west, w_east = collapse_interpolation_weights(s[:, :, :, ix])
        if ix - 1 >= 0:
            rows.append(fine)
            cols.append(jj * nxc + (ix - 2) // 2)
            vals.append(w_west)
        if ix + 1 < nx:
            rows.append(fine)
            cols.append(jj * nxc + ix // 2)
            vals.append(w_east)
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nx * ny, nxc * ny)).tocsr()
    P.sort_indices()
    return P


def linear_interpolation_1d(coords: np.ndarray) -> sp.csr_matrix:
    """Piecewise-linear interpolation from every other point of ``coords``.

    ``coords`` are the fine interior coordinates (even count); the left
    boundary sits at 0 and carries a zero value.  Points with odd 0-based
    index are coarse points.
    """
    n = coords.size
    if n % 2:
        raise ValueError("fine line must have an even number of points")
    nc = n // 2
    rows, cols, vals = [], [], []
    for m in range(n):
        if m % 2 == 1:
            rows.append(m); cols.append((m - 1) // 2); vals.append(1.0)
            continue
        x_w = coords[m - 1] if m > 0 else 0.0
        x_e = coords[m + 1]
        w_w = (x_e - coords[m]) / (x_e - x_w)
        if m > 0:
            rows.append(m); cols.append((m - 2) // 2); vals.append(w_w)
        rows.append(m); cols.append(m // 2); vals.append(1.0 - w_w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, nc))


def _galerkin(P: sp.csr_matrix, A: sp.csr_matrix) -> sp.csr_matrix:
    Ac = sp.csr_matrix(P.T @ (A @ P))
    Ac.sort_indices()
    return Ac


def _check_dims(nx: int, ny: int) -> None:
    if nx < 1 or ny < 1:
        raise ValueError("empty corner grid")


def build_semicoarsen_hierarchy(A_cc: sp.csr_matrix, nx: int, ny: int, scaling: np.ndarray,
                                reduction_target: float = 1e-2, max_cycles: int = 20) -> MgHierarchy:
    """Galerkin x-semicoarsening hierarchy on the row-rescaled corner block."""
    _check_dims(nx, ny)
    A_fd = sp.csr_matrix(A_cc)
    A = sp.csr_matrix(sp.diags(scaling) @ A_fd)
    A.sort_indices()
    levels = [MgLevel(A, nx, ny)]
    while levels[-1].nx > COARSEST:
        fine = levels[-1]
        P = semi_x_interpolation(fine.A, fine.nx, fine.ny)
        levels.append(MgLevel(_galerkin(P, fine.A), fine.nx // 2, fine.ny, P))
    return MgHierarchy(levels, MgVariant.SEMI_X, reduction_target, scaling, A_fd, max_cycles)


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def corner_operator(mesh: Mesh2D, problem: Problem2D, eps: float) -> tuple[sp.csr_matrix, np.ndarray]:
    """Corner block of the upwind operator on ``mesh`` and its row scaling."""
    tx, ty = mesh.x_mesh.transition_index, mesh.y_mesh.transition_index
    st = upwind_stencil_2d(mesh, problem, eps)
    sub = type(st)(*(a[:ty, :tx] for a in (st.center, st.west, st.east, st.south, st.north, st.rhs)))
    A = stencil_to_csr(sub, np.arange(tx * ty).reshape(ty, tx))
    _, scaling = rescale_rows_fd_to_fe(A, mesh.x_mesh.hbar[:tx], mesh.y_mesh.hbar[:ty])
    return A, scaling


def build_fullcoarsen_hierarchy(problem: Problem2D, mesh: Mesh2D, eps: float,
                                A_cc: sp.csr_matrix | None = None,
                                reduction_target: float = 1e-3, max_cycles: int = 20) -> MgHierarchy:
    """Full-coarsening hierarchy with rediscretised coarse operators.

    Level ``l`` is the corner block of the upwind operator on the mesh whose
    layer intervals have been halved ``l`` times (:meth:`Mesh2D.coarsen_corner`),
    row-rescaled by that mesh's ``hbar kbar``.  Decimating the whole mesh
    instead would double the outer spacing and with it the scaled transition
    rows, which are then twice their Galerkin counterparts and cost a factor
    of three in convergence rate.  ``A_cc`` overrides the finest operator.
    """
    tx, ty = mesh.x_mesh.transition_index, mesh.y_mesh.transition_index
    if not (_is_pow2(tx) and _is_pow2(ty)):
        raise ValueError(f"full coarsening needs power-of-two corner dims, got {tx} x {ty}")
    A_fd, scaling = corner_operator(mesh, problem, eps)
    if A_cc is not None:
        A_fd = sp.csr_matrix(A_cc)
    A = sp.csr_matrix(sp.diags(scaling) @ A_fd)
    A.sort_indices()
    levels = [MgLevel(A, tx, ty)]
    m = mesh
    while levels[-1].nx > COARSEST or levels[-1].ny > COARSEST:
        fine = levels[-1]
        if fine.nx < 2 or fine.ny < 2:
            break
        xs = m.x_mesh.points[1:fine.nx + 1]
        ys = m.y_mesh.points[1:fine.ny + 1]
        P = sp.csr_matrix(sp.kron(linear_interpolation_1d(ys), linear_interpolation_1d(xs)))
        P.sort_indices()
        m = m.coarsen_corner()
        Ac, sc = corner_operator(m, problem, eps)
        Ac = sp.csr_matrix(sp.diags(sc) @ Ac)
        Ac.sort_indices()
        levels.append(MgLevel(Ac, fine.nx // 2, fine.ny // 2, P))
    return MgHierarchy(levels, MgVariant.FULL, reduction_target, scaling, A_fd, max_cycles)


def relax(level: MgLevel, x: np.ndarray, b: np.ndarray, sweeps: int = 1,
          flops: FlopCounter | None = None) -> None:
    A = level.A
    for _ in range(sweeps):
        reverse_gauss_seidel(A.indptr, A.indices, A.data, x, b)
    if flops is not None:
        flops.add("mg", 2 * A.nnz * sweeps)


def _vcycle(levels: list[MgLevel], l: int, x: np.ndarray, b: np.ndarray, flops: FlopCounter | None) -> None:
    lev = levels[l]
    if l == len(levels) - 1:
        relax(lev, x, b, COARSE_SWEEPS, flops)
        return
    relax(lev, x, b, 1, flops)
    coarse = levels[l + 1]
    res = b - lev.A @ x
    bc = coarse.P.T @ res
    xc = np.zeros(coarse.n)
    _vcycle(levels, l + 1, xc, bc, flops)
    x += coarse.P @ xc
    relax(lev, x, b, 1, flops)
    if flops is not None:
        flops.add("mg", 2 * lev.A.nnz + lev.n + 4 * coarse.P.nnz + lev.n)


def vcycle(h: MgHierarchy, x: np.ndarray, b: np.ndarray, flops: FlopCounter | None = None) -> None:
    """One V(1,1) cycle on the rescaled system, updating ``x`` in place."""
    _vcycle(h.levels, 0, x, b, flops)


def _norm(v: np.ndarray, kind: str) -> float:
    return float(np.max(np.abs(v))) if kind == "max" else float(np.linalg.norm(v))


def corner_solve(h: MgHierarchy, r: np.ndarray, flops: FlopCounter | None = None) -> tuple[np.ndarray, int]:
    """Cycle from a zero guess until the rescaled residual has dropped by ``target``.

    The test is ``||D (r - A_cc z)|| <= target ||D r||`` with ``D`` the row
    scaling, i.e. it is made on the system the cycles actually solve.  The
    unscaled rows differ in size by a factor of order ``1/eps`` across the
    transition lines, so an unscaled norm measures little beyond those rows.
    Raises :class:`CornerSolveError` after ``h.max_cycles`` cycles.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (h.n,):
        raise ValueError(f"corner residual has shape {r.shape}, expected ({h.n},)")
    z = np.zeros(h.n)
    b = h.scaling * r
    r0 = _norm(b, h.norm)
    if r0 == 0.0:
        h.cycle_log.append(0)
        return z, 0
    A = h.levels[0].A
    history = [r0]
    for cycle in range(1, h.max_cycles + 1):
        vcycle(h, z, b, flops)
        res = b - A @ z
        if flops is not None:
            flops.add("mg", 2 * A.nnz + 2 * h.n)
        history.append(_norm(res, h.norm))
        if history[-1] <= h.reduction_target * r0:
            h.cycle_log.append(cycle)
            return z, cycle
    raise CornerSolveError(f"corner multigrid missed its target after {h.max_cycles} cycles", history)


def dump_stencils(h: MgHierarchy, path: str | Path) -> None:
    """CSV with one line per (level, i, j): the nine coefficients, SW to NE."""
    labels = [f"s_{dj}_{di}" for dj in (-1, 0, 1) for di in (-1, 0, 1)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "i", "j", *labels])
        for l, lev in enumerate(h.levels):
            s = grid_stencil(lev.A, lev.nx, lev.ny)
            for j in range(lev.ny):
                for i in range(lev.nx):
                    w.writerow([l, i + 1, j + 1, *(f"{v:.17g}" for v in s[:, :, j, i].ravel())])
