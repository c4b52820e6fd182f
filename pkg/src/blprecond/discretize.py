"""Finite-difference assembly on Shishkin meshes.

Homogeneous Dirichlet values are eliminated, so a 1D mesh with N intervals
gives N-1 unknowns and a 2D mesh gives (N-1)^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg import TridiagonalMatrix
from .mesh import Mesh1D, Mesh2D, RegionPartition
from .problem import Problem1D, Problem2D

__all__ = [
    "TridiagonalMatrix", "Stencil2D", "assemble_upwind_1d", "assemble_central_1d",
    "upwind_stencil_2d", "assemble_upwind_2d", "stencil_to_csr",
    "rescale_rows_fd_to_fe", "write_matrix_market",
]


def _coefficients_1d(mesh: Mesh1D, problem: Problem1D):
    x = mesh.interior
    problem.check_coefficients(x)
    c = np.broadcast_to(problem.c(x), x.shape).astype(float)
    r = np.broadcast_to(problem.r(x), x.shape).astype(float)
    f = np.broadcast_to(problem.f(x), x.shape).astype(float)
    return c, r, f


def assemble_upwind_1d(mesh: Mesh1D, problem: Problem1D, eps: float) -> tuple[TridiagonalMatrix, np.ndarray]:
    """Upwind scheme; row i is
    ``[-eps/(h_i hb_i), eps/hb_i (1/h_i + 1/h_{i+1}) + c_i/h_{i+1} + r_i,
    -eps/(h_{i+1} hb_i) - c_i/h_{i+1}]``."""
    c, r, f = _coefficients_1d(mesh, problem)
    h = mesh.h
    hl, hr, hb = h[:-1], h[1:], mesh.hbar
    west = -eps / (hl * hb)
    east = -eps / (hr * hb) - c / hr
    diag = eps / hb * (1.0 / hl + 1.0 / hr) + c / hr + r
    return TridiagonalMatrix(west[1:].copy(), diag, east[:-1].copy()), f.copy()


def assemble_central_1d(mesh: Mesh1D, problem: Problem1D, eps: float) -> tuple[TridiagonalMatrix, np.ndarray]:
    """Centred scheme; only an M-matrix when ``eps >= c_i h_i / 2``.

    The sub-diagonal entry ``-eps/(h_i hb_i) + c_i/(2 hb_i)`` turns positive
    exactly when ``eps < c_i h_i / 2``.
    """
    c, r, f = _coefficients_1d(mesh, problem)
    h = mesh.h
    hl, hr, hb = h[:-1], h[1:], mesh.hbar
    west = -eps / (hl * hb) + c / (2.0 * hb)
    east = -eps / (hr * hb) - c / (2.0 * hb)
    diag = eps / hb * (1.0 / hl + 1.0 / hr) + r
    return TridiagonalMatrix(west[1:].copy(), diag, east[:-1].copy()), f.copy()


@dataclass(frozen=True)
class Stencil2D:
    """Five-point coefficients on the interior grid, arrays indexed [j-1, i-1].

    Entries that would couple to a boundary node are kept in the arrays but
    dropped by :func:`stencil_to_csr`.
    """

    center: np.ndarray
    west: np.ndarray
    east: np.ndarray
    south: np.ndarray
    north: np.ndarray
    rhs: np.ndarray


def upwind_stencil_2d(mesh: Mesh2D, problem: Problem2D, eps: float) -> Stencil2D:
    xm, ym = mesh.x_mesh, mesh.y_mesh
    X, Y = np.meshgrid(xm.interior, ym.interior)  # [j, i]
    problem.check_coefficients(X, Y)
    c1 = np.broadcast_to(problem.c1(X, Y), X.shape)
    c2 = np.broadcast_to(problem.c2(X, Y), X.shape)
    r = np.broadcast_to(problem.r(X, Y), X.shape)
    f = np.broadcast_to(problem.f(X, Y), X.shape).astype(float)

    h, k = xm.h, ym.h
    hl, hr, hb = h[None, :-1], h[None, 1:], xm.hbar[None, :]
    kl, kr, kb = k[:-1, None], k[1:, None], ym.hbar[:, None]
    shape = X.shape
    west = np.broadcast_to(-eps / (hb * hl), shape).copy()
    east = -eps / (hb * hr) - c1 / hr
    south = np.broadcast_to(-eps / (kb * kl), shape).copy()
    north = -eps / (kb * kr) - c2 / kr
    center = (eps / hb * (1.0 / hl + 1.0 / hr) + eps / kb * (1.0 / kl + 1.0 / kr)
              + c1 / hr + c2 / kr + r)
    return Stencil2D(center, west, east, south, north, f.copy())


def stencil_to_csr(st: Stencil2D, numbering: np.ndarray) -> sp.csr_matrix:
    """Scatter a five-point stencil into CSR under ``numbering[j, i]``.

    Column indices within each row are sorted; boundary couplings are omitted.
    """
    ny, nx = numbering.shape
    rows = [numbering.ravel()]
    cols = [numbering.ravel()]
    vals = [st.center.ravel()]
    for coef, dj, di in ((st.west, 0, -1), (st.east, 0, 1), (st.south, -1, 0), (st.north, 1, 0)):
        js = slice(max(0, -dj), ny - max(0, dj))
        is_ = slice(max(0, -di), nx - max(0, di))
        jt = slice(js.start + dj, js.stop + dj)
        it = slice(is_.start + di, is_.stop + di)
        rows.append(numbering[js, is_].ravel())
        cols.append(numbering[jt, it].ravel())
        vals.append(coef[js, is_].ravel())
    n = numbering.size
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sort_indices()
    return A


def assemble_upwind_2d(mesh: Mesh2D, problem: Problem2D, eps: float,
                       ordering: RegionPartition | None = None) -> tuple[sp.csr_matrix, np.ndarray]:
    """Upwind five-point operator and load vector.

    With ``ordering`` the unknowns follow the region blocks C, X, Y, I;
    otherwise plain lexicographic (x fastest) order is used.
    """
    st = upwind_stencil_2d(mesh, problem, eps)
    n1 = mesh.N - 1
    if ordering is None:
        numbering = np.arange(n1 * n1).reshape(n1, n1)
    else:
        numbering = ordering.global_index
    A = stencil_to_csr(st, numbering)
    b = np.empty(n1 * n1)
    b[numbering.ravel()] = st.rhs.ravel()
    return A, b


def rescale_rows_fd_to_fe(block: sp.spmatrix, hbar: np.ndarray, kbar: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Multiply the row of node (x_i, y_j) by ``hbar_i * kbar_j``.

    Rows are assumed x-fastest over a ``len(kbar) x len(hbar)`` grid.  Returns
    the rescaled block and the row-scaling vector.
    """
    scaling = np.outer(kbar, hbar).ravel()
    if scaling.size != block.shape[0]:
        raise ValueError("mesh widths do not match the block size")
    return sp.csr_matrix(sp.diags(scaling) @ block), scaling


def write_matrix_market(path: str | Path, A) -> None:
    """Write ``A`` in coordinate MatrixMarket format (1-based indices)."""
    if isinstance(A, TridiagonalMatrix):
        A = A.to_csr()
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), field="real", symmetry="general")
