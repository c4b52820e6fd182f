"""Boundary-layer preconditioner for the 1D upwind system.

With unknowns split into the layer set L (indices 1..N_L, transition point
included) and the interior set I, the preconditioner keeps A_LL, A_LI, A_IL
and replaces A_II by its upper triangle.  For a tridiagonal A that is just A
with the sub-diagonal zeroed on rows N_L+2 .. N-1, so M is applied with a
single Thomas solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (FactoredTridiagonal, FlopCounter, TridiagonalMatrix, dense_lu_solve,
                     power_iteration, thomas_factor, thomas_solve)
from .mesh import Mesh1D


@dataclass(frozen=True)
class Preconditioner1D:
    matrix: TridiagonalMatrix
    m: FactoredTridiagonal
    n_layer: int


def build_preconditioner_1d(A: TridiagonalMatrix, n_layer: int) -> Preconditioner1D:
    if not 1 <= n_layer < A.n:
        raise ValueError(f"n_layer must lie in [1, {A.n - 1}], got {n_layer}")
    sub = A.sub.copy()
    # sub[k] sits in row k+1 (0-based); rows n_layer+1.. belong to A_II's strict lower part
    sub[n_layer:] = 0.0
    M = A.with_sub(sub)
    return Preconditioner1D(M, thomas_factor(M), n_layer)


def apply_M_inverse(p: Preconditioner1D, r: np.ndarray, flops: FlopCounter | None = None) -> np.ndarray:
    return thomas_solve(p.m, r, flops)


def dropped_part(A: TridiagonalMatrix, p: Preconditioner1D) -> TridiagonalMatrix:
    """``N = M - A`` (non-zero only on the sub-diagonal of the interior block)."""
    z = np.zeros(A.n - 1)
    return TridiagonalMatrix(p.matrix.sub - A.sub, np.zeros(A.n), z)


def alpha_estimate(eps: float, N: int, c_lower: float) -> float:
    """``alpha = 2 (1 - 2 eps ln N / c_lower)``."""
    return 2.0 * (1.0 - 2.0 * eps * np.log(N) / c_lower)


def largest_admissible_alpha(mesh: Mesh1D) -> float:
    """Largest alpha with ``alpha / N <= h_i`` for i = N_L+1 .. N."""
    return mesh.N * float(mesh.h[mesh.transition_index:].min())


@dataclass
class SpectrumReport:
    eps: float
    N: int
    gamma_max: float
    bound: float
    alpha: float
    alpha_mesh: float
    applicable: bool
    converged: bool
    power_iterations: int
    ratio: float  # gamma_max / (eps N / (c_lower alpha))

    @property
    def within_bound(self) -> bool:
        return self.applicable and -1e-12 <= self.gamma_max <= self.bound


def verify_spectrum(A: TridiagonalMatrix, p: Preconditioner1D, eps: float, N: int, c_lower: float,
                    mesh: Mesh1D | None = None, max_iters: int = 20000, tol: float = 1e-10) -> SpectrumReport:
    """Estimate ``rho(I - M^{-1} A)`` and compare with ``8 eps N / (c_lower alpha)``.

    ``I - M^{-1}A = M^{-1}(M - A)`` is applied in the second form; the first
    loses the small eigenvalues to cancellation.
    """
    alpha = alpha_estimate(eps, N, c_lower)
    alpha_mesh = largest_admissible_alpha(mesh) if mesh is not None else np.nan
    applicable = eps * N <= c_lower * alpha / 8.0
    bound = 8.0 * eps * N / (c_lower * alpha)
    Nmat = dropped_part(A, p)

    res = power_iteration(lambda v: apply_M_inverse(p, Nmat.matvec(v)), A.n, max_iters=max_iters, tol=tol)
    ratio = res.value / (eps * N / (c_lower * alpha))
    return SpectrumReport(eps, N, res.value, bound, alpha, alpha_mesh, applicable,
                          res.converged, res.iterations, ratio)


def dense_spectrum(A: TridiagonalMatrix, p: Preconditioner1D) -> np.ndarray:
    """All eigenvalues of ``M^{-1} A`` via the dense oracle (small n only).

    Computed as ``1 - eig(M^{-1} (M - A))``; forming ``M^{-1} A`` directly
    amplifies roundoff by the condition number of A.
    """
    if A.n > 64:
        raise ValueError("dense spectrum is limited to n <= 64")
    G = dense_lu_solve(p.matrix.to_dense(), dropped_part(A, p).to_dense())
    return 1.0 - np.linalg.eigvals(G)


def unit_eigenvector_residuals(A: TridiagonalMatrix, p: Preconditioner1D) -> np.ndarray:
    """``||(M^{-1} A - I) e_k||_inf`` for k = 1..N_L."""
    out = np.empty(p.n_layer)
    e = np.zeros(A.n)
    for k in range(p.n_layer):
        e[k] = 1.0
        z = apply_M_inverse(p, A.matvec(e))
        z[k] -= 1.0
        out[k] = np.max(np.abs(z))
        e[k] = 0.0
    return out


def schur_correction(A: TridiagonalMatrix, n_layer: int) -> tuple[float, float]:
    """``(A_IL A_LL^{-1} A_LI)_{1,1}`` and the bound ``|a_{N_L+1, N_L}|``.

    Uses ``(A_LL^{-1})_{N_L,N_L} = 1 / u_{N_L,N_L}`` from the Thomas factors
    of A_LL.
    """
    nl = n_layer
    A_LL = TridiagonalMatrix(A.sub[:nl - 1], A.diag[:nl], A.sup[:nl - 1])
    u_last = thomas_factor(A_LL).u_diag[-1]
    a_il = A.sub[nl - 1]   # a_{N_L+1, N_L}
    a_li = A.sup[nl - 1]   # a_{N_L, N_L+1}
    return a_il * a_li / u_last, abs(a_il)


def diag_dominance_margin(A: TridiagonalMatrix) -> np.ndarray:
    """``u_ii - |u_{i,i+1}|`` for i = 1..n-1 from the Thomas factors of A."""
    f = thomas_factor(A)
    return f.u_diag[:-1] - np.abs(f.u_sup)
