"""Unrestarted GMRES (1D, left-preconditioned) and FGMRES (2D, right-preconditioned).

Both use modified Gram-Schmidt Arnoldi (with a second pass when the new
vector loses most of its norm) and Givens rotations for the least-squares
problem.  The stopping thresholds are tied to the size of the
discretisation error, ``K ln N / N`` in the max norm (1D) and ``10 ln N / N``
in the Euclidean norm (2D).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .linalg import (DOT2_COST, FlopCounter, TridiagonalMatrix, combine_compensated, csr_matvec_compensated,
                     euclid_norm, max_norm)
from .precond1d import Preconditioner1D, apply_M_inverse

Operator = Callable[[np.ndarray], np.ndarray]

# Gram-Schmidt is repeated when the new direction shrinks below this fraction
REORTH_RATIO = 0.7
# below this fraction of its original norm the new direction counts as zero
BREAKDOWN_RATIO = 1e-14


class NormKind(enum.Enum):
    MAX = "max"
    EUCLID = "euclid"


class RuleKind(enum.Enum):
    MAX_NORM_1D = "max-norm-1d"
    EUCLID_2D = "euclid-2d"


@dataclass(frozen=True)
class StoppingRule:
    kind: RuleKind
    threshold: float

    @classmethod
    def max_norm_1d(cls, N: int, K: float = 1.0) -> "StoppingRule":
        return cls(RuleKind.MAX_NORM_1D, K * np.log(N) / N)

    @classmethod
    def euclid_2d(cls, N: int) -> "StoppingRule":
        return cls(RuleKind.EUCLID_2D, 10.0 * np.log(N) / N)

    @property
    def norm(self) -> NormKind:
        return NormKind.MAX if self.kind is RuleKind.MAX_NORM_1D else NormKind.EUCLID


@dataclass
class SolveStats:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    ls_residuals: list[float] = field(default_factory=list)
    orthogonality_error: float = 0.0
    true_residual: float = np.nan


def residual_check(A, x: np.ndarray, b: np.ndarray, norm: NormKind | str = NormKind.EUCLID) -> float:
    """``||b - A x||`` in the requested norm."""
    norm = NormKind(norm)
    r = b - A @ x
    return max_norm(r) if norm is NormKind.MAX else euclid_norm(r)


def _givens(a: float, b: float) -> tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    d = np.hypot(a, b)
    return a / d, b / d


class _Arnoldi:
    """Growing Krylov basis with the Givens-reduced Hessenberg matrix."""

    def __init__(self, r0: np.ndarray, max_iters: int):
        n = r0.size
        self.V = np.zeros((max_iters + 1, n))
        self.H = np.zeros((max_iters + 1, max_iters))
        self.cs = np.zeros(max_iters)
        self.sn = np.zeros(max_iters)
        self.g = np.zeros(max_iters + 1)
        beta = euclid_norm(r0)
        self.g[0] = beta
        self.V[0] = r0 / beta
        self.k = 0
        self.reorthogonalised = 0

    def step(self, w: np.ndarray) -> float:
        """Orthogonalise ``w`` against the basis; returns the new LS residual."""
        k = self.k
        H, V = self.H, self.V
        w_norm = euclid_norm(w)
        for i in range(k + 1):
            H[i, k] = w @ V[i]
            w = w - H[i, k] * V[i]
        H[k + 1, k] = euclid_norm(w)
        if H[k + 1, k] < REORTH_RATIO * w_norm:
            # heavy cancellation: a second pass restores orthogonality
            self.reorthogonalised += 1
            for i in range(k + 1):
                d = w @ V[i]
                H[i, k] += d
                w = w - d * V[i]
            H[k + 1, k] = euclid_norm(w)
        if H[k + 1, k] > BREAKDOWN_RATIO * w_norm:
            V[k + 1] = w / H[k + 1, k]
        else:
            # the Krylov space is invariant; what is left of w is rounding noise
            H[k + 1, k] = 0.0
        for i in range(k):
            a, b = H[i, k], H[i + 1, k]
            H[i, k] = self.cs[i] * a + self.sn[i] * b
            H[i + 1, k] = -self.sn[i] * a + self.cs[i] * b
        c, s = _givens(H[k, k], H[k + 1, k])
        self.cs[k], self.sn[k] = c, s
        H[k, k] = c * H[k, k] + s * H[k + 1, k]
        H[k + 1, k] = 0.0
        self.g[k + 1] = -s * self.g[k]
        self.g[k] = c * self.g[k]
        self.k = k + 1
        return abs(self.g[k + 1])

    @property
    def breakdown(self) -> bool:
        return not np.any(self.V[self.k])

    def coefficients(self) -> np.ndarray:
        k = self.k
        y = np.zeros(k)
        R = self.H[:k, :k]
        for i in range(k - 1, -1, -1):
            y[i] = (self.g[i] - R[i, i + 1:k] @ y[i + 1:]) / R[i, i]
        return y

    def orthogonality_error(self) -> float:
        m = self.k + (0 if self.breakdown else 1)
        V = self.V[:m]
        return float(np.max(np.abs(V @ V.T - np.eye(m)))) if m else 0.0


def gmres_1d(A: TridiagonalMatrix, b: np.ndarray, M: Preconditioner1D, rule: StoppingRule,
             max_iters: int = 200, flops: FlopCounter | None = None) -> tuple[np.ndarray, SolveStats]:
    """Left-preconditioned GMRES on ``M^{-1} A x = M^{-1} b`` from ``x = 0``.

    Convergence is judged on the true residual ``b - A x_k`` in ``rule.norm``,
    formed after every iteration.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    stats = SolveStats()
    res = residual_check(A, x, b, rule.norm)
    stats.residual_history.append(res)
    if res <= rule.threshold or not np.any(b):
        stats.converged = True
        stats.true_residual = res
        stats.wall_time = time.perf_counter() - t0
        return x, stats

    r0 = apply_M_inverse(M, b, flops)
    arn = _Arnoldi(r0, max_iters)
    stats.ls_residuals.append(euclid_norm(r0))
    for _ in range(max_iters):
        w = apply_M_inverse(M, A.matvec(arn.V[arn.k]), flops)
        stats.ls_residuals.append(arn.step(w))
        x = arn.V[:arn.k].T @ arn.coefficients()
        res = residual_check(A, x, b, rule.norm)
        stats.residual_history.append(res)
        if flops is not None:
            flops.add("krylov", 4 * b.size * (arn.k + 2) + 5 * A.n)
        if res <= rule.threshold or arn.breakdown:
            stats.converged = res <= rule.threshold
            break
    stats.iterations = arn.k
    stats.true_residual = stats.residual_history[-1]
    stats.orthogonality_error = arn.orthogonality_error()
    stats.wall_time = time.perf_counter() - t0
    return x, stats


def fgmres_2d(A: sp.csr_matrix, b: np.ndarray, precondition: Operator, rule: StoppingRule,
              max_iters: int = 200, flops: FlopCounter | None = None) -> tuple[np.ndarray, SolveStats]:
    """Flexible GMRES with right preconditioning from ``x = 0``.

    The least-squares residual is tested each iteration; when it meets the
    threshold the true residual is formed once, and iteration continues if
    that check fails.  ``residual_history`` holds the least-squares values
    with the confirmed true residual as its last entry.

    Products with a sparse ``A`` and the final combination of the
    preconditioned directions use compensated summation.  On Shishkin meshes
    the corner rows of ``A`` are of order ``N^2 / eps`` while the rows of
    ``A z`` are modest, and the least-squares coefficients can reach 1e6, so
    plainly rounded products leave a residual floor above the threshold.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = b.size
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        matvec = lambda v: csr_matvec_compensated(A, v, flops)
    else:
        def matvec(v):
            if flops is not None:
                flops.add("matvec", 2 * n * n)
            return A @ v
    stats = SolveStats()
    beta = euclid_norm(b)
    stats.residual_history.append(beta)
    stats.ls_residuals.append(beta)
    if beta <= rule.threshold:
        stats.converged = True
        stats.true_residual = beta
        stats.wall_time = time.perf_counter() - t0
        return np.zeros(n), stats

    arn = _Arnoldi(b, max_iters)
    Z = np.zeros((max_iters, n))

    def solution() -> tuple[np.ndarray, float]:
        x = combine_compensated(Z[:arn.k], arn.coefficients())
        if flops is not None:
            flops.add("krylov", DOT2_COST * n * arn.k + n)
        return x, euclid_norm(b - matvec(x))

    x = np.zeros(n)
    true = beta
    for _ in range(max_iters):
        k = arn.k
        Z[k] = precondition(arn.V[k])
        ls = arn.step(matvec(Z[k]))
        if flops is not None:
            flops.add("krylov", 4 * n * (k + 1) + 3 * n)
        stats.ls_residuals.append(ls)
        stats.residual_history.append(ls)
        if ls <= rule.threshold or arn.breakdown:
            x, true = solution()
            stats.residual_history[-1] = true
            if true <= rule.threshold:
                stats.converged = True
                break
            if arn.breakdown:
                break
    else:
        x, true = solution()
        stats.residual_history[-1] = true
    stats.iterations = arn.k
    stats.true_residual = true
    stats.orthogonality_error = arn.orthogonality_error()
    stats.wall_time = time.perf_counter() - t0
    return x, stats
