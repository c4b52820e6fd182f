"""Linear-algebra kernels: Thomas solves, sparse sweeps, a dense LU oracle,
power iteration, and a flop counter used for the cost checks.

The inner loops are compiled with numba; everything else is numpy/scipy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numba import njit


class FactorizationError(ArithmeticError):
    pass


class FlopCounter:
    """Accumulates floating-point operation counts by category."""

    def __init__(self):
        self.counts: dict[str, int] = {}

    def add(self, kind: str, n: int) -> None:
        self.counts[kind] = self.counts.get(kind, 0) + int(n)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def reset(self) -> None:
        self.counts.clear()


def _count(flops: FlopCounter | None, kind: str, n: int) -> None:
    if flops is not None:
        flops.add(kind, n)


# --- tridiagonal ------------------------------------------------------------

@dataclass(frozen=True)
class TridiagonalMatrix:
    """Square tridiagonal matrix; ``sub[k] = a[k+1, k]``, ``sup[k] = a[k, k+1]``."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        n = self.diag.size
        if self.sub.size != n - 1 or self.sup.size != n - 1:
            raise ValueError("off-diagonals must have length n-1")

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: {x.shape[0]} vs {self.n}")
        y = self.diag * x
        y[1:] += self.sub * x[:-1]
        y[:-1] += self.sup * x[1:]
        return y

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def to_csr(self) -> sp.csr_matrix:
        return sp.diags([self.sub, self.diag, self.sup], [-1, 0, 1], format="csr")

    def with_sub(self, sub: np.ndarray) -> "TridiagonalMatrix":
        return TridiagonalMatrix(np.asarray(sub, dtype=float), self.diag, self.sup)


@dataclass(frozen=True)
class FactoredTridiagonal:
    """``A = L U`` with unit lower bidiagonal ``L`` (multipliers ``lower``)
    and upper bidiagonal ``U`` (diagonal ``u_diag``, super-diagonal ``u_sup``)."""

    lower: np.ndarray
    u_diag: np.ndarray
    u_sup: np.ndarray

    @property
    def n(self) -> int:
        return self.u_diag.size


@njit(cache=True)
def _thomas_factor(sub, diag, sup, lower, u_diag):
    n = diag.size
    u_diag[0] = diag[0]
    for i in range(1, n):
        lower[i - 1] = sub[i - 1] / u_diag[i - 1]
        u_diag[i] = diag[i] - lower[i - 1] * sup[i - 1]


@njit(cache=True)
def _thomas_solve(lower, u_diag, u_sup, rhs, out):
    n = u_diag.size
    out[0] = rhs[0]
    for i in range(1, n):
        out[i] = rhs[i] - lower[i - 1] * out[i - 1]
    out[n - 1] /= u_diag[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = (out[i] - u_sup[i] * out[i + 1]) / u_diag[i]


def thomas_factor(t: TridiagonalMatrix) -> FactoredTridiagonal:
    """LU-factor a tridiagonal matrix without pivoting."""
    lower = np.empty(max(t.n - 1, 0))
    u_diag = np.empty(t.n)
    _thomas_factor(np.ascontiguousarray(t.sub, dtype=float), np.ascontiguousarray(t.diag, dtype=float),
                   np.ascontiguousarray(t.sup, dtype=float), lower, u_diag)
    if not np.all(np.isfinite(u_diag)) or np.any(u_diag == 0):
        bad = int(np.flatnonzero(~np.isfinite(u_diag) | (u_diag == 0))[0])
        raise FactorizationError(f"zero or non-finite pivot at row {bad}")
    return FactoredTridiagonal(lower, u_diag, np.array(t.sup, dtype=float))


def thomas_solve(f: FactoredTridiagonal, rhs: np.ndarray, flops: FlopCounter | None = None) -> np.ndarray:
    rhs = np.ascontiguousarray(rhs, dtype=float)
    if rhs.shape != (f.n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({f.n},)")
    out = np.empty(f.n)
    _thomas_solve(f.lower, f.u_diag, f.u_sup, rhs, out)
    _count(flops, "thomas", 5 * f.n)
    return out


@njit(cache=True)
def factor_lines(sub, diag, sup, lower, u_diag):
    """Thomas-factor each row of (nlines, n) coefficient arrays in place.

    ``sub[k, m]`` couples point m to m-1 (``sub[k, 0]`` unused), ``sup[k, m]``
    couples m to m+1 (``sup[k, n-1]`` unused).
    """
    nl, n = diag.shape
    for k in range(nl):
        u_diag[k, 0] = diag[k, 0]
        for m in range(1, n):
            lower[k, m] = sub[k, m] / u_diag[k, m - 1]
            u_diag[k, m] = diag[k, m] - lower[k, m] * sup[k, m - 1]


@njit(cache=True)
def descending_line_sweep(lower, u_diag, sup, couple, rhs, out):
    """Block back-substitution over lines k = nlines-1 .. 0.

    Line k is solved with the right-hand side ``rhs[k] - couple[k] * out[k+1]``
    (the coupling to the already-solved line above it), using the factors
    from :func:`factor_lines`.
    """
    nl, n = u_diag.shape
    for k in range(nl - 1, -1, -1):
        for m in range(n):
            b = rhs[k, m]
            if k + 1 < nl:
                b -= couple[k, m] * out[k + 1, m]
            if m > 0:
                b -= lower[k, m] * out[k, m - 1]
            out[k, m] = b
        out[k, n - 1] /= u_diag[k, n - 1]
        for m in range(n - 2, -1, -1):
            out[k, m] = (out[k, m] - sup[k, m] * out[k, m + 1]) / u_diag[k, m]


# --- sparse kernels ---------------------------------------------------------

def csr_matvec(A: sp.csr_matrix, x: np.ndarray, flops: FlopCounter | None = None) -> np.ndarray:
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    _count(flops, "matvec", 2 * A.nnz)
    return A @ x


@njit(cache=True)
def upper_triangular_solve(indptr, indices, data, b, out):
    """Back substitution with the upper triangle (incl. diagonal) of a CSR matrix."""
    n = b.size
    for i in range(n - 1, -1, -1):
        s = b[i]
        d = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j > i:
                s -= data[p] * out[j]
            elif j == i:
                d = data[p]
        out[i] = s / d


@njit(cache=True)
def reverse_gauss_seidel(indptr, indices, data, x, b):
    """One in-place point Gauss-Seidel sweep visiting rows n-1 .. 0."""
    n = b.size
    for i in range(n - 1, -1, -1):
        s = b[i]
        d = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j == i:
                d = data[p]
            else:
                s -= data[p] * x[j]
        x[i] = s / d


def max_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def euclid_norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


# --- dense oracle -----------------------------------------------------------

@dataclass(frozen=True)
class DenseLU:
    """``P A = L U`` packed in one array (unit-lower L below the diagonal)."""

    lu: np.ndarray
    perm: np.ndarray

    @property
    def u_diag(self) -> np.ndarray:
        return np.diag(self.lu).copy()

    def solve(self, b: np.ndarray) -> np.ndarray:
        lu = self.lu
        n = lu.shape[0]
        y = np.array(b, dtype=float)[self.perm]
        for k in range(n):
            y[k + 1:] -= np.outer(lu[k + 1:, k], y[k]) if y.ndim > 1 else lu[k + 1:, k] * y[k]
        for k in range(n - 1, -1, -1):
            y[k] /= lu[k, k]
            y[:k] -= np.outer(lu[:k, k], y[k]) if y.ndim > 1 else lu[:k, k] * y[k]
        return y


def dense_lu_factor(A: np.ndarray, pivoting: bool = True) -> DenseLU:
    """Right-looking Gaussian elimination, optionally with partial pivoting."""
    lu = np.array(A, dtype=float)
    n = lu.shape[0]
    if lu.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > 4096:
        raise ValueError("dense oracle is limited to n <= 4096")
    perm = np.arange(n)
    scale = np.max(np.abs(lu)) if n else 1.0
    for k in range(n):
        if pivoting:
            p = k + int(np.argmax(np.abs(lu[k:, k])))
            if p != k:
                lu[[k, p]] = lu[[p, k]]
                perm[[k, p]] = perm[[p, k]]
        piv = lu[k, k]
        if not np.isfinite(piv) or abs(piv) <= np.finfo(float).eps * scale * 1e-3:
            raise FactorizationError(f"matrix is singular to working precision (pivot {k})")
        lu[k + 1:, k] /= piv
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return DenseLU(lu, perm)


def dense_lu_solve(A: np.ndarray, b: np.ndarray, pivoting: bool = True) -> np.ndarray:
    return dense_lu_factor(A, pivoting).solve(b)


# --- power iteration --------------------------------------------------------

@dataclass
class PowerResult:
    value: float
    converged: bool
    iterations: int
    history: list[float] = field(default_factory=list)
    vector: np.ndarray | None = None


def power_iteration(apply: Callable[[np.ndarray], np.ndarray], n: int, max_iters: int = 5000,
                    tol: float = 1e-10, x0: np.ndarray | None = None) -> PowerResult:
    """Dominant eigenvalue of a linear operator via power iteration.

    Seeded with the all-ones vector unless ``x0`` is given.  The estimate is
    the Rayleigh quotient ``v . Av`` of the normalised iterate; iteration stops
    when it changes by less than ``tol`` relative to its magnitude.
    """
    v = np.ones(n) if x0 is None else np.array(x0, dtype=float)
    v /= np.linalg.norm(v)
    history: list[float] = []
    lam = np.nan
    for it in range(1, max_iters + 1):
        w = apply(v)
        lam_new = float(v @ w)
        history.append(lam_new)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return PowerResult(0.0, True, it, history, v)
        v = w / nw
        if np.isfinite(lam) and abs(lam_new - lam) <= tol * abs(lam_new):
            return PowerResult(lam_new, True, it, history, v)
        lam = lam_new
    return PowerResult(lam, False, max_iters, history, v)


# --- compensated products ---------------------------------------------------
# Error-free transformations (Knuth two-sum, Dekker two-product); sums built
# from them are as accurate as if computed in twice the working precision.

_SPLITTER = 134217729.0  # 2**27 + 1


@njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, inline="always")
def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


@njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


@njit(cache=True)
def _csr_matvec_dot2(indptr, indices, data, x, out):
    for i in range(out.size):
        s = 0.0
        c = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            prod, ep = _two_prod(data[p], x[indices[p]])
            s, es = _two_sum(s, prod)
            c += ep + es
        out[i] = s + c


@njit(cache=True)
def _combine_dot2(Z, y, out):
    k, n = Z.shape
    for j in range(n):
        s = 0.0
        c = 0.0
        for i in range(k):
            prod, ep = _two_prod(Z[i, j], y[i])
            s, es = _two_sum(s, prod)
            c += ep + es
        out[j] = s + c


# flops per term of a compensated dot product (two-product 17, two-sum 6, 2 adds)
DOT2_COST = 25


def csr_matvec_compensated(A: sp.csr_matrix, x: np.ndarray, flops: FlopCounter | None = None) -> np.ndarray:
    """``A x`` with each row sum computed in doubled precision.

    Rows whose terms cancel almost completely (as in strongly graded
    operators) then keep full relative accuracy.
    """
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    out = np.empty(A.shape[0])
    _csr_matvec_dot2(A.indptr, A.indices, A.data, np.ascontiguousarray(x, dtype=float), out)
    _count(flops, "matvec", DOT2_COST * A.nnz)
    return out


def combine_compensated(Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``Z.T @ y`` (rows of ``Z`` weighted by ``y``) in doubled precision."""
    out = np.empty(Z.shape[1])
    _combine_dot2(np.ascontiguousarray(Z, dtype=float), np.ascontiguousarray(y, dtype=float), out)
    return out
