import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from blprecond.krylov import NormKind, RuleKind, StoppingRule, fgmres_2d, gmres_1d, residual_check
from blprecond.linalg import FlopCounter, TridiagonalMatrix
from blprecond.mesh import LayerCase
from blprecond.precond1d import build_preconditioner_1d
from blprecond.precond2d import build_block_preconditioner

from conftest import system_1d, system_2d


def test_stopping_thresholds():
    r1 = StoppingRule.max_norm_1d(1024)
    assert r1.kind is RuleKind.MAX_NORM_1D and r1.norm is NormKind.MAX
    assert r1.threshold == pytest.approx(np.log(1024) / 1024)
    assert StoppingRule.max_norm_1d(128, 2.0).threshold == pytest.approx(2 * np.log(128) / 128)
    r2 = StoppingRule.euclid_2d(256)
    assert r2.norm is NormKind.EUCLID and r2.threshold == pytest.approx(10 * np.log(256) / 256)


def test_residual_check_norms():
    A = sp.identity(3, format="csr")
    b = np.array([3.0, -4.0, 0.0])
    assert residual_check(A, np.zeros(3), b, "max") == 4.0
    assert residual_check(A, np.zeros(3), b, NormKind.EUCLID) == 5.0


def test_gmres_1d_true_residual_and_counts():
    _, mesh, A, f = system_1d(1e-4, 1024)
    p = build_preconditioner_1d(A, mesh.transition_index)
    rule = StoppingRule.max_norm_1d(1024)
    counter = FlopCounter()
    x, stats = gmres_1d(A, f, p, rule, flops=counter)
    assert stats.converged
    assert residual_check(A, x, f, "max") <= rule.threshold
    assert stats.true_residual == pytest.approx(residual_check(A, x, f, "max"))
    assert abs(stats.iterations - 14) <= 1
    assert stats.orthogonality_error <= 1e-8
    assert counter.counts["krylov"] > 0 and counter.counts["thomas"] > 0


def test_gmres_1d_hits_iteration_cap():
    _, mesh, A, f = system_1d(1e-4, 2048)
    p = build_preconditioner_1d(A, mesh.transition_index)
    _, stats = gmres_1d(A, f, p, StoppingRule.max_norm_1d(2048), max_iters=5)
    assert not stats.converged and stats.iterations == 5


def test_gmres_zero_rhs():
    _, mesh, A, _ = system_1d(1e-4, 128)
    p = build_preconditioner_1d(A, mesh.transition_index)
    x, stats = gmres_1d(A, np.zeros(A.n), p, StoppingRule.max_norm_1d(128))
    assert stats.converged and stats.iterations == 0 and not x.any()


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 60), st.integers(0, 2**32 - 1))
def test_gmres_identity_preconditioner_solves_small_systems(n, seed):
    rng = np.random.default_rng(seed)
    sub, sup = -rng.uniform(0.1, 1, n - 1), -rng.uniform(0.1, 1, n - 1)
    diag = np.r_[0.0, -sub] + np.r_[-sup, 0.0] + rng.uniform(0.5, 1, n)
    A = TridiagonalMatrix(sub, diag, sup)
    b = rng.standard_normal(n)
    p = build_preconditioner_1d(A, n - 1)  # keeps the whole matrix: M = A
    rule = StoppingRule(RuleKind.MAX_NORM_1D, 1e-10)
    x, stats = gmres_1d(A, b, p, rule)
    assert stats.converged and stats.iterations <= 2
    assert residual_check(A, x, b, "max") <= 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(4, 40), st.integers(0, 2**32 - 1))
def test_fgmres_unpreconditioned_dense(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    rule = StoppingRule(RuleKind.EUCLID_2D, 1e-10 * np.linalg.norm(b))
    x, stats = fgmres_2d(A, b, lambda v: v, rule, max_iters=n + 5)
    assert stats.converged and stats.iterations <= n
    assert np.linalg.norm(b - A @ x) <= rule.threshold
    assert stats.orthogonality_error <= 1e-10


def test_fgmres_accepts_varying_preconditioner(rng):
    n = 50
    A = sp.csr_matrix(sp.diags([-1.0, 2.5, -1.0], [-1, 0, 1], shape=(n, n)))
    b = rng.standard_normal(n)
    calls = []

    def noisy(v):
        calls.append(1)
        # an inexact inverse that changes every call
        return v / (2.5 + 0.1 * len(calls))

    rule = StoppingRule(RuleKind.EUCLID_2D, 1e-9)
    x, stats = fgmres_2d(A, b, noisy, rule, max_iters=n)
    assert stats.converged
    assert np.linalg.norm(b - A @ x) <= 1e-9
    assert len(calls) == stats.iterations


@pytest.mark.parametrize("case", list(LayerCase), ids=lambda c: c.value)
def test_fgmres_2d_confirms_true_residual(case):
    mc, mesh, part, A, b = system_2d(case, 1e-8, 256)
    P = build_block_preconditioner(A, part, mesh, mc.problem, 1e-8)
    rule = StoppingRule.euclid_2d(256)
    counter = FlopCounter()
    x, stats = fgmres_2d(A, b, P, rule, flops=counter)
    assert stats.converged
    assert stats.true_residual <= rule.threshold
    assert stats.residual_history[-1] == stats.true_residual
    assert np.linalg.norm(b - A @ x) <= 1.01 * rule.threshold
    assert set(counter.counts) >= {"matvec", "krylov"}


def test_fgmres_reports_nonconvergence(rng):
    A = sp.csr_matrix(sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(200, 200)))
    b = rng.standard_normal(200)
    _, stats = fgmres_2d(A, b, lambda v: v, StoppingRule(RuleKind.EUCLID_2D, 1e-12), max_iters=3)
    assert not stats.converged and stats.iterations == 3
    assert np.isfinite(stats.true_residual)
