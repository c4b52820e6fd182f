import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blprecond.linalg import TridiagonalMatrix
from blprecond.precond1d import (alpha_estimate, apply_M_inverse, build_preconditioner_1d, dense_spectrum,
                                 dropped_part, largest_admissible_alpha, unit_eigenvector_residuals,
                                 verify_spectrum)

from conftest import system_1d


def test_preconditioner_keeps_layer_and_coupling_rows():
    _, mesh, A, _ = system_1d(1e-6, 16)
    nl = mesh.transition_index
    p = build_preconditioner_1d(A, nl)
    D, M = A.to_dense(), p.matrix.to_dense()
    # rows 0..nl (0-based) are untouched, below that only the sub-diagonal goes
    np.testing.assert_array_equal(M[:nl + 1], D[:nl + 1])
    np.testing.assert_array_equal(np.triu(M), np.triu(D))
    assert np.all(np.diag(M, -1)[nl:] == 0)
    N = dropped_part(A, p).to_dense()
    np.testing.assert_array_equal(M - D, N)
    assert np.all(N >= 0)


def test_build_preconditioner_validates_n_layer():
    _, _, A, _ = system_1d(1e-6, 16)
    for bad in (0, A.n):
        with pytest.raises(ValueError):
            build_preconditioner_1d(A, bad)


def test_apply_inverse_matches_dense():
    _, mesh, A, f = system_1d(1e-5, 64)
    p = build_preconditioner_1d(A, mesh.transition_index)
    np.testing.assert_allclose(apply_M_inverse(p, f), np.linalg.solve(p.matrix.to_dense(), f), rtol=1e-10)


@pytest.mark.parametrize("eps", [1e-4, 1e-6, 1e-8])
def test_unit_eigenvalues_dense_oracle(eps):
    _, mesh, A, _ = system_1d(eps, 64)
    nl = mesh.transition_index
    p = build_preconditioner_1d(A, nl)
    lam = dense_spectrum(A, p)
    assert np.sum(np.abs(lam - 1) <= 1e-10) >= nl
    assert np.max(np.abs(lam - 1)) <= 8 * eps * 64 / (0.99 * alpha_estimate(eps, 64, 0.99))
    assert unit_eigenvector_residuals(A, p).max() <= 1e-12


def test_dense_spectrum_size_guard():
    _, mesh, A, _ = system_1d(1e-6, 128)
    with pytest.raises(ValueError):
        dense_spectrum(A, build_preconditioner_1d(A, mesh.transition_index))


def test_alpha_values():
    assert alpha_estimate(1e-8, 1024, 0.99) == pytest.approx(2 * (1 - 2e-8 * np.log(1024) / 0.99))
    _, mesh, _, _ = system_1d(1e-6, 128)
    # coarse widths satisfy alpha/N <= h_i with the computed alpha
    assert largest_admissible_alpha(mesh) >= alpha_estimate(1e-6, 128, 0.99) * (1 - 1e-12)


@pytest.mark.parametrize("eps,N", [(1e-4, 256), (1e-6, 1024), (1e-8, 2048)])
def test_power_iteration_agrees_with_dense_spectrum_ratio(eps, N):
    _, mesh, A, _ = system_1d(eps, N)
    p = build_preconditioner_1d(A, mesh.transition_index)
    rep = verify_spectrum(A, p, eps, N, 0.99, mesh)
    assert rep.applicable and rep.converged and rep.within_bound
    assert 0.5 <= rep.ratio <= 4.0


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 40), st.integers(0, 2**32 - 1))
def test_unit_eigenvectors_on_random_m_matrices(n, seed):
    rng = np.random.default_rng(seed)
    sub, sup = -rng.uniform(0.1, 1, n - 1), -rng.uniform(0.1, 1, n - 1)
    diag = np.r_[0.0, -sub] + np.r_[-sup, 0.0] + rng.uniform(0.1, 1, n)
    A = TridiagonalMatrix(sub, diag, sup)
    nl = int(rng.integers(1, n))
    p = build_preconditioner_1d(A, nl)
    assert unit_eigenvector_residuals(A, p).max() <= 1e-12
