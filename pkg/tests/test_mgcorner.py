import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from blprecond.discretize import rescale_rows_fd_to_fe
from blprecond.linalg import FlopCounter
from blprecond.mesh import LayerCase
from blprecond.mgcorner import (COARSEST, CornerSolveError, DegenerateStencilError, MgVariant,
                                build_fullcoarsen_hierarchy, build_semicoarsen_hierarchy,
                                collapse_interpolation_weights, corner_solve, dump_stencils, grid_stencil,
                                linear_interpolation_1d, semi_x_interpolation, vcycle)
from blprecond.precond2d import build_block_preconditioner

from conftest import system_2d


def five_point(nx, ny, rng=None, eps_x=1.0, eps_y=1.0):
    """Random M-matrix five-point operator on an nx x ny grid (x fastest)."""
    rng = rng or np.random.default_rng(0)
    n = nx * ny
    A = sp.lil_matrix((n, n))
    for j in range(ny):
        for i in range(nx):
            r = j * nx + i
            w, e = eps_x * rng.uniform(0.5, 1.5, 2)
            s, nn = eps_y * rng.uniform(0.5, 1.5, 2)
            A[r, r] = w + e + s + nn + rng.uniform(0.0, 0.1)
            if i > 0: A[r, r - 1] = -w
            if i < nx - 1: A[r, r + 1] = -e
            if j > 0: A[r, r - nx] = -s
            if j < ny - 1: A[r, r + nx] = -nn
    return sp.csr_matrix(A)


def test_grid_stencil_unpacks_offsets():
    A = five_point(3, 3)
    s = grid_stencil(A, 3, 3)
    assert s[1, 1, 1, 1] == A[4, 4]
    assert s[1, 0, 1, 1] == A[4, 3] and s[1, 2, 1, 1] == A[4, 5]
    assert s[0, 1, 1, 1] == A[4, 1] and s[2, 1, 1, 1] == A[4, 7]
    with pytest.raises(ValueError):
        grid_stencil(sp.csr_matrix(np.ones((9, 9))), 3, 3)


def test_collapse_weights_symmetric_and_skewed():
    s = np.zeros((3, 3))
    s[1, 1], s[1, 0], s[1, 2] = 2.0, -1.0, -1.0
    assert collapse_interpolation_weights(s) == (0.5, 0.5)
    s = np.zeros((3, 3))
    s[1, 1], s[1, 0], s[1, 2] = 4.0, -1.0, -3.0
    assert collapse_interpolation_weights(s) == (0.25, 0.75)
    # north/south entries are lumped into the centre and the sides
    s = np.zeros((3, 3))
    s[:, 1] = [-1.0, 6.0, -1.0]
    s[:, 0] = [0.0, -1.0, 0.0]
    s[:, 2] = [-0.5, -2.5, 0.0]
    assert collapse_interpolation_weights(s) == pytest.approx((0.25, 0.75))
    with pytest.raises(DegenerateStencilError):
        collapse_interpolation_weights(np.zeros((3, 3)))


@pytest.mark.parametrize("seed", range(5))
def test_galerkin_rap_exact_on_5x5(seed):
    A = five_point(5, 5, np.random.default_rng(seed))
    h = build_semicoarsen_hierarchy(A, 5, 5, np.ones(25))
    # 5 > COARSEST: exactly one coarse level with 2 lines
    assert len(h.levels) == 2 and h.levels[1].nx == 2
    P = h.levels[1].P.toarray()
    dense = P.T @ A.toarray() @ P
    err = np.abs(h.levels[1].A.toarray() - dense).max() / np.abs(dense).max()
    assert err <= 1e-13


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_semi_x_interpolation_structure(nx, ny, seed):
    A = five_point(nx, ny, np.random.default_rng(seed))
    P = semi_x_interpolation(A, nx, ny).toarray()
    nxc = nx // 2
    assert P.shape == (nx * ny, nxc * ny)
    assert np.all(P >= 0)
    # every row sums to at most one and coarse points are injected
    assert np.all(P.sum(axis=1) <= 1 + 1e-14)
    for j in range(ny):
        for ic in range(nxc):
            row = P[j * nx + 2 * ic + 1]
            assert row[j * nxc + ic] == 1.0 and row.sum() == 1.0


def test_linear_interpolation_reproduces_linears():
    x = np.array([0.1, 0.3, 0.4, 0.7, 0.8, 0.95])
    P = linear_interpolation_1d(x).toarray()
    coarse = x[1::2]
    np.testing.assert_allclose(P @ coarse, x, rtol=1e-14)
    with pytest.raises(ValueError):
        linear_interpolation_1d(x[:5])


def test_semicoarsen_level_counts():
    _, mesh, part, A, _ = system_2d(LayerCase.PARABOLIC_EXPONENTIAL, 1e-6, 128)
    P = build_block_preconditioner(A, part, mesh, None, 1e-6)
    h = P.corner
    assert h.variant is MgVariant.SEMI_X and h.reduction_target == 1e-2
    assert [lev.nx for lev in h.levels] == [64, 32, 16, 8, 4]
    assert all(lev.ny == part.corner.ny for lev in h.levels)
    assert h.levels[-1].nx <= COARSEST


def test_fullcoarsen_level_counts_and_rediscretisation():
    mc, mesh, part, A, _ = system_2d(LayerCase.TWO_EXPONENTIAL, 1e-6, 128)
    h = build_fullcoarsen_hierarchy(mc.problem, mesh, 1e-6)
    assert h.variant is MgVariant.FULL and h.reduction_target == 1e-3
    assert [(lev.nx, lev.ny) for lev in h.levels] == [(64, 64), (32, 32), (16, 16), (8, 8), (4, 4)]
    # finest level equals the scaled corner block of the global operator
    C = part.corner.slice
    _, scaling = rescale_rows_fd_to_fe(A[C, C], mesh.x_mesh.hbar[:64], mesh.y_mesh.hbar[:64])
    ref = sp.diags(scaling) @ A[C, C]
    assert abs(h.levels[0].A - ref).max() <= 1e-14 * abs(ref).max()
    assert h.levels[1].A.nnz == 5 * 32 * 32 - 4 * 32


def test_fullcoarsen_rejects_non_power_of_two():
    mc, mesh, _, _, _ = system_2d(LayerCase.TWO_EXPONENTIAL, 1e-6, 24)
    with pytest.raises(ValueError):
        build_fullcoarsen_hierarchy(mc.problem, mesh, 1e-6)


@pytest.mark.parametrize("case,cycles", [(LayerCase.PARABOLIC_EXPONENTIAL, 3), (LayerCase.TWO_EXPONENTIAL, 5)],
                         ids=["parabolic", "exponential"])
def test_corner_solve_reaches_target(case, cycles, rng):
    mc, mesh, part, A, _ = system_2d(case, 1e-7, 256)
    P = build_block_preconditioner(A, part, mesh, mc.problem, 1e-7)
    h = P.corner
    r = rng.standard_normal(h.n)
    counter = FlopCounter()
    z, used = corner_solve(h, r, counter)
    res = np.linalg.norm(h.scaling * (r - h.A_fd @ z))
    assert res <= h.reduction_target * np.linalg.norm(h.scaling * r)
    assert abs(used - cycles) <= 2
    assert counter.counts["mg"] > 0
    assert corner_solve(h, np.zeros(h.n)) [1] == 0
    with pytest.raises(ValueError):
        corner_solve(h, np.zeros(h.n + 1))


def test_corner_solve_raises_when_budget_exhausted(rng):
    mc, mesh, part, A, _ = system_2d(LayerCase.TWO_EXPONENTIAL, 1e-7, 64)
    P = build_block_preconditioner(A, part, mesh, mc.problem, 1e-7, max_cycles=1)
    P.corner.reduction_target = 1e-14
    with pytest.raises(CornerSolveError) as info:
        corner_solve(P.corner, rng.standard_normal(P.corner.n))
    assert len(info.value.history) == 2


def test_vcycle_reduces_error_on_small_problem(rng):
    A = five_point(16, 8, rng)
    h = build_semicoarsen_hierarchy(A, 16, 8, np.ones(128))
    b = rng.standard_normal(128)
    x = np.zeros(128)
    norms = []
    for _ in range(6):
        vcycle(h, x, b)
        norms.append(np.linalg.norm(b - A @ x))
    assert all(b2 < b1 for b1, b2 in zip(norms, norms[1:]))
    assert norms[-1] <= 1e-3 * np.linalg.norm(b)


def test_dump_stencils(tmp_path):
    A = five_point(8, 4)
    h = build_semicoarsen_hierarchy(A, 8, 4, np.ones(32))
    path = tmp_path / "st.csv"
    dump_stencils(h, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("level,i,j,s_-1_-1")
    assert len(lines) == 1 + 32 + 16
