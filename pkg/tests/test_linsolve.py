"""Tests for the SPD solvers and eigenvalue estimators."""

import math

import numpy as np
import pytest

from perfscale.calculus import ScalarField, assemble_laplacian
from perfscale.geometry import FaceMode, HoleShape, build_cell_grid
from perfscale.linsolve import (
    DENSE_CAP,
    NonConvergenceError,
    dense_solve,
    dense_spectrum,
    power_iteration,
    smallest_eigenvalue,
    solve_spd,
)

BALL = HoleShape("ball", (0.25,))


def small_op(h=1 / 16, eta=0.5, boundary=FaceMode.PERIODIC):
    grid = build_cell_grid(BALL, eta=eta, h=h, d=2, boundary=boundary)
    return assemble_laplacian(grid)


def dirichlet_box_grid(n):
    """Unperforated Dirichlet box: closed-form spectrum available."""
    from perfscale.geometry import EXTERIOR, FLUID, Grid

    labels = np.full((n + 1, n + 1), FLUID, dtype=np.int8)
    labels[0, :] = labels[-1, :] = EXTERIOR
    labels[:, 0] = labels[:, -1] = EXTERIOR
    return Grid(2, 1.0 / n, (0.0, 0.0), labels, (FaceMode.DIRICHLET,) * 2)


# ------------------------------------------------------------- solve_spd

def test_zero_rhs_returns_zero():
    op = small_op()
    rep = solve_spd(op, np.zeros(op.dimension))
    assert rep.iterations == 0
    assert np.all(rep.vector == 0.0)


def test_recovers_manufactured_solution_direct():
    op = small_op()
    rng = np.random.default_rng(1)
    w = rng.standard_normal(op.dimension)
    rep = solve_spd(op, op.apply(w), method="direct")
    assert np.allclose(rep.vector, w, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("method", ["amg-cg", "jacobi-cg"])
def test_recovers_manufactured_solution_iterative(method):
    op = small_op()
    rng = np.random.default_rng(2)
    w = rng.standard_normal(op.dimension)
    rep = solve_spd(op, op.apply(w), tol=1e-12, method=method)
    assert rep.relative_residual <= 1e-12
    assert np.allclose(rep.vector, w, rtol=1e-8, atol=1e-8)


def test_iterative_matches_dense_oracle():
    op = small_op()
    rng = np.random.default_rng(3)
    rhs = rng.standard_normal(op.dimension)
    exact = dense_solve(op, rhs)
    rep = solve_spd(op, rhs, tol=1e-13, method="amg-cg")
    assert np.allclose(rep.vector, exact, rtol=1e-9, atol=1e-10)


def test_solve_rejects_bad_inputs():
    op = small_op()
    with pytest.raises(ValueError):
        solve_spd(op, np.zeros(op.dimension), tol=0.0)
    with pytest.raises(ValueError):
        solve_spd(op, np.zeros(3))
    with pytest.raises(ValueError):
        solve_spd(op, np.ones(op.dimension), method="gmres")


def test_nonconvergence_carries_best_iterate():
    op = small_op(h=1 / 64)
    rng = np.random.default_rng(4)
    rhs = rng.standard_normal(op.dimension)
    with pytest.raises(NonConvergenceError) as info:
        solve_spd(op, rhs, tol=1e-14, max_iters=2, method="jacobi-cg")
    best = info.value.best
    assert best is not None
    assert best.iterations == 2
    assert 0 < best.relative_residual < 1


def test_solver_cache_is_reused():
    op = small_op()
    rhs = np.ones(op.dimension)
    solve_spd(op, rhs, method="direct")
    assert "lu" in op._solver_cache
    lu = op._solver_cache["lu"]
    solve_spd(op, rhs, method="direct")
    assert op._solver_cache["lu"] is lu


# ------------------------------------------------------------- eigenvalues

def test_smallest_eigenvalue_matches_dense():
    op = small_op()
    spectrum = dense_spectrum(op)
    est = smallest_eigenvalue(op, tol=1e-10)
    assert est.value == pytest.approx(spectrum[0], rel=1e-8)


def test_smallest_eigenvalue_closed_form_box():
    # unperforated Dirichlet unit square: lambda_min of the 5-point
    # Laplacian is 2 * (4/h^2) sin^2(pi h / 2)
    grid = dirichlet_box_grid(24)
    op = assemble_laplacian(grid)
    h = grid.h
    exact = 2 * (4 / h**2) * math.sin(math.pi * h / 2) ** 2
    est = smallest_eigenvalue(op, tol=1e-11)
    assert est.value == pytest.approx(exact, rel=1e-9)


def test_smallest_eigenvalue_domain_monotonicity():
    # enlarging the hole shrinks the fluid set and raises lambda_min
    lam = [smallest_eigenvalue(small_op(h=1 / 32, eta=eta)).value
           for eta in (0.25, 0.5, 0.75)]
    assert lam[0] < lam[1] < lam[2]


def test_power_iteration_on_diagonal_operator():
    diag = np.array([1.0, 3.0, 9.0, 2.0])
    est = power_iteration(lambda v: diag * v, 4, tol=1e-12)
    assert est.value == pytest.approx(9.0, rel=1e-10)


def test_power_iteration_matches_dense_psd():
    rng = np.random.default_rng(8)
    m = rng.standard_normal((40, 40))
    psd = m @ m.T
    top = np.linalg.eigvalsh(psd)[-1]
    est = power_iteration(lambda v: psd @ v, 40, tol=1e-12)
    assert est.value == pytest.approx(top, rel=1e-8)


def test_power_iteration_zero_operator():
    est = power_iteration(lambda v: 0.0 * v, 5)
    assert est.value == 0.0


def test_power_iteration_budget_exhaustion():
    diag = np.array([2.0, 1.0])
    with pytest.raises(NonConvergenceError):
        power_iteration(lambda v: diag * v, 2, tol=1e-16, max_iters=2)


def test_inverse_iteration_matches_inverse_power():
    # 1/lambda_min is the top eigenvalue of the inverse; check consistency
    op = small_op()
    lam = smallest_eigenvalue(op, tol=1e-10).value
    lu_solve = lambda v: solve_spd(op, v, tol=1e-13).vector
    top = power_iteration(lu_solve, op.dimension, tol=1e-10)
    assert top.value == pytest.approx(1.0 / lam, rel=1e-7)


# ------------------------------------------------------------- dense oracle

def test_dense_solve_and_spectrum_caps():
    grid = build_cell_grid(BALL, eta=0.5, h=1 / 128, d=2)
    op = assemble_laplacian(grid)
    assert op.dimension > DENSE_CAP
    with pytest.raises(ValueError):
        dense_solve(op, np.zeros(op.dimension))
    with pytest.raises(ValueError):
        dense_spectrum(op)


def test_dense_spectrum_is_positive_and_sorted():
    op = small_op()
    spectrum = dense_spectrum(op)
    assert spectrum[0] > 0.0
    assert np.all(np.diff(spectrum) >= -1e-9)
