"""SPD solves and spectral estimation for the discrete Laplacian.

Preconditioned conjugate gradient is the workhorse; small or 2-D systems go
through a cached sparse Cholesky-like factorization (``splu``), and systems up
to 4096 unknowns can be cross-checked against a dense oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import math

import numpy as np
import scipy.sparse.linalg as spla

from .calculus import ScalarField, SparseOperator

DENSE_CAP = 4096

#: below this many unknowns a direct factorization beats iterating
#: (3-D fill-in is far worse than 2-D, hence the smaller cutoff)
DIRECT_CUTOFF = {2: 1_500_000, 3: 6_000}


class NonConvergenceError(RuntimeError):
    """Iteration budget exhausted; carries the best iterate so far."""

    def __init__(self, message, best=None, estimate=None):
        super().__init__(message)
        self.best = best
        self.estimate = estimate


@dataclass
class SolveReport:
    solution: ScalarField
    iterations: int
    relative_residual: float
    wall_time: float

    @property
    def vector(self) -> np.ndarray:
        return self.solution.fluid_vector()


@dataclass
class SpectralEstimate:
    value: float
    iterations: int
    gap: float  # relative change between the last two iterates


def _amg_preconditioner(op: SparseOperator):
    cache = op._solver_cache
    if "amg" not in cache:
        import pyamg

        cache["amg"] = pyamg.ruge_stuben_solver(op.matrix.tocsr()).aspreconditioner()
    return cache["amg"]


def _direct_factor(op: SparseOperator):
    cache = op._solver_cache
    if "lu" not in cache:
        cache["lu"] = spla.splu(op.matrix.tocsc())
    return cache["lu"]


def solve_spd(op: SparseOperator, rhs: np.ndarray, tol: float = 1e-10,
              max_iters: int = 2000, method: str = "auto") -> SolveReport:
    """Solve ``op @ u = rhs`` to relative residual ``tol``.

    ``method`` is one of ``auto`` (direct for small systems, AMG-CG above),
    ``direct``, ``amg-cg``, or ``jacobi-cg``.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (op.dimension,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({op.dimension},)")
    t0 = time.perf_counter()
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return SolveReport(op.to_field(np.zeros(op.dimension)), 0, 0.0,
                           time.perf_counter() - t0)

    if method == "auto":
        cutoff = DIRECT_CUTOFF.get(op.grid.d, 0)
        method = "direct" if op.dimension <= cutoff else "amg-cg"

    if method == "direct":
        x = _direct_factor(op).solve(rhs)
        res = float(np.linalg.norm(rhs - op.apply(x))) / rhs_norm
        return SolveReport(op.to_field(x), 1, res, time.perf_counter() - t0)

    if method == "amg-cg":
        precond = _amg_preconditioner(op)
        apply_m = precond.matvec
    elif method == "jacobi-cg":
        inv_diag = 1.0 / op.diagonal()
        apply_m = lambda r: inv_diag * r
    else:
        raise ValueError(f"unknown solve method {method!r}")

    # hand-rolled PCG so we control the stopping rule and iterate reporting
    x = np.zeros(op.dimension)
    r = rhs.copy()
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    res = 1.0
    for it in range(1, max_iters + 1):
        Ap = op.apply(p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r)) / rhs_norm
        if res <= tol:
            return SolveReport(op.to_field(x), it, res, time.perf_counter() - t0)
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergenceError(
        f"PCG did not reach tol={tol:g} in {max_iters} iterations "
        f"(residual {res:.3e})",
        best=SolveReport(op.to_field(x), max_iters, res, time.perf_counter() - t0),
    )


def power_iteration(apply, dimension: int, tol: float = 1e-8,
                    max_iters: int = 5000, seed: int = 1234) -> SpectralEstimate:
    """Largest eigenvalue of a self-adjoint PSD operator given as a callback."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dimension)
    v /= np.linalg.norm(v)
    lam_old = 0.0
    for it in range(1, max_iters + 1):
        w = apply(v)
        lam = float(v @ w)  # Rayleigh quotient
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return SpectralEstimate(0.0, it, 0.0)
        v = w / norm_w
        gap = abs(lam - lam_old) / max(abs(lam), 1e-300)
        if it > 1 and gap <= tol:
            return SpectralEstimate(lam, it, gap)
        lam_old = lam
    raise NonConvergenceError(
        f"power iteration did not converge in {max_iters} iterations",
        estimate=SpectralEstimate(lam, max_iters, gap),
    )


#: settling level at which plain inverse iteration hands over to shift-invert
_WARMUP_TOL = 1e-2


def smallest_eigenvalue(op: SparseOperator, tol: float = 1e-8,
                        max_iters: int = 200, seed: int = 4321,
                        solve_tol: float = 1e-12) -> SpectralEstimate:
    """λ_min of an SPD operator via inverse power iteration.

    Plain inverse iteration converges like (λ₁/λ₂)^k, which is too slow for
    tight tolerances when the spectral gap is small; on systems cheap to
    factor (see ``DIRECT_CUTOFF``) a warmed-up shift-invert Lanczos
    refinement delivers the tight tolerances instead.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dimension)
    v /= np.linalg.norm(v)
    coarse_tol = max(tol, _WARMUP_TOL)
    mu_old = 0.0
    mu = math.inf
    for it in range(1, max_iters + 1):
        w = solve_spd(op, v, tol=solve_tol, max_iters=5000).vector
        mu = float(v @ w)  # Rayleigh quotient of the inverse
        v = w / np.linalg.norm(w)
        gap = abs(mu - mu_old) / max(abs(mu), 1e-300)
        if it > 1 and gap <= coarse_tol:
            if coarse_tol <= tol:
                return SpectralEstimate(1.0 / mu, it, gap)
            if op.dimension <= DIRECT_CUTOFF.get(op.grid.d, 0):
                lam = float(spla.eigsh(
                    op.matrix, k=1, sigma=0.0, which="LM", v0=v,
                    tol=max(tol, 1e-14), return_eigenvectors=False)[0])
                return SpectralEstimate(lam, it, tol)
            # large system, tight tolerance: keep iterating plainly
            coarse_tol = tol
        mu_old = mu
    raise NonConvergenceError(
        f"inverse iteration did not converge in {max_iters} iterations",
        estimate=SpectralEstimate(1.0 / mu, max_iters, gap),
    )


def dense_solve(op: SparseOperator, rhs: np.ndarray) -> np.ndarray:
    """Direct dense solve for small systems (test oracle)."""
    if op.dimension > DENSE_CAP:
        raise ValueError(f"dense oracle capped at {DENSE_CAP} unknowns")
    return np.linalg.solve(op.matrix.toarray(), np.asarray(rhs, dtype=float))


def dense_spectrum(op: SparseOperator) -> np.ndarray:
    """Full ascending eigenvalue spectrum for small systems (test oracle)."""
    if op.dimension > DENSE_CAP:
        raise ValueError(f"dense oracle capped at {DENSE_CAP} unknowns")
    return np.linalg.eigvalsh(op.matrix.toarray())
