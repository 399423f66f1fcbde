"""Periodic cell corrector and the cutoff profiles built around it.

The corrector ``chi`` solves ``-Δ chi = eta^(d-2)`` on the unit cell minus
the hole ``eta*T``, with periodic faces and ``chi = 0`` on the hole. Its
integral and gradient norms carry all the scaling information: the integral
stays of order one for d=3 and grows like ``|ln(eta/2)|`` for d=2, while
``‖∇chi‖_2 ~ eta^((d-2)/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .calculus import (
    ScalarField,
    assemble_laplacian,
    gradient,
    lp_norm,
)
from .geometry import FaceMode, Grid, HoleShape
from .linsolve import solve_spd

DEFAULT_P_SET = (1.25, 1.5, 2.0, 3.0, 4.0)


@dataclass
class CorrectorResult:
    """Corrector field with its headline statistics."""

    chi: ScalarField
    eta: float
    d: int
    integral: float
    grad_norms: dict[float, float]
    chi_norms: dict[float, float]
    solver_tol: float

    @property
    def green_identity_residual(self) -> float:
        """Relative defect in ``‖∇chi‖₂² = eta^(d-2) ∫chi``."""
        lhs = self.grad_norms[2.0] ** 2
        rhs = self.eta ** (self.d - 2) * self.integral
        return abs(lhs - rhs) / abs(rhs)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "d": self.d,
            "integral": self.integral,
            "grad_norms": {repr(p): v for p, v in sorted(self.grad_norms.items())},
            "chi_norms": {repr(p): v for p, v in sorted(self.chi_norms.items())},
        }


def solve_corrector(shape: HoleShape, eta: float, h: float, d: int,
                    p_set=DEFAULT_P_SET, tol: float = 1e-10) -> CorrectorResult:
    """Solve the cell problem and collect integral and L^p statistics."""
    grid = geometry.build_cell_grid(shape, eta, h, d, boundary=FaceMode.PERIODIC)
    op = assemble_laplacian(grid)
    load = np.full(op.dimension, eta ** (d - 2))
    report = solve_spd(op, load, tol=tol)
    chi = report.solution
    grad = gradient(chi)
    return CorrectorResult(
        chi=chi,
        eta=eta,
        d=d,
        integral=chi.integral(),
        grad_norms={float(p): lp_norm(grad, p) for p in p_set},
        chi_norms={float(p): lp_norm(chi, p) for p in p_set},
        solver_tol=tol,
    )


def corrector_scaling_report(etas, shape: HoleShape, d: int,
                             p_set=DEFAULT_P_SET, cells_per_eta: int = 8,
                             tol: float = 1e-10) -> list[CorrectorResult]:
    """One cell solve per eta, ordered by eta descending.

    ``cells_per_eta`` sets the spacing policy ``h = eta / cells_per_eta``
    (rounded down to an exact divisor of 1), so every hole spans the same
    number of grid cells and geometric error enters all rows with the same
    constant.
    """
    etas = sorted(set(float(e) for e in etas), reverse=True)
    if len(etas) < 3:
        raise ValueError("need at least 3 distinct eta values for a scaling fit")
    results = []
    for eta in etas:
        h = spacing_for(eta, cells_per_eta)
        try:
            results.append(solve_corrector(shape, eta, h, d, p_set, tol))
        except Exception as exc:
            done = [r.eta for r in results]
            raise RuntimeError(
                f"cell solve failed at eta={eta:g} (completed: {done}): {exc}"
            ) from exc
    return results


def spacing_for(eta: float, cells_per_eta: int = 8) -> float:
    """Largest h = 1/2^k with h ≤ eta/cells_per_eta (exact divisor of 1)."""
    k = math.ceil(math.log2(cells_per_eta / eta))
    return 0.5 ** k


def _radial_distance(grid: Grid) -> np.ndarray:
    mesh = np.meshgrid(*grid.coordinates(), indexing="ij")
    return np.sqrt(sum(m**2 for m in mesh))


def cutoff_bump(R: float, grid: Grid) -> ScalarField:
    """Radial C² cutoff: 1 on ``B(0,R)``, 0 outside ``B(0,2R)``.

    Quintic smoothstep in between, so the gradient is at most ``1.875/R``
    and the second derivative at most ``5.8/R²``.
    """
    if R < 1:
        raise ValueError("cutoff radius must be >= 1")
    reach = max(abs(grid.origin[a]) for a in range(grid.d))
    if 2 * R > reach + 1e-12:
        raise ValueError(
            f"grid (half-width {reach:g}) does not extend past radius 2R={2 * R:g}"
        )
    t = _radial_distance(grid)
    u = np.clip((2.0 * R - t) / R, 0.0, 1.0)
    vals = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    return ScalarField(grid, vals)


def log_cutoff_psi(eta: float, C0: float, grid: Grid) -> ScalarField:
    """2-D logarithmic cutoff: 0 on ``B(0, C0*eta)``, log-linear up to radius
    1/2, constant beyond. Its Dirichlet energy is O(1/|ln eta|)."""
    if grid.d != 2:
        raise ValueError("log cutoff is a d=2 construction")
    if C0 < 1:
        raise ValueError("C0 must be >= 1")
    if not C0 * eta < 0.25:
        raise ValueError(f"need C0*eta < 1/4, got {C0 * eta:g}")
    r0 = C0 * eta
    log_r0 = math.log(r0)  # negative
    t = np.maximum(_radial_distance(grid), 1e-300)
    vals = 1.0 - np.log(np.minimum(np.maximum(t, r0), 0.5)) / log_r0
    vals[t <= r0] = 0.0
    return ScalarField(grid, vals)


def tile_cell_field(cell_field: ScalarField, grid: Grid) -> ScalarField:
    """Extend a periodic-cell field (epsilon = 1 period) onto a lattice grid.

    Requires matching spacing and lattice nodes that land exactly on cell
    nodes modulo the period.
    """
    cell = cell_field.grid
    if abs(cell.h - grid.h) > 1e-12:
        raise ValueError("cell and lattice grids must share the spacing h")
    n = cell.dims[0]
    index = []
    for a in range(grid.d):
        # cell node j sits at -1/2 + j*h; lattice node i at origin + i*h
        shift = (grid.origin[a] + 0.5) / grid.h
        if abs(shift - round(shift)) > 1e-9:
            raise ValueError("lattice nodes do not align with cell nodes")
        index.append((round(shift) + np.arange(grid.dims[a])) % n)
    vals = cell_field.values[np.ix_(*index)]
    return ScalarField(grid, vals)


def extremal_function(corrector: CorrectorResult, cutoff: ScalarField) -> ScalarField:
    """Pointwise product of the periodically tiled corrector and a cutoff."""
    grid = cutoff.grid
    tiled = tile_cell_field(corrector.chi, grid)
    vals = tiled.values * cutoff.values
    vals[~grid.fluid_mask] = 0.0
    return ScalarField(grid, vals)
