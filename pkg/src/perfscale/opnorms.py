"""Operator norms of the zero-Dirichlet solution map on perforated grids.

Four best constants are measured for ``-Δu = F + div(f)``:

* ``A``: f-data to gradient,   ``sup ‖∇u‖_p / ‖f‖_p``
* ``B``: F-data to gradient,   ``sup ‖∇u‖_p / ‖F‖_p``
* ``C``: f-data to solution,   ``sup ‖u‖_p / ‖f‖_p``
* ``D``: F-data to solution,   ``sup ‖u‖_p / ‖F‖_p``

At p = 2 all four reduce to spectral quantities of the discrete Laplacian
(``D₂ = 1/λ_min``, ``B₂ = C₂ = λ_min^(-1/2)``, ``A₂ = 1``), but each is
measured through its own iteration so the identities can be *checked* rather
than assumed. At p ≠ 2 only certified lower bounds are reported: any trial
datum bounds the sup from below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import (
    ScalarField,
    SparseOperator,
    VectorField,
    assemble_laplacian,
    divergence_adjoint,
    gradient,
    lp_norm,
    rhs_from_data,
)
from .corrector import CorrectorResult, cutoff_bump, extremal_function, tile_cell_field
from .geometry import Grid
from .linsolve import power_iteration, smallest_eigenvalue, solve_spd

WHICH = ("A", "B", "C", "D")

EXACT_P2 = "exact-p2"
LOWER_BOUND = "lower-bound"
RANDOM_SEARCH = "random-search-lower-bound"


@dataclass
class OperatorNormEstimate:
    which: str
    p: float
    epsilon: float
    eta: float
    value: float
    kind: str
    domain: str
    h: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "p": self.p,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "value": self.value,
            "kind": self.kind,
            "domain": self.domain,
            "h": self.h,
            "iterations": self.iterations,
        }


def _flatten_edges(f: VectorField) -> np.ndarray:
    return np.concatenate([c.ravel() for c in f.components])


def _unflatten_edges(grid: Grid, vec: np.ndarray) -> VectorField:
    size = int(np.prod(grid.dims))
    comps = tuple(
        vec[a * size:(a + 1) * size].reshape(grid.dims) for a in range(grid.d)
    )
    return VectorField(grid, comps)


def norm_p2(grid: Grid, which: str, *, epsilon: float = 1.0, eta: float = 0.0,
            op: SparseOperator | None = None, tol: float = 1e-9,
            solve_tol: float = 1e-12, seed: int | None = None,
            domain: str = "") -> OperatorNormEstimate:
    """Exact (to iteration tolerance) p=2 operator norm.

    Each ``which`` runs a different iteration: ``D`` uses inverse power
    iteration for λ_min; ``B`` power-iterates the node-space Gram operator of
    F ↦ ∇u; ``C`` power-iterates the edge-space Gram operator of f ↦ u;
    ``A`` power-iterates the projection f ↦ -∇u directly.
    """
    if which not in WHICH:
        raise ValueError(f"which must be one of {WHICH}")
    if op is None:
        op = assemble_laplacian(grid)
    seeds = {"A": 11, "B": 22, "C": 33, "D": 44}
    seed = seeds[which] if seed is None else seed

    def solve(v):
        return solve_spd(op, v, tol=solve_tol, max_iters=20000).vector

    if which == "D":
        est = smallest_eigenvalue(op, tol=tol, seed=seed, solve_tol=solve_tol)
        value, iters = 1.0 / est.value, est.iterations
    elif which == "B":
        def apply_b(F):
            u = op.to_field(solve(F))
            load = -divergence_adjoint(gradient(u)).fluid_vector()
            return solve(load)

        est = power_iteration(apply_b, op.dimension, tol=tol, seed=seed)
        value, iters = float(np.sqrt(est.value)), est.iterations
    elif which == "C":
        def apply_c(fvec):
            f = _unflatten_edges(grid, fvec)
            u = solve(rhs_from_data(None, f))
            w = op.to_field(solve(u))
            return -_flatten_edges(gradient(w))

        est = power_iteration(apply_c, grid.d * int(np.prod(grid.dims)),
                              tol=tol, seed=seed)
        value, iters = float(np.sqrt(est.value)), est.iterations
    else:  # A
        def apply_a(fvec):
            f = _unflatten_edges(grid, fvec)
            u = op.to_field(solve(rhs_from_data(None, f)))
            return -_flatten_edges(gradient(u))

        est = power_iteration(apply_a, grid.d * int(np.prod(grid.dims)),
                              tol=tol, seed=seed)
        value, iters = float(est.value), est.iterations

    return OperatorNormEstimate(which, 2.0, epsilon, eta, value, EXACT_P2,
                                domain, grid.h, iters)


def _potential_ratios(op: SparseOperator, u: ScalarField, p: float) -> dict[str, float]:
    """Lower-bound ratios generated by one trial potential u.

    ``F := A u`` is exact data for u, and ``f := ∇u`` is exact data for ``-u``,
    so the D, B, C ratios need no further solves.
    """
    grid = op.grid
    u = u.projected()
    F = op.to_field(op.apply(u.fluid_vector()))
    grad = gradient(u)
    nu, ngrad, nF = lp_norm(u, p), lp_norm(grad, p), lp_norm(F, p)
    out = {}
    if nF > 0:
        out["D"] = nu / nF
        out["B"] = ngrad / nF
    if ngrad > 0:
        out["C"] = nu / ngrad
        out["A"] = 1.0  # f = ∇u reproduces its own gradient
    return out


def empirical_lower_bound_p(
    grid: Grid,
    which: str,
    p: float,
    *,
    strategy: str = "corrector-cutoff",
    corrector: CorrectorResult | None = None,
    cutoff_R: float | None = None,
    trials: int = 32,
    seed: int = 2024,
    op: SparseOperator | None = None,
    solve_tol: float = 1e-10,
    epsilon: float = 1.0,
    eta: float = 0.0,
    domain: str = "",
) -> OperatorNormEstimate:
    """Certified lower bound on an operator norm from trial data.

    ``corrector-cutoff`` uses the tiled corrector times a radial cutoff
    (``cutoff_R=None`` means no cutoff, valid on fully periodic grids where
    the corrector itself is admissible). ``random-search`` draws data from
    three families — white noise, single-cell bumps, and perturbed tiled
    correctors — and keeps the best ratio; every trial needs one solve.
    """
    if which not in WHICH:
        raise ValueError(f"which must be one of {WHICH}")
    if op is None:
        op = assemble_laplacian(grid)

    if strategy == "corrector-cutoff":
        if corrector is None:
            raise ValueError("corrector-cutoff strategy needs a corrector")
        if cutoff_R is None:
            if not all(grid.periodic):
                raise ValueError(
                    "cutoff-free trials are only admissible on periodic grids"
                )
            u = tile_cell_field(corrector.chi, grid)
        else:
            u = extremal_function(corrector, cutoff_bump(cutoff_R, grid))
        ratios = _potential_ratios(op, u, p)
        if which not in ratios:
            raise ValueError(f"trial produced no usable ratio for {which!r}")
        return OperatorNormEstimate(which, p, epsilon, eta, ratios[which],
                                    LOWER_BOUND, domain, grid.h, 1)

    if strategy != "random-search":
        raise ValueError(f"unknown strategy {strategy!r}")

    rng = np.random.default_rng(seed)
    best = 0.0
    solves = 0
    use_fdata = which in ("A", "C")
    for t in range(trials):
        family = t % 3
        if family == 0:  # white noise
            F = rng.standard_normal(grid.dims)
        elif family == 1:  # single random bump
            F = np.zeros(grid.dims)
            mesh = np.meshgrid(*grid.coordinates(), indexing="ij")
            center = [rng.uniform(c.min(), c.max()) for c in grid.coordinates()]
            width = rng.uniform(2, 8) * grid.h
            r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
            F = np.exp(-r2 / (2 * width**2))
        else:  # perturbed tiled corrector (falls back to noise without one)
            if corrector is not None:
                try:
                    base = tile_cell_field(corrector.chi, grid).values
                except ValueError:
                    base = rng.standard_normal(grid.dims)
            else:
                base = rng.standard_normal(grid.dims)
            F = base * (1.0 + 0.3 * rng.standard_normal(grid.dims))
        trial = ScalarField(grid, F).projected()
        if use_fdata:
            f = gradient(trial)
            rhs = rhs_from_data(None, f)
            denom = lp_norm(f, p)
        else:
            rhs = trial.fluid_vector()
            denom = lp_norm(trial, p)
        if denom == 0.0:
            continue
        u = op.to_field(solve_spd(op, rhs, tol=solve_tol, max_iters=20000).vector)
        solves += 1
        num = lp_norm(gradient(u) if which in ("A", "B") else u, p)
        best = max(best, num / denom)
    return OperatorNormEstimate(which, p, epsilon, eta, best, RANDOM_SEARCH,
                                domain, grid.h, solves)


def poincare_constant(grid: Grid, tol: float = 1e-9,
                      solve_tol: float = 1e-12) -> float:
    """Best constant in ``‖u‖₂² ≤ C ‖∇u‖₂²`` over the grid's Dirichlet class.

    Equals 1/λ_min of the assembled operator; raises SingularOperatorError
    when nothing pins the operator (no hole, all-natural faces).
    """
    op = assemble_laplacian(grid)
    est = smallest_eigenvalue(op, tol=tol, solve_tol=solve_tol)
    return 1.0 / est.value


def duality_check(grid: Grid, *, eta: float = 0.0, epsilon: float = 1.0,
                  tol: float = 1e-9, solve_tol: float = 1e-12) -> dict:
    """Measure B₂ and C₂ through their two distinct iterations and compare."""
    op = assemble_laplacian(grid)
    b = norm_p2(grid, "B", op=op, eta=eta, epsilon=epsilon, tol=tol,
                solve_tol=solve_tol)
    c = norm_p2(grid, "C", op=op, eta=eta, epsilon=epsilon, tol=tol,
                solve_tol=solve_tol)
    return {
        "B2": b.value,
        "C2": c.value,
        "relative_difference": abs(b.value - c.value) / b.value,
    }


def rescaling_check(shape, eta: float, epsilon: float, d: int = 2,
                    cells_per_eta: int = 8, box_halfwidth: float = 1.0,
                    tol: float = 1e-9, solve_tol: float = 1e-12) -> dict:
    """Measured D₂, C₂, A₂ ratios between the ε-lattice and the unit lattice.

    Both grids are periodic boxes over ``[-W, W]^d`` with spacing matched
    relative to the hole size (h scales with ε), so the two discretizations
    resolve their holes identically and the ratios isolate the ε-scaling.
    """
    from . import geometry
    from .corrector import spacing_for

    h1 = spacing_for(eta, cells_per_eta)
    out = {}
    values = {}
    for eps in (1.0, epsilon):
        spec = geometry.DomainSpec(d=d, eta=eta, shape=shape, epsilon=eps,
                                   host=geometry.Host.LATTICE,
                                   box_halfwidth=box_halfwidth)
        grid = geometry.build_lattice_domain(spec, h1 * eps,
                                             outer=geometry.FaceMode.PERIODIC)
        op = assemble_laplacian(grid)
        values[eps] = {
            w: norm_p2(grid, w, op=op, eta=eta, epsilon=eps, tol=tol,
                       solve_tol=solve_tol).value
            for w in ("D", "C", "A")
        }
    out["D_ratio"] = values[epsilon]["D"] / values[1.0]["D"]
    out["C_ratio"] = values[epsilon]["C"] / values[1.0]["C"]
    out["A_ratio"] = values[epsilon]["A"] / values[1.0]["A"]
    out["D_expected"] = epsilon**2
    out["C_expected"] = epsilon
    out["A_expected"] = 1.0
    return out


def localization_ratio(grid: Grid, epsilon: float, eta: float, p: float = 2.0,
                       solve_tol: float = 1e-10) -> float:
    """Stability diagnostic: ``‖∇u‖_p / ((εη)^{-1}‖u‖_p + ‖F‖_p)`` for F ≡ 1.

    Across an η sweep this ratio should stay bounded; it checks the constant
    in the interior estimate rather than any scaling exponent.
    """
    op = assemble_laplacian(grid)
    F = ScalarField(grid, np.ones(grid.dims)).projected()
    u = op.to_field(solve_spd(op, F.fluid_vector(), tol=solve_tol,
                              max_iters=20000).vector)
    num = lp_norm(gradient(u), p)
    denom = lp_norm(u, p) / (epsilon * eta) + lp_norm(F, p)
    return num / denom
