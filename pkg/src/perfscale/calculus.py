"""Discrete differential operators and L^p norms on grid fields.

Scalar fields live on nodes and are extended by zero over hole and exterior
nodes; vector fields live on forward edges (staggered). The divergence is
defined as the exact negative adjoint of the gradient in the uniform grid
inner product, so summation-by-parts identities hold to round-off and the
assembled Laplacian satisfies ``<A u, v> = <grad u, grad v>`` exactly for
fields vanishing on Dirichlet nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import EXTERIOR, FLUID, HOLE, FaceMode, Grid


class GridMismatchError(ValueError):
    """Fields attached to different grids were combined."""


class SingularOperatorError(ValueError):
    """Assembled operator has no Dirichlet pinning and is singular."""


def _check_same_grid(*objs):
    grids = {id(o.grid) for o in objs}
    if len(grids) > 1:
        g0 = objs[0].grid
        for o in objs[1:]:
            if o.grid.dims != g0.dims or o.grid.h != g0.h or o.grid.face_modes != g0.face_modes:
                raise GridMismatchError("fields live on different grids")


@dataclass
class ScalarField:
    """Node values on a grid; zero outside the fluid set by convention."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != self.grid.dims:
            raise GridMismatchError(
                f"values shape {self.values.shape} != grid dims {self.grid.dims}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.dims))

    @classmethod
    def from_fluid_vector(cls, grid: Grid, vec: np.ndarray) -> "ScalarField":
        out = np.zeros(grid.dims)
        out[grid.fluid_mask] = vec
        return cls(grid, out)

    def fluid_vector(self) -> np.ndarray:
        return self.values[self.grid.fluid_mask]

    def projected(self) -> "ScalarField":
        """Copy with hole/exterior nodes forced to zero."""
        out = np.where(self.grid.fluid_mask, self.values, 0.0)
        return ScalarField(self.grid, out)

    def integral(self) -> float:
        return float(self.values[self.grid.fluid_mask].sum()) * self.grid.h**self.grid.d


@dataclass
class VectorField:
    """Edge values: component ``a`` sits on the forward edge along axis ``a``."""

    grid: Grid
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = []
        for c in self.components:
            c = np.ascontiguousarray(c, dtype=float)
            if c.shape != self.grid.dims:
                raise GridMismatchError("component shape does not match grid")
            comps.append(c)
        self.components = tuple(comps)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, tuple(np.zeros(grid.dims) for _ in range(grid.d)))

    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.components))


def _zero_last_slice(arr: np.ndarray, axis: int):
    idx = [slice(None)] * arr.ndim
    idx[axis] = arr.shape[axis] - 1
    arr[tuple(idx)] = 0.0


def gradient(u: ScalarField) -> VectorField:
    """Forward-difference gradient with zero extension over Dirichlet nodes."""
    grid = u.grid
    vals = u.projected().values
    comps = []
    for a in range(grid.d):
        g = (np.roll(vals, -1, axis=a) - vals) / grid.h
        if not grid.periodic[a]:
            # no edge past the last node on a non-periodic axis
            _zero_last_slice(g, a)
        comps.append(g)
    return VectorField(grid, tuple(comps))


def divergence_adjoint(f: VectorField) -> ScalarField:
    """Negative adjoint of :func:`gradient`: ``<div f, v> = -<f, grad v>``."""
    grid = f.grid
    out = np.zeros(grid.dims)
    for a in range(grid.d):
        c = f.components[a]
        if not grid.periodic[a]:
            c = c.copy()
            _zero_last_slice(c, a)
        out += (c - np.roll(c, 1, axis=a)) / grid.h
    out[~grid.fluid_mask] = 0.0
    return ScalarField(grid, out)


@dataclass
class SparseOperator:
    """Discrete negative Laplacian restricted to fluid nodes (CSR, SPD)."""

    grid: Grid
    matrix: sp.csr_matrix
    fluid_index: np.ndarray = field(repr=False)  # flat indices of fluid nodes
    # lazily attached solver state (factorization / AMG hierarchy)
    _solver_cache: dict = field(default_factory=dict, repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_field(self, vec: np.ndarray) -> ScalarField:
        return ScalarField.from_fluid_vector(self.grid, vec)

    def from_field(self, u: ScalarField) -> np.ndarray:
        _check_same_grid(self, u)
        return u.fluid_vector()


# SparseOperator carries a .grid attribute so _check_same_grid works on it
def assemble_laplacian(grid: Grid) -> SparseOperator:
    """(2d+1)-point negative Laplacian on fluid nodes.

    Dirichlet nodes (hole and exterior) are eliminated; edges into them keep
    their diagonal contribution. Missing neighbors on non-periodic faces give
    natural (Neumann) closure. Raises if nothing pins the operator.
    """
    d, h = grid.d, grid.h
    labels = grid.labels
    fluid = grid.fluid_mask
    nf = int(fluid.sum())
    if nf == 0:
        raise SingularOperatorError("no fluid nodes")
    index = -np.ones(grid.dims, dtype=np.int64)
    index[fluid] = np.arange(nf)

    inv_h2 = 1.0 / h**2
    diag = np.zeros(nf)
    rows, cols, vals = [], [], []
    dirichlet_edges = 0
    for a in range(d):
        for step in (-1, 1):
            nb_labels = np.roll(labels, -step, axis=a)
            nb_index = np.roll(index, -step, axis=a)
            exists = np.ones(grid.dims, dtype=bool)
            if not grid.periodic[a]:
                idx = [slice(None)] * d
                idx[a] = grid.dims[a] - 1 if step == 1 else 0
                exists[tuple(idx)] = False
            here = fluid & exists
            to_fluid = here & (nb_labels == FLUID)
            to_dirichlet = here & (nb_labels != FLUID)
            diag[index[here]] += inv_h2
            rows.append(index[to_fluid])
            cols.append(nb_index[to_fluid])
            vals.append(np.full(int(to_fluid.sum()), -inv_h2))
            dirichlet_edges += int(to_dirichlet.sum())
    if dirichlet_edges == 0:
        raise SingularOperatorError(
            "no Dirichlet node adjacent to the fluid set: operator is singular "
            "(constants are in the kernel)"
        )
    rows = np.concatenate(rows + [np.arange(nf)])
    cols = np.concatenate(cols + [np.arange(nf)])
    vals = np.concatenate(vals + [diag])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(nf, nf))
    matrix.sum_duplicates()
    return SparseOperator(grid, matrix, np.flatnonzero(fluid.ravel()))


def rhs_from_data(F: ScalarField | None, f: VectorField | None,
                  grid: Grid | None = None) -> np.ndarray:
    """Load vector ``F + div(f)`` restricted to fluid nodes."""
    if F is None and f is None:
        if grid is None:
            raise ValueError("need a grid when both data are absent")
        return np.zeros(grid.fluid_count)
    if F is not None and f is not None:
        _check_same_grid(F, f)
    grid = F.grid if F is not None else f.grid
    load = np.zeros(grid.dims)
    if F is not None:
        load += F.projected().values
    if f is not None:
        load += divergence_adjoint(f).values
    return load[grid.fluid_mask]


def lp_norm(obj: ScalarField | VectorField, p: float) -> float:
    """``(sum h^d |value|^p)^(1/p)`` with zero contribution off the fluid set.

    Vector fields contribute their Euclidean magnitude per edge location.
    """
    if not np.isfinite(p) or p <= 1:
        raise ValueError(f"p must be a finite real > 1, got {p!r}")
    grid = obj.grid
    if isinstance(obj, VectorField):
        mag = obj.magnitude()
    else:
        mag = np.abs(obj.projected().values)
    return float(np.sum(mag**p) * grid.h**grid.d) ** (1.0 / p)


def dot(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    """Grid inner product ``h^d sum(u v)`` on flat fluid vectors or arrays."""
    return float(np.vdot(u, v)) * grid.h**grid.d
