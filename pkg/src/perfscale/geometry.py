"""Construction and classification of perforated structured grids.

Three hosts are supported:

* a unit periodicity cell ``[-1/2, 1/2]^d`` with one centered hole,
* a lattice of spacing ``epsilon`` filling a box ``[-W, W]^d`` (either with
  periodic faces, which reproduces the infinite lattice exactly, or with a
  zero-Dirichlet outer boundary),
* the unit cube host ``(0, 1)^d`` where only lattice cells fully interior to
  the host are perforated.

Nodes are classified by center-point membership as fluid, hole, or exterior
(outer Dirichlet). Grids are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FLUID = 0
HOLE = 1
EXTERIOR = 2

#: default number of grid cells across the hole's guaranteed inner-ball radius
RESOLUTION_CELLS = 2


class ConfigurationError(ValueError):
    """Invalid geometric configuration (unsupported shape, bad parameters)."""


class ResolutionError(ValueError):
    """Grid spacing too coarse to resolve the requested hole."""


class HoleKind(str, Enum):
    BALL = "ball"
    CUBE = "cube"
    ELLIPSOID = "ellipsoid"


@dataclass(frozen=True)
class HoleShape:
    """A closed hole template inside the unit cell ``Y = [-1/2, 1/2]^d``.

    ``size`` is the radius (ball), half-width (cube), or the tuple of
    semi-axes (ellipsoid), all in Y-coordinates. The shape must contain a
    centered ball of positive radius and keep a positive margin from the cell
    boundary; ``c0`` is the largest radius serving both roles.
    """

    kind: HoleKind
    size: tuple[float, ...]

    def __post_init__(self):
        kind = HoleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        size = tuple(float(s) for s in np.atleast_1d(self.size))
        object.__setattr__(self, "size", size)
        if any(s <= 0 for s in size):
            raise ConfigurationError("hole size parameters must be positive")
        if kind in (HoleKind.BALL, HoleKind.CUBE) and len(size) != 1:
            raise ConfigurationError(f"{kind.value} takes a single size parameter")
        if self.c0 <= 0:
            raise ConfigurationError(
                "shape leaves no margin: need inscribed ball and distance to cell boundary"
            )

    @property
    def circumradius(self) -> float:
        if self.kind == HoleKind.BALL:
            return self.size[0]
        if self.kind == HoleKind.CUBE:
            # half-diagonal grows with dimension; be conservative with d=3
            return self.size[0] * math.sqrt(3.0)
        return max(self.size)

    @property
    def c0(self) -> float:
        if self.kind == HoleKind.BALL:
            r = self.size[0]
            return min(r, 0.5 - r)
        if self.kind == HoleKind.CUBE:
            a = self.size[0]
            return min(a, 0.5 - a)
        return min(min(self.size), 0.5 - max(self.size))

    def contains(self, point) -> bool:
        """Exact membership predicate for a point in Y-coordinates."""
        x = np.asarray(point, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("point must be finite")
        return bool(self._mask(x[np.newaxis, :])[0])

    def _mask(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (n, d) array of points."""
        if self.kind == HoleKind.BALL:
            return np.sum(points**2, axis=-1) <= self.size[0] ** 2
        if self.kind == HoleKind.CUBE:
            return np.max(np.abs(points), axis=-1) <= self.size[0]
        if self.kind == HoleKind.ELLIPSOID:
            axes = np.asarray(self.size)
            if points.shape[-1] != axes.size:
                raise ConfigurationError(
                    f"ellipsoid has {axes.size} semi-axes but points are "
                    f"{points.shape[-1]}-dimensional"
                )
            return np.sum((points / axes) ** 2, axis=-1) <= 1.0
        raise ConfigurationError(f"unsupported hole kind {self.kind!r}")


class Host(str, Enum):
    CELL = "cell"
    LATTICE = "lattice"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class DomainSpec:
    """Parameters of a perforated domain: dimension, scales, shape, host."""

    d: int
    eta: float
    shape: HoleShape
    epsilon: float = 1.0
    host: Host = Host.CELL
    box_halfwidth: float = 2.0  # lattice host only

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigurationError("dimension must be 2 or 3")
        if not 0 < self.eta <= 1:
            raise ConfigurationError("eta must lie in (0, 1]")
        if not 0 < self.epsilon <= 1:
            raise ConfigurationError("epsilon must lie in (0, 1]")
        if self.host == Host.LATTICE and self.box_halfwidth < 1:
            raise ConfigurationError("lattice box half-width must be >= 1")


class FaceMode(str, Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class Grid:
    """Structured grid with per-node classification.

    ``labels`` has shape ``dims``; node ``i`` sits at ``origin + i*h``.
    ``face_modes[a]`` applies to both faces of axis ``a``. Periodic axes store
    one node per period (no duplicated face).
    """

    d: int
    h: float
    origin: tuple[float, ...]
    labels: np.ndarray = field(repr=False)
    face_modes: tuple[FaceMode, ...]

    def __post_init__(self):
        self.labels.setflags(write=False)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.labels.shape

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(m == FaceMode.PERIODIC for m in self.face_modes)

    @property
    def fluid_mask(self) -> np.ndarray:
        return self.labels == FLUID

    @property
    def fluid_count(self) -> int:
        return int(np.count_nonzero(self.labels == FLUID))

    def coordinates(self) -> list[np.ndarray]:
        """Per-axis 1-D node coordinate arrays."""
        return [
            self.origin[a] + self.h * np.arange(self.dims[a]) for a in range(self.d)
        ]

    def node_points(self) -> np.ndarray:
        """All node coordinates as an (n_nodes, d) array (C order)."""
        mesh = np.meshgrid(*self.coordinates(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def fluid_volume(self) -> float:
        return self.fluid_count * self.h**self.d


def _require_resolution(h: float, eta: float, epsilon: float, shape: HoleShape):
    limit = epsilon * eta * shape.c0 / RESOLUTION_CELLS
    if h > limit * (1 + 1e-12):
        raise ResolutionError(
            f"spacing h={h:g} cannot resolve holes of inner-ball radius "
            f"{epsilon * eta * shape.c0:g}; need h <= {limit:g}"
        )


def _steps(length: float, h: float) -> int:
    n = round(length / h)
    if abs(n * h - length) > 1e-9 * length:
        raise ConfigurationError(f"spacing {h!r} does not divide length {length!r}")
    return n


def build_cell_grid(
    shape: HoleShape,
    eta: float,
    h: float,
    d: int,
    boundary: FaceMode = FaceMode.PERIODIC,
) -> Grid:
    """Grid on the unit cell Y with the single hole ``eta*T`` at the origin.

    ``boundary`` selects the treatment of the cell faces: periodic
    identification, an outer Dirichlet layer, or natural (Neumann) faces.
    """
    boundary = FaceMode(boundary)
    _require_resolution(h, eta, 1.0, shape)
    n = _steps(1.0, h)
    if boundary == FaceMode.PERIODIC:
        dims = (n,) * d
    else:
        dims = (n + 1,) * d
    origin = (-0.5,) * d
    coords = [origin[0] + h * np.arange(dims[a]) for a in range(d)]
    mesh = np.meshgrid(*coords, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    labels = np.full(dims, FLUID, dtype=np.int8)
    hole = shape._mask(pts / eta).reshape(dims)
    labels[hole] = HOLE
    if boundary == FaceMode.DIRICHLET:
        for a in range(d):
            idx = [slice(None)] * d
            for edge in (0, dims[a] - 1):
                idx[a] = edge
                labels[tuple(idx)] = EXTERIOR
    grid = Grid(d, h, origin, labels, (boundary,) * d)
    if grid.fluid_count == 0:
        raise ConfigurationError("hole swallows the entire cell: empty fluid set")
    return grid


def _lattice_labels(
    dims: tuple[int, ...],
    origin: tuple[float, ...],
    h: float,
    epsilon: float,
    eta: float,
    shape: HoleShape,
    cell_ranges: list[tuple[int, int]],
    start: float,
) -> np.ndarray:
    """Classify hole nodes for an epsilon-lattice of holes.

    Cells are ``start + epsilon*[k, k+1]`` per axis; a hole sits at each cell
    center for cell indices within ``cell_ranges`` (half-open).
    """
    d = len(dims)
    labels = np.full(dims, FLUID, dtype=np.int8)
    coords = [origin[a] + h * np.arange(dims[a]) for a in range(d)]
    mesh = np.meshgrid(*coords, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    cell_idx = np.floor((pts - start) / epsilon).astype(np.int64)
    in_range = np.ones(pts.shape[0], dtype=bool)
    for a in range(d):
        lo, hi = cell_ranges[a]
        in_range &= (cell_idx[:, a] >= lo) & (cell_idx[:, a] < hi)
    centers = start + epsilon * (cell_idx + 0.5)
    rel = (pts - centers) / (epsilon * eta)
    hole = in_range & shape._mask(rel)
    labels[hole.reshape(dims)] = HOLE
    return labels


def lattice_hole_count(box_halfwidth: float, epsilon: float, d: int) -> int:
    """Number of lattice cells of size epsilon fully inside ``[-W, W]^d``."""
    m = math.floor(2.0 * box_halfwidth / epsilon + 1e-9)
    return m**d


def build_lattice_domain(spec: DomainSpec, h: float, outer: FaceMode = FaceMode.DIRICHLET,
                         memory_cap_nodes: int = 40_000_000) -> Grid:
    """Grid on the box ``[-W, W]^d`` carrying the epsilon-lattice of holes.

    With ``outer=dirichlet`` the box boundary is a zero-Dirichlet truncation
    of the infinite lattice domain; with ``outer=periodic`` (requires the box
    to be an exact multiple of the lattice period) the grid realizes the
    infinite lattice itself.
    """
    outer = FaceMode(outer)
    if outer == FaceMode.NEUMANN:
        raise ConfigurationError("lattice host supports dirichlet or periodic faces")
    _require_resolution(h, spec.eta, spec.epsilon, spec.shape)
    W = spec.box_halfwidth
    d, eps = spec.d, spec.epsilon
    n = _steps(2.0 * W, h)
    dims = (n,) * d if outer == FaceMode.PERIODIC else (n + 1,) * d
    if int(np.prod(dims)) > memory_cap_nodes:
        raise ConfigurationError(
            f"lattice grid would need {int(np.prod(dims))} nodes "
            f"({n} per axis), above the cap of {memory_cap_nodes}"
        )
    m = math.floor(2.0 * W / eps + 1e-9)
    if outer == FaceMode.PERIODIC and abs(m * eps - 2.0 * W) > 1e-9:
        raise ConfigurationError(
            "periodic lattice box must hold a whole number of cells"
        )
    # center the perforated block inside the box
    start = -W + (2.0 * W - m * eps) / 2.0
    origin = (-W,) * d
    labels = _lattice_labels(
        dims, origin, h, eps, spec.eta, spec.shape, [(0, m)] * d, start
    )
    if outer == FaceMode.DIRICHLET:
        for a in range(d):
            idx = [slice(None)] * d
            for edge in (0, dims[a] - 1):
                idx[a] = edge
                labels[tuple(idx)] = EXTERIOR
    grid = Grid(d, h, origin, labels, (outer,) * d)
    if grid.fluid_count == 0:
        raise ConfigurationError("empty fluid set")
    return grid


def bounded_hole_count(epsilon: float, d: int) -> int:
    """Number of perforated cells in the unit-cube host.

    Cells ``epsilon*(k + [0,1]^d)`` are perforated iff their closure lies in
    the open unit cube, i.e. the outermost ring of cells stays solid.
    """
    m = round(1.0 / epsilon)
    if abs(m * epsilon - 1.0) > 1e-9:
        raise ConfigurationError("epsilon must divide 1 for the bounded host")
    return max(m - 2, 0) ** d


def build_bounded_domain(spec: DomainSpec, h: float,
                         memory_cap_nodes: int = 40_000_000) -> Grid:
    """Grid on the unit-cube host with holes only in fully interior cells."""
    _require_resolution(h, spec.eta, spec.epsilon, spec.shape)
    d, eps = spec.d, spec.epsilon
    m = round(1.0 / eps)
    if abs(m * eps - 1.0) > 1e-9:
        raise ConfigurationError("epsilon must divide 1 for the bounded host")
    n = _steps(1.0, h)
    dims = (n + 1,) * d
    if int(np.prod(dims)) > memory_cap_nodes:
        raise ConfigurationError(
            f"bounded grid would need {int(np.prod(dims))} nodes, above the cap"
        )
    origin = (0.0,) * d
    labels = _lattice_labels(
        dims, origin, h, eps, spec.eta, spec.shape, [(1, m - 1)] * d, 0.0
    )
    for a in range(d):
        idx = [slice(None)] * d
        for edge in (0, dims[a] - 1):
            idx[a] = edge
            labels[tuple(idx)] = EXTERIOR
    grid = Grid(d, h, origin, labels, (FaceMode.DIRICHLET,) * d)
    if grid.fluid_count == 0:
        raise ConfigurationError("empty fluid set")
    return grid


def fluid_connected(grid: Grid) -> bool:
    """Whether the fluid node set is edge-connected (flood fill)."""
    mask = grid.fluid_mask
    if not mask.any():
        return False
    visited = np.zeros_like(mask)
    seed = tuple(int(i) for i in np.argwhere(mask)[0])
    stack = [seed]
    visited[seed] = True
    dims = grid.dims
    while stack:
        node = stack.pop()
        for a in range(grid.d):
            for step in (-1, 1):
                nb = list(node)
                nb[a] += step
                if grid.periodic[a]:
                    nb[a] %= dims[a]
                elif not 0 <= nb[a] < dims[a]:
                    continue
                nb = tuple(nb)
                if mask[nb] and not visited[nb]:
                    visited[nb] = True
                    stack.append(nb)
    return bool(np.array_equal(visited, mask))
