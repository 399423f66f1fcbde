"""Legacy VTK STRUCTURED_POINTS ASCII export for grids and fields."""

from __future__ import annotations

import numpy as np

from .calculus import ScalarField
from .geometry import Grid


def _header(grid: Grid, title: str) -> list[str]:
    dims = grid.dims + (1,) * (3 - grid.d)
    origin = grid.origin + (0.0,) * (3 - grid.d)
    return [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(n) for n in dims),
        "ORIGIN " + " ".join(repr(float(o)) for o in origin),
        "SPACING " + " ".join(repr(float(grid.h)) for _ in range(3)),
        f"POINT_DATA {int(np.prod(grid.dims))}",
    ]


def _flat(values: np.ndarray) -> np.ndarray:
    # VTK structured points vary x fastest; our arrays are indexed [x, y, z]
    return values.reshape(values.shape, order="C").ravel(order="F")


def labels_to_vtk(grid: Grid, title: str = "perforated domain labels") -> str:
    """Node classification as an integer field: 0=fluid, 1=hole, 2=exterior."""
    lines = _header(grid, title)
    lines.append("SCALARS label int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(v)) for v in _flat(grid.labels))
    return "\n".join(lines) + "\n"


def field_to_vtk(field: ScalarField, name: str = "u",
                 title: str = "scalar field") -> str:
    lines = _header(field.grid, title)
    lines.append(f"SCALARS {name} double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(repr(float(v)) for v in _flat(field.values))
    return "\n".join(lines) + "\n"


def write_vtk(text: str, path: str):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
