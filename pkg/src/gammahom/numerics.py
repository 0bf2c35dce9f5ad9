"""Uniform grids, nodal fields, discrete gradients and midpoint quadrature.

Matrices are plain ``float64`` numpy arrays of shape ``(N, m)``: ``N`` is the
target dimension (rows) and ``m`` the source dimension (columns).  Nodal
fields are stored node-major, shape ``(n_nodes, N)``, nodes ordered C-style
over the ``(n+1,)*m`` lattice.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import StructuralError

__all__ = [
    "Grid",
    "GridField",
    "as_matrix",
    "gradient_at_cells",
    "integrate_cellwise",
    "wedge",
    "frobenius",
]


def as_matrix(Y, rows=None, cols=None) -> np.ndarray:
    """Coerce ``Y`` to a finite float ``(rows, cols)`` array.

    Scalars become ``1x1`` matrices and 1-D input a single column.
    """
    arr = np.array(Y, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise StructuralError(f"expected a 2-D matrix, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise StructuralError(f"matrix has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise StructuralError(f"matrix has {arr.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError("matrix has non-finite entries")
    return arr


def frobenius(A) -> np.ndarray:
    """Frobenius norm over the trailing two axes."""
    A = np.asarray(A, dtype=np.float64)
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


def wedge(a, b) -> np.ndarray:
    """Cross product ``a x b`` of 3-vectors (broadcasts over leading axes)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != 3 or b.shape[-1] != 3:
        raise StructuralError("wedge needs 3-component vectors")
    return np.cross(a, b)


@dataclass(frozen=True)
class Grid:
    """Uniform axis-aligned grid on the cube ``(0, side_length)^dim``."""

    dim: int
    side_length: float
    nodes_per_side: int

    def __post_init__(self):
        if self.dim < 1:
            raise StructuralError("grid dimension must be >= 1")
        if self.nodes_per_side < 1:
            raise StructuralError("nodes_per_side must be >= 1")
        if not self.side_length > 0:
            raise StructuralError("side_length must be positive")

    @property
    def spacing(self) -> float:
        return self.side_length / self.nodes_per_side

    @property
    def node_shape(self) -> tuple:
        return (self.nodes_per_side + 1,) * self.dim

    @property
    def cell_shape(self) -> tuple:
        return (self.nodes_per_side,) * self.dim

    @property
    def n_nodes(self) -> int:
        return (self.nodes_per_side + 1) ** self.dim

    @property
    def n_cells(self) -> int:
        return self.nodes_per_side ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def node_coords(self) -> np.ndarray:
        """Node coordinates, shape ``node_shape + (dim,)``."""
        ticks = np.arange(self.nodes_per_side + 1) * self.spacing
        mesh = np.meshgrid(*([ticks] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def cell_midpoints(self) -> np.ndarray:
        """Cell midpoints, shape ``cell_shape + (dim,)``."""
        ticks = (np.arange(self.nodes_per_side) + 0.5) * self.spacing
        mesh = np.meshgrid(*([ticks] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def boundary_mask(self) -> np.ndarray:
        """Boolean array over ``node_shape``, true on the cube boundary."""
        mask = np.zeros(self.node_shape, dtype=bool)
        for axis in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[axis] = 0
            hi[axis] = -1
            mask[tuple(lo)] = True
            mask[tuple(hi)] = True
        return mask

    @classmethod
    def with_resolution(cls, dim: int, side_length, per_unit: int) -> "Grid":
        """Grid with ``per_unit`` cells per unit length; ``side_length * per_unit`` must be an integer."""
        n = Fraction(side_length).limit_denominator(10**6) * per_unit
        if n.denominator != 1 or n < 1:
            raise StructuralError(
                f"side length {side_length} with {per_unit} nodes per unit is not an integer node count"
            )
        return cls(dim, float(side_length), int(n))


@dataclass
class GridField:
    """Nodal field with ``components`` values per grid node."""

    grid: Grid
    components: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape == self.grid.node_shape + (self.components,):
            vals = vals.reshape(self.grid.n_nodes, self.components)
        if vals.shape != (self.grid.n_nodes, self.components):
            raise StructuralError(
                f"field values have shape {vals.shape}, expected {(self.grid.n_nodes, self.components)}"
            )
        self.values = vals

    @classmethod
    def zeros(cls, grid: Grid, components: int) -> "GridField":
        return cls(grid, components, np.zeros((grid.n_nodes, components)))

    @classmethod
    def from_function(cls, grid: Grid, func, components: int) -> "GridField":
        """Sample ``func(x) -> (..., N)`` at every node (no boundary masking)."""
        x = grid.node_coords().reshape(-1, grid.dim)
        vals = np.asarray(func(x), dtype=np.float64).reshape(grid.n_nodes, components)
        return cls(grid, components, vals)

    def nodal(self) -> np.ndarray:
        """Values reshaped to ``node_shape + (N,)`` (a view)."""
        return self.values.reshape(self.grid.node_shape + (self.components,))

    def boundary_values(self) -> np.ndarray:
        return self.values[self.grid.boundary_mask().ravel()]

    def with_zero_boundary(self) -> "GridField":
        vals = self.values.copy()
        vals[self.grid.boundary_mask().ravel()] = 0.0
        return GridField(self.grid, self.components, vals)

    # -- serialization -------------------------------------------------------

    def dumps(self) -> str:
        """Delimited-text dump; floats are written with ``repr`` so reloading is exact."""
        buf = io.StringIO()
        g = self.grid
        buf.write("# gammahom GridField v1\n")
        buf.write(f"dim,{g.dim}\n")
        buf.write(f"side_length,{g.side_length!r}\n")
        buf.write(f"nodes_per_side,{g.nodes_per_side}\n")
        buf.write(f"components,{self.components}\n")
        buf.write("values\n")
        for row in self.values:
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "GridField":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        header = {}
        idx = 0
        while lines[idx] != "values":
            key, val = lines[idx].split(",", 1)
            header[key] = val
            idx += 1
        grid = Grid(int(header["dim"]), float(header["side_length"]), int(header["nodes_per_side"]))
        comps = int(header["components"])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[idx + 1:]]
        return cls(grid, comps, np.array(rows, dtype=np.float64).reshape(grid.n_nodes, comps))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "GridField":
        return cls.loads(Path(path).read_text())


def gradient_at_cells(field: GridField, components: int | None = None) -> np.ndarray:
    """Per-cell ``N x m`` gradients, shape ``grid.cell_shape + (N, m)``.

    Each entry is the first-order difference along one axis averaged over the
    remaining corner pairs, so affine fields are reproduced exactly.
    """
    if components is not None and components != field.components:
        raise StructuralError(f"field has {field.components} components, expected {components}")
    grad, _ = _kernels.gather(field.nodal(), field.grid.spacing)
    return grad


def cell_averages(field: GridField) -> np.ndarray:
    """Corner averages of the field per cell, shape ``grid.cell_shape + (N,)``."""
    _, mid = _kernels.gather(field.nodal(), field.grid.spacing)
    return mid


def integrate_cellwise(cell_values, grid: Grid) -> float:
    """Midpoint rule: ``h^m`` times the sum of one value per cell."""
    vals = np.asarray(cell_values, dtype=np.float64)
    if vals.size != grid.n_cells:
        raise StructuralError(f"got {vals.size} cell values for {grid.n_cells} cells")
    return float(grid.cell_volume * np.sum(vals))
