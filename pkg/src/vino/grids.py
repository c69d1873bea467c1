"""Uniform grids and nodal fields shared by the samplers, losses and solvers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    n: int
    x0: float = 0.0
    x1: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"Grid1D needs at least 2 nodes, got {self.n}")
        if self.x1 <= self.x0:
            raise ValueError("Grid1D extent must be positive")

    @property
    def h(self) -> float:
        return (self.x1 - self.x0) / (self.n - 1)

    @property
    def n_nodes(self) -> int:
        return self.n

    @property
    def measure(self) -> float:
        return self.x1 - self.x0

    def nodes(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.n)

    def points(self) -> np.ndarray:
        return self.nodes()[:, None]


@dataclass(frozen=True)
class Grid2D:
    """nx * ny nodes; fields are stored row-major as [ny, nx] (y varies first)."""

    nx: int
    ny: int
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"Grid2D needs at least 2 nodes per axis, got {self.nx}x{self.ny}")
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError("Grid2D extents must be positive")

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / (self.ny - 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def measure(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def xs(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.y0, self.y1, self.ny)

    def points(self) -> np.ndarray:
        """All node coordinates, shape [ny*nx, 2], matching field raveling order."""
        xx, yy = np.meshgrid(self.xs(), self.ys())
        return np.column_stack([xx.ravel(), yy.ravel()])


Grid = Grid1D | Grid2D


@dataclass
class Field:
    """Nodal values of a function on a grid (shape [n] in 1D, [ny, nx] in 2D)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (self.grid.n,) if isinstance(self.grid, Grid1D) else (self.grid.ny, self.grid.nx)
        if self.values.shape != expected:
            raise ValueError(f"field values shape {self.values.shape} does not match grid {expected}")
