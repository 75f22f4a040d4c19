"""Piecewise-constant tumbling kernel on a cell partition.

The kernel carries two directed rates per cell: ``values[r, 0]`` is the rate
of switching into velocity +1 (from -1) and ``values[r, 1]`` the rate into
velocity -1 (from +1). Cells are half-open intervals [a_{r-1}, a_r); the
kernel is zero outside the partition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError
from .mesh import SpaceGrid

#: breakpoints must sit on grid nodes to within this fraction of dx
ALIGNMENT_TOL = 1e-12


@dataclass(frozen=True)
class KernelField:
    """Tumbling rates, constant on each cell of a strictly increasing partition."""

    breakpoints: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        bps = np.asarray(self.breakpoints, dtype=float).copy()
        vals = np.asarray(self.values, dtype=float).copy()
        if bps.ndim != 1 or bps.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.isfinite(bps)):
            raise ValueError("breakpoints must be finite")
        if not np.all(np.diff(bps) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.shape != (bps.size - 1, 2):
            raise ValueError(
                f"values must have shape ({bps.size - 1}, 2), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("rates must be finite")
        if np.any(vals < 0):
            raise ValueError("rates must be nonnegative")
        bps.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def max_rate(self) -> float:
        return float(self.values.max())

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def cell_index(self, x: float) -> int:
        """1-based cell number r with a_{r-1} <= x < a_r."""
        bps = self.breakpoints
        if x < bps[0] or x >= bps[-1]:
            raise OutOfDomainError(
                f"x={x!r} outside the kernel domain [{bps[0]!r}, {bps[-1]!r})"
            )
        return int(np.searchsorted(bps, x, side="right"))

    def rates_at(self, x: float) -> tuple[float, float]:
        """(rate into +1, rate into -1) for the cell containing x."""
        r = self.cell_index(x) - 1
        return float(self.values[r, 0]), float(self.values[r, 1])

    def flatten(self) -> np.ndarray:
        """Vector (k_1_1, k_1_2, k_2_1, ..., k_R_2)."""
        return self.values.reshape(-1).copy()

    @classmethod
    def unflatten(cls, vec, breakpoints) -> "KernelField":
        vec = np.asarray(vec, dtype=float)
        breakpoints = np.asarray(breakpoints, dtype=float)
        n_cells = breakpoints.size - 1
        if vec.ndim != 1 or vec.size != 2 * n_cells:
            raise ValueError(
                f"expected a vector of length {2 * n_cells}, got shape {vec.shape}"
            )
        return cls(breakpoints=breakpoints, values=vec.reshape(n_cells, 2))

    def with_values(self, vec) -> "KernelField":
        """Same partition, new flat rate vector."""
        return KernelField.unflatten(vec, self.breakpoints)

    def assert_aligned(self, grid: SpaceGrid):
        """Every breakpoint must coincide with a grid node.

        Alignment makes per-cell integrals exact node-range sums, with no
        partial-cell quadrature. The tolerance is a fraction of dx but never
        below a few ulp of the coordinates, which matters on fine grids.
        """
        eps = np.finfo(float).eps
        scale = max(abs(grid.x_min), abs(grid.x_max), grid.dx)
        tol = max(ALIGNMENT_TOL * grid.dx, 8.0 * eps * scale)
        for a in self.breakpoints:
            j = round((a - grid.x_min) / grid.dx)
            if j < 0 or j >= grid.n_points or abs(grid.nodes[int(j)] - a) > tol:
                raise ValueError(
                    f"breakpoint {a!r} does not coincide with a node of the grid"
                )

    def cell_node_ranges(self, grid: SpaceGrid) -> list[tuple[int, int]]:
        """Half-open node index range [j_lo, j_hi) for each cell, in order."""
        self.assert_aligned(grid)
        edges = [int(round((a - grid.x_min) / grid.dx)) for a in self.breakpoints]
        return [(edges[r], edges[r + 1]) for r in range(self.n_cells)]

    def node_rates(self, grid: SpaceGrid) -> tuple[np.ndarray, np.ndarray]:
        """Rates sampled at every grid node; zero outside the partition."""
        self.assert_aligned(grid)
        x = grid.nodes
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        inside = (x >= self.breakpoints[0]) & (x < self.breakpoints[-1])
        idx = np.clip(idx, 0, self.n_cells - 1)
        k1 = np.where(inside, self.values[idx, 0], 0.0)
        k2 = np.where(inside, self.values[idx, 1], 0.0)
        return k1, k2
