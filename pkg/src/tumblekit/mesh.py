"""Spatial and temporal discretization with the explicit-scheme stability contract.

The solvers run on a finite window even though the model lives on the whole
line; :func:`support_margin_check` guarantees that nothing can reach the
window boundary before the final time, which makes the truncation exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

#: number of discrete velocities (the velocity set is {+1, -1} with counting
#: measure, so integrals over velocity carry a factor of 2)
V_SIZE = 2

#: largest advection speed on the velocity set
V_MAX = 1.0

DEFAULT_CFL_SAFETY = 0.9


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform node grid on ``[x_min, x_max]`` with ``n_points`` nodes."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.n_points < 3:
            raise ValueError("a grid needs at least 3 points")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(self.x_min, self.x_max, self.n_points)
        x.flags.writeable = False
        return x

    def node_index(self, x: float, tol: float = 1e-9) -> int:
        """Index of the node at ``x``; raises if ``x`` is off-node by > tol*dx."""
        j = int(round((x - self.x_min) / self.dx))
        if j < 0 or j >= self.n_points or abs(self.nodes[j] - x) > tol * self.dx:
            raise ValueError(f"{x!r} is not a node of this grid")
        return j


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels ``0, dt, ..., t_final`` with ``n_steps`` steps."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if not math.isfinite(self.t_final) or self.t_final <= 0:
            raise ValueError("t_final must be positive and finite")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(0.0, self.t_final, self.n_steps + 1)
        t.flags.writeable = False
        return t


def build_time_grid(
    t_final: float,
    grid: SpaceGrid,
    c_k: float,
    cfl_safety: float = DEFAULT_CFL_SAFETY,
) -> TimeGrid:
    """Time grid satisfying dt <= cfl_safety * min(dx / v_max, 1 / c_k).

    ``c_k`` is an upper bound on every tumbling rate that will be fed to the
    solver; the collision part of the scheme is stable only below 1/c_k.
    """
    if not math.isfinite(t_final) or t_final <= 0:
        raise ValueError("t_final must be positive")
    if not math.isfinite(c_k) or c_k <= 0:
        raise ValueError("c_k must be positive")
    if not 0.0 < cfl_safety <= 1.0:
        raise ValueError("cfl_safety must lie in (0, 1]")
    limit = cfl_safety * min(grid.dx / V_MAX, 1.0 / c_k)
    n_steps = int(math.ceil(t_final / limit))
    return TimeGrid(t_final=t_final, n_steps=n_steps)


def support_margin_check(
    grid: SpaceGrid, support: tuple[float, float], t_final: float
) -> bool:
    """True iff the support, dilated by the travel distance, stays interior.

    A signal moving at speed ``V_MAX`` that starts inside ``support`` cannot
    touch the window boundary before ``t_final``.
    """
    lo, hi = support
    if lo > hi:
        raise ValueError("empty support interval")
    if lo < grid.x_min or hi > grid.x_max:
        raise ValueError("support must lie inside the grid window")
    travel = V_MAX * t_final
    return (lo - travel > grid.x_min) and (hi + travel < grid.x_max)
