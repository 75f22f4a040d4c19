"""Test functions, the velocity-averaged measurement map, and synthetic data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelField
from .mesh import SpaceGrid, TimeGrid
from .solver import PhaseField, PhaseTrajectory, forward_solve


def bump_profile(s):
    """Standard smooth bump: exp(1 - 1/(1-s^2)) inside |s| < 1, zero outside.

    Normalized so the center value is exactly 1.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


@dataclass(frozen=True)
class Indicator:
    center: float
    half_width: float
    amplitude: float
    kind: str = field(default="indicator", init=False)


@dataclass(frozen=True)
class MollifiedBump:
    center: float
    eta: float
    kind: str = field(default="mollified", init=False)


@dataclass(frozen=True)
class TestFunction:
    """A spatial test function sampled on the grid nodes."""

    samples: np.ndarray = field(repr=False)
    descriptor: Indicator | MollifiedBump

    def l1_norm(self, grid: SpaceGrid) -> float:
        return float(np.abs(self.samples).sum()) * grid.dx

    def support(self) -> tuple[float, float]:
        d = self.descriptor
        if isinstance(d, Indicator):
            return d.center - d.half_width, d.center + d.half_width
        return d.center - d.eta, d.center + d.eta


@dataclass(frozen=True)
class MeasurementSet:
    """Test functions read at a common measurement time."""

    functions: tuple[TestFunction, ...]
    t_final: float

    def __post_init__(self):
        if len(self.functions) < 1:
            raise ValueError("need at least one test function")
        object.__setattr__(self, "functions", tuple(self.functions))

    def __len__(self) -> int:
        return len(self.functions)


def make_indicator(
    center: float, half_width: float, amplitude: float, grid: SpaceGrid
) -> TestFunction:
    """Scaled indicator of [center - half_width, center + half_width]."""
    if half_width < grid.dx:
        raise ValueError(
            f"half_width={half_width:.6g} is below the grid spacing {grid.dx:.6g}"
        )
    if center - half_width < grid.x_min or center + half_width > grid.x_max:
        raise ValueError("indicator support exceeds the grid window")
    # tiny cushion so grid-aligned edges are included despite round-off
    edge = half_width * (1.0 + 1e-12)
    samples = np.where(np.abs(grid.nodes - center) <= edge, amplitude, 0.0)
    return TestFunction(
        samples=samples,
        descriptor=Indicator(center=center, half_width=half_width, amplitude=amplitude),
    )


def make_mollified(center: float, eta: float, grid: SpaceGrid) -> TestFunction:
    """Mollified point detector (1/eta) * bump((x - center)/eta)."""
    if eta < 2.0 * grid.dx:
        raise ValueError(
            f"eta={eta:.6g} is too small to resolve (need at least 2*dx={2 * grid.dx:.6g})"
        )
    if center - eta < grid.x_min or center + eta > grid.x_max:
        raise ValueError("mollifier support exceeds the grid window")
    samples = bump_profile((grid.nodes - center) / eta) / eta
    return TestFunction(samples=samples, descriptor=MollifiedBump(center=center, eta=eta))


def measure(traj: PhaseTrajectory, mu: TestFunction, grid: SpaceGrid) -> float:
    """Velocity-averaged reading of the final state through mu.

    Trapezoid in space: interior nodes carry weight 1, the two window end
    nodes weight 1/2 (relevant only when mu touches the window ends).
    """
    final = traj.data[-1]
    integrand = (final[0] + final[1]) * mu.samples
    s = integrand.sum() - 0.5 * (integrand[0] + integrand[-1])
    return float(s * grid.dx)


def measure_all(
    traj: PhaseTrajectory, measurements: MeasurementSet, grid: SpaceGrid
) -> np.ndarray:
    return np.array([measure(traj, mu, grid) for mu in measurements.functions])


def synthesize_data(
    kernel_star: KernelField,
    phi: PhaseField,
    measurements: MeasurementSet,
    grid: SpaceGrid,
    tgrid: TimeGrid,
) -> np.ndarray:
    """Noise-free readings of the ground-truth solve; one forward solve shared by all."""
    traj = forward_solve(grid, tgrid, kernel_star, phi)
    return measure_all(traj, measurements, grid)
