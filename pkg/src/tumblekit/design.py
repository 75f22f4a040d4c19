"""Construction and validation of the decoupling experimental design.

The design places one compactly supported bump of initial density at each
cell center and two indicator detectors per cell at center +- t_meas. With
the measurement time bounded as in :func:`validate_design`, no signal
relevant to cell r ever leaves cell r, the Hessian becomes block diagonal
with 2x2 blocks, and each cell can be reconstructed independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleDesignError
from .kernel import KernelField
from .mesh import SpaceGrid, V_SIZE, DEFAULT_CFL_SAFETY
from .observe import MeasurementSet, make_indicator
from .solver import PhaseField

#: time-bound constant in the design's measurement-time inequality
TIME_BOUND_CONST = 0.09

#: default coefficient in the shape rule d = d_mu = c * T^2
DEFAULT_SHAPE_C = 8.0

#: resolvability requirement: at least this many nodes per bump half-width
DEFAULT_NODES_PER_HALFWIDTH = 4


@dataclass(frozen=True)
class DesignSpec:
    """Geometry of the decoupling design."""

    breakpoints: np.ndarray = field(repr=False)
    d: float
    d_mu: float
    t_meas: float
    bump_amplitude: float = 1.0
    mu_amplitude: float | None = None  # default: unit mass, 1/(2*d_mu)

    def __post_init__(self):
        bps = np.asarray(self.breakpoints, dtype=float).copy()
        if bps.ndim != 1 or bps.size < 2 or not np.all(np.diff(bps) > 0):
            raise ValueError("breakpoints must be strictly increasing, length >= 2")
        bps.flags.writeable = False
        object.__setattr__(self, "breakpoints", bps)
        if self.mu_amplitude is None:
            object.__setattr__(self, "mu_amplitude", 1.0 / (2.0 * self.d_mu))

    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])

    @property
    def min_cell_width(self) -> float:
        return float(np.diff(self.breakpoints).min())

    @property
    def delta(self) -> float:
        return (self.d + self.d_mu) / self.t_meas

    @property
    def detector_centers(self) -> np.ndarray:
        """2R centers ordered (cell 1 left, cell 1 right, cell 2 left, ...)."""
        out = np.empty(2 * self.n_cells)
        out[0::2] = self.centers - self.t_meas
        out[1::2] = self.centers + self.t_meas
        return out


def validate_design(spec: DesignSpec, c_k: float) -> list[str]:
    """Names of violated design constraints; an empty list means valid."""
    violations = []
    w = spec.min_cell_width
    if not spec.d < w / 4.0:
        violations.append("bump_halfwidth")  # d < min cell width / 4
    if not spec.d_mu <= spec.d:
        violations.append("measurement_halfwidth")  # d_mu <= d
    delta = spec.delta
    t_cap = min(
        (1.0 - delta) * TIME_BOUND_CONST / (c_k * V_SIZE),
        w / 4.0 - spec.d / 2.0,
    )
    if not spec.t_meas < t_cap:
        violations.append("time_bound")
    if not delta < math.exp(-spec.t_meas * c_k * V_SIZE):
        violations.append("delta_bound")
    return violations


def _t_feasible(t, width, c_k, shape_c):
    d = shape_c * t * t
    spec_like_delta = 2.0 * d / t
    if d >= width / 4.0:
        return False
    if spec_like_delta >= math.exp(-t * c_k * V_SIZE):
        return False
    cap = min(
        (1.0 - spec_like_delta) * TIME_BOUND_CONST / (c_k * V_SIZE),
        width / 4.0 - d / 2.0,
    )
    return t < cap


def max_feasible_t(width: float, c_k: float, shape_c: float) -> float:
    """Largest measurement time under the shape rule d = d_mu = shape_c*T^2."""
    lo = 1e-9 * width
    if not _t_feasible(lo, width, c_k, shape_c):
        raise InfeasibleDesignError(
            f"no feasible measurement time for cell width {width:.6g}, "
            f"c_k={c_k:.6g}, shape_c={shape_c:.6g}"
        )
    hi = width
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _t_feasible(mid, width, c_k, shape_c):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class DesignRealization:
    """A design together with its aligned grid, initial data, and detectors."""

    spec: DesignSpec
    grid: SpaceGrid
    phi: PhaseField
    measurements: MeasurementSet

    @property
    def breakpoints(self) -> np.ndarray:
        return self.spec.breakpoints


def bump_initial_data(spec: DesignSpec, grid: SpaceGrid) -> PhaseField:
    """Sum of truncated Gaussians, one per cell center, in both velocities.

    Each bump has deviation d/3, is cut at distance d, and is shifted down so
    it reaches zero continuously at the cut.
    """
    x = grid.nodes
    sigma = spec.d / 3.0
    floor = math.exp(-0.5 * (spec.d / sigma) ** 2)
    profile = np.zeros_like(x)
    for c in spec.centers:
        s = np.abs(x - c)
        vals = np.exp(-0.5 * (s / sigma) ** 2) - floor
        profile += np.where(s <= spec.d, np.maximum(vals, 0.0), 0.0)
    profile *= spec.bump_amplitude
    return PhaseField.isotropic(profile)


def design_measurements(spec: DesignSpec, grid: SpaceGrid) -> MeasurementSet:
    functions = [
        make_indicator(c, spec.d_mu, spec.mu_amplitude, grid)
        for c in spec.detector_centers
    ]
    return MeasurementSet(functions=tuple(functions), t_final=spec.t_meas)


def build_design(
    n_cells: int,
    interval: tuple[float, float],
    c_k: float,
    shape_c: float = DEFAULT_SHAPE_C,
    nodes_per_halfwidth: int = DEFAULT_NODES_PER_HALFWIDTH,
    t_margin: float = 0.95,
) -> DesignRealization:
    """Uniform-cell design with the largest workable measurement time.

    The measurement time is maximized by bisection under the design
    constraints (times ``t_margin`` to stay strictly inside), the grid
    resolves the bump half-width with ``nodes_per_halfwidth`` nodes and an
    even number of nodes per cell (so cell centers are nodes), and the
    measurement time is snapped down to a whole number of node spacings so
    detector supports are grid-symmetric.
    """
    lo, hi = interval
    if not hi > lo:
        raise ValueError("empty design interval")
    if n_cells < 1:
        raise ValueError("need at least one cell")
    width = (hi - lo) / n_cells
    t_raw = t_margin * max_feasible_t(width, c_k, shape_c)
    d = shape_c * t_raw * t_raw
    m = int(math.ceil(width / (d / nodes_per_halfwidth)))
    if m % 2:
        m += 1
    dx = width / m
    t_meas = math.floor(t_raw / dx) * dx
    if t_meas <= 0:
        raise InfeasibleDesignError("feasible measurement time collapses under snapping")
    grid = SpaceGrid(x_min=lo, x_max=hi, n_points=n_cells * m + 1)
    spec = DesignSpec(
        breakpoints=grid.nodes[::m].copy(),  # exactly on nodes
        d=shape_c * t_raw * t_raw,
        d_mu=shape_c * t_raw * t_raw,
        t_meas=t_meas,
    )
    violations = validate_design(spec, c_k)
    if violations:
        raise InfeasibleDesignError(
            f"snapped design violates {violations}; adjust shape_c or resolution"
        )
    phi = bump_initial_data(spec, grid)
    measurements = design_measurements(spec, grid)
    return DesignRealization(spec=spec, grid=grid, phi=phi, measurements=measurements)


@dataclass(frozen=True)
class CellProblem:
    """The restriction of a design problem to one cell.

    The sub-grid reuses the joint grid's spacing, so the sub-problem's
    states coincide with the joint solution restricted to the cell.
    """

    cell: int  # 1-based
    breakpoints: np.ndarray
    grid: SpaceGrid
    phi: PhaseField
    measurements: MeasurementSet

    def kernel(self, k1: float, k2: float) -> KernelField:
        return KernelField(breakpoints=self.breakpoints, values=np.array([[k1, k2]]))


def split_cell_problems(realization: DesignRealization) -> list[CellProblem]:
    """One independent two-parameter problem per cell."""
    spec = realization.spec
    grid = realization.grid
    m = (grid.n_points - 1) // spec.n_cells
    problems = []
    for r in range(spec.n_cells):
        j_lo, j_hi = r * m, (r + 1) * m
        sub_grid = SpaceGrid(
            x_min=float(spec.breakpoints[r]),
            x_max=float(spec.breakpoints[r + 1]),
            n_points=m + 1,
        )
        sub_phi = PhaseField(
            f_plus=realization.phi.f_plus[j_lo : j_hi + 1].copy(),
            f_minus=realization.phi.f_minus[j_lo : j_hi + 1].copy(),
        )
        sub_spec = DesignSpec(
            breakpoints=spec.breakpoints[r : r + 2],
            d=spec.d,
            d_mu=spec.d_mu,
            t_meas=spec.t_meas,
            bump_amplitude=spec.bump_amplitude,
            mu_amplitude=spec.mu_amplitude,
        )
        problems.append(
            CellProblem(
                cell=r + 1,
                breakpoints=spec.breakpoints[r : r + 2].copy(),
                grid=sub_grid,
                phi=sub_phi,
                measurements=design_measurements(sub_spec, sub_grid),
            )
        )
    return problems
