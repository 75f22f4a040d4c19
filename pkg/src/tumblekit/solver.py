"""Forward and adjoint solvers for the two-velocity kinetic system.

Transport is discretized by Lax-Wendroff with zero ghost values; the
collision operator is applied explicitly, evaluated at the pre-step state.
The adjoint equation is solved by the substitution tau = t_final - t, which
turns it into forward transport at reversed velocities with the transposed
collision coupling. With both pieces explicit and additive, one step of the
adjoint scheme is exactly the transpose of one forward step, so the discrete
pairing sum_j sum_v f*g is conserved across steps up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import run_transport
from .errors import BoundaryContaminationError, DivergenceError
from .kernel import KernelField
from .mesh import SpaceGrid, TimeGrid, V_SIZE, support_margin_check

#: values below this fraction of the peak count as zero when locating support
SUPPORT_RTOL = 1e-14


@dataclass(frozen=True)
class PhaseField:
    """Densities at velocity +1 and -1 on the grid nodes."""

    f_plus: np.ndarray = field(repr=False)
    f_minus: np.ndarray = field(repr=False)

    def __post_init__(self):
        fp = np.asarray(self.f_plus, dtype=float)
        fm = np.asarray(self.f_minus, dtype=float)
        if fp.ndim != 1 or fp.shape != fm.shape:
            raise ValueError("f_plus and f_minus must be 1D arrays of equal length")
        object.__setattr__(self, "f_plus", fp)
        object.__setattr__(self, "f_minus", fm)

    @property
    def n_points(self) -> int:
        return self.f_plus.size

    @property
    def max_abs(self) -> float:
        return max(float(np.abs(self.f_plus).max()), float(np.abs(self.f_minus).max()))

    @classmethod
    def isotropic(cls, profile) -> "PhaseField":
        profile = np.asarray(profile, dtype=float)
        return cls(f_plus=profile.copy(), f_minus=profile.copy())

    def stack(self) -> np.ndarray:
        return np.stack([self.f_plus, self.f_minus])

    def support(self, grid: SpaceGrid) -> tuple[float, float] | None:
        """Smallest node interval containing all non-negligible values."""
        mag = np.maximum(np.abs(self.f_plus), np.abs(self.f_minus))
        peak = mag.max()
        if peak == 0.0:
            return None
        nz = np.nonzero(mag > SUPPORT_RTOL * peak)[0]
        return float(grid.nodes[nz[0]]), float(grid.nodes[nz[-1]])


@dataclass(frozen=True)
class PhaseTrajectory:
    """States at every time node, shape (n_steps+1, 2, n_points)."""

    data: np.ndarray = field(repr=False)

    @property
    def n_times(self) -> int:
        return self.data.shape[0]

    def field_at(self, n: int) -> PhaseField:
        return PhaseField(f_plus=self.data[n, 0], f_minus=self.data[n, 1])

    @property
    def final(self) -> PhaseField:
        return self.field_at(self.n_times - 1)

    def total_mass(self, grid: SpaceGrid) -> np.ndarray:
        """Discrete mass sum_j (f_plus + f_minus)_j dx at every time node."""
        return self.data.sum(axis=(1, 2)) * grid.dx


def collision(k1, k2, fp, fm):
    """Tumbling exchange (d_plus, d_minus); the two sum to zero exactly."""
    dp = k1 * fm - k2 * fp
    return dp, -dp


def _check_containment(grid: SpaceGrid, state: PhaseField, t_final: float, what: str):
    supp = state.support(grid)
    if supp is None:
        return
    if supp[0] < grid.x_min or supp[1] > grid.x_max:
        raise BoundaryContaminationError(f"{what} extends beyond the window")
    if not support_margin_check(grid, supp, t_final):
        raise BoundaryContaminationError(
            f"{what} supported on [{supp[0]:.6g}, {supp[1]:.6g}] can reach the "
            f"window boundary within t={t_final:.6g}"
        )


def _run(grid, tgrid, state0, coeffs, vp_sign, what):
    traj = np.empty((tgrid.n_steps + 1, 2, grid.n_points))
    traj[0] = state0
    run_transport(traj, *coeffs, tgrid.dt / grid.dx, tgrid.dt, vp_sign)
    if not np.isfinite(traj[-1]).all():
        raise DivergenceError(f"{what} produced non-finite values")
    return traj


def forward_solve(
    grid: SpaceGrid,
    tgrid: TimeGrid,
    kernel: KernelField,
    phi: PhaseField,
    check_support: bool = True,
) -> PhaseTrajectory:
    """Evolve the initial state phi to t_final; returns the full trajectory."""
    if phi.n_points != grid.n_points:
        raise ValueError("initial state does not match the grid")
    if check_support:
        _check_containment(grid, phi, tgrid.t_final, "initial data")
    k1, k2 = kernel.node_rates(grid)
    traj = _run(grid, tgrid, phi.stack(), (k1, k2, k2, k1), +1, "forward solve")
    return PhaseTrajectory(data=traj)


def adjoint_solve(
    grid: SpaceGrid,
    tgrid: TimeGrid,
    kernel: KernelField,
    psi: PhaseField,
    check_support: bool = True,
) -> PhaseTrajectory:
    """Solve the backward equation from the final condition psi.

    The returned trajectory is indexed by forward time: entry n is the
    adjoint state at t_n, entry n_steps equals psi.
    """
    if psi.n_points != grid.n_points:
        raise ValueError("final condition does not match the grid")
    if check_support:
        _check_containment(grid, psi, tgrid.t_final, "adjoint final condition")
    k1, k2 = kernel.node_rates(grid)
    # reversed time: g(+1) advects left with gain/loss k2, g(-1) right with k1
    traj = _run(grid, tgrid, psi.stack(), (k2, k2, k1, k1), -1, "adjoint solve")
    return PhaseTrajectory(data=traj[::-1].copy())


def aggregate_final_condition(measurements, residuals) -> PhaseField:
    """Final condition -(1/L) sum_l mu_l * residual_l, identical in both velocities."""
    functions = measurements.functions
    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != (len(functions),):
        raise ValueError(
            f"expected {len(functions)} residuals, got shape {residuals.shape}"
        )
    n = functions[0].samples.size
    psi = np.zeros(n)
    for mu, res in zip(functions, residuals):
        psi -= res * mu.samples
    psi /= len(functions)
    return PhaseField.isotropic(psi)


def forward_sup_bound(kernel: KernelField, phi: PhaseField, times) -> np.ndarray:
    """A-priori envelope exp(2*|V|*C_K*t) * max|phi| for the forward state."""
    c_k = kernel.max_rate
    return np.exp(2.0 * V_SIZE * c_k * np.asarray(times)) * phi.max_abs


def adjoint_l1_bound(
    kernel: KernelField, psi: PhaseField, grid: SpaceGrid, tgrid: TimeGrid
) -> np.ndarray:
    """A-priori envelope for the per-velocity L1 norm of the adjoint state."""
    c_k = kernel.max_rate
    psi_l1 = max(
        float(np.abs(psi.f_plus).sum()), float(np.abs(psi.f_minus).sum())
    ) * grid.dx
    return np.exp(2.0 * V_SIZE * c_k * (tgrid.t_final - tgrid.times)) * psi_l1


def trajectory_rows(traj: PhaseTrajectory, grid: SpaceGrid, tgrid: TimeGrid):
    """Rows (t, x, f_plus, f_minus) for the optional trajectory dump."""
    for n in range(traj.n_times):
        t = tgrid.times[n]
        for j in range(grid.n_points):
            yield (t, grid.nodes[j], traj.data[n, 0, j], traj.data[n, 1, j])
