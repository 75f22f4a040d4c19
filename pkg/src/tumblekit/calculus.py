"""Loss, adjoint gradients, Hessians, and a self-contained symmetric eigensolver.

Gradient quadrature
-------------------
The gradient of the loss with respect to the rate of cell r,

    dC/dK_{r,1} = int_0^T int_{I_r} f(-1) (g(-1) - g(+1)) dx dt
    dC/dK_{r,2} = int_0^T int_{I_r} f(+1) (g(+1) - g(-1)) dx dt,

is evaluated with the quadrature that is consistent with the explicit
scheme: the time integral pairs the forward state at step n with the adjoint
state at step n+1 (left-rectangle in time), and the space integral sums full
node weights over the half-open cell. Because one adjoint step is exactly
the transpose of one forward step, this evaluation reproduces the derivative
of the discrete loss to round-off, which is what finite differences of the
loss converge to. Symmetric quadratures of the same integral differ from
the discrete derivative at O(dt + dx) and fail verification tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericalError
from .kernel import KernelField
from .mesh import SpaceGrid, TimeGrid, V_SIZE
from .observe import MeasurementSet, TestFunction, measure_all
from .solver import (
    PhaseField,
    PhaseTrajectory,
    adjoint_solve,
    aggregate_final_condition,
    forward_solve,
)

DEFAULT_H_GRADCHECK = 1e-5
DEFAULT_H_HESSIAN = 1e-4


class LossEval(NamedTuple):
    value: float
    residuals: np.ndarray
    trajectory: PhaseTrajectory


def loss(
    kernel: KernelField,
    phi: PhaseField,
    measurements: MeasurementSet,
    data: np.ndarray,
    grid: SpaceGrid,
    tgrid: TimeGrid,
) -> LossEval:
    """Half mean-square data misfit; residuals and trajectory returned for reuse."""
    data = np.asarray(data, dtype=float)
    if data.shape != (len(measurements),):
        raise ValueError("data length does not match the measurement set")
    traj = forward_solve(grid, tgrid, kernel, phi)
    residuals = measure_all(traj, measurements, grid) - data
    value = 0.5 / len(measurements) * float(residuals @ residuals)
    return LossEval(value=value, residuals=residuals, trajectory=traj)


def _pair_cells(
    f_traj: PhaseTrajectory,
    g_traj: PhaseTrajectory,
    kernel: KernelField,
    grid: SpaceGrid,
    tgrid: TimeGrid,
) -> np.ndarray:
    """Assemble the per-cell gradient entries from forward/adjoint trajectories."""
    f = f_traj.data
    g = g_traj.data
    gdiff = g[1:, 1, :] - g[1:, 0, :]  # (g(-1) - g(+1)) at steps 1..N
    p1 = np.einsum("nj,nj->j", f[:-1, 1, :], gdiff)
    p2 = np.einsum("nj,nj->j", f[:-1, 0, :], -gdiff)
    scale = tgrid.dt * grid.dx
    grad = np.empty(2 * kernel.n_cells)
    for r, (j_lo, j_hi) in enumerate(kernel.cell_node_ranges(grid)):
        grad[2 * r] = p1[j_lo:j_hi].sum() * scale
        grad[2 * r + 1] = p2[j_lo:j_hi].sum() * scale
    return grad


def loss_and_gradient(
    kernel: KernelField,
    phi: PhaseField,
    measurements: MeasurementSet,
    data: np.ndarray,
    grid: SpaceGrid,
    tgrid: TimeGrid,
) -> tuple[LossEval, np.ndarray]:
    """One forward and one adjoint solve; returns the loss bundle and the gradient."""
    ev = loss(kernel, phi, measurements, data, grid, tgrid)
    psi = aggregate_final_condition(measurements, ev.residuals)
    g_traj = adjoint_solve(grid, tgrid, kernel, psi)
    return ev, _pair_cells(ev.trajectory, g_traj, kernel, grid, tgrid)


def gradient(kernel, phi, measurements, data, grid, tgrid) -> np.ndarray:
    return loss_and_gradient(kernel, phi, measurements, data, grid, tgrid)[1]


def measurement_gradient(
    kernel: KernelField,
    phi: PhaseField,
    mu: TestFunction,
    grid: SpaceGrid,
    tgrid: TimeGrid,
    forward_traj: PhaseTrajectory | None = None,
) -> np.ndarray:
    """Sensitivity of a single reading: adjoint solve with final condition -mu.

    The forward trajectory is independent of mu and may be passed in when
    several sensitivities share one state.
    """
    if forward_traj is None:
        forward_traj = forward_solve(grid, tgrid, kernel, phi)
    psi = PhaseField.isotropic(-mu.samples)
    g_traj = adjoint_solve(grid, tgrid, kernel, psi)
    return _pair_cells(forward_traj, g_traj, kernel, grid, tgrid)


def measurement_gradient_bound(
    kernel: KernelField,
    phi: PhaseField,
    mu: TestFunction,
    grid: SpaceGrid,
    t_final: float,
) -> float:
    """A-priori bound sqrt(2R) * 2*C_phi*C_mu*exp(2*C_K*|V|*T)*T on the sensitivity."""
    c_phi = phi.max_abs
    c_mu = mu.l1_norm(grid)
    c_k = kernel.max_rate
    return (
        np.sqrt(2.0 * kernel.n_cells)
        * 2.0
        * c_phi
        * c_mu
        * np.exp(2.0 * c_k * V_SIZE * t_final)
        * t_final
    )


def gauss_newton_hessian(
    kernel: KernelField,
    phi: PhaseField,
    measurements: MeasurementSet,
    grid: SpaceGrid,
    tgrid: TimeGrid,
) -> np.ndarray:
    """(1/L) sum_l grad(M_l) (x) grad(M_l); always positive semidefinite."""
    traj = forward_solve(grid, tgrid, kernel, phi)
    dim = 2 * kernel.n_cells
    h = np.zeros((dim, dim))
    for mu in measurements.functions:
        g = measurement_gradient(kernel, phi, mu, grid, tgrid, forward_traj=traj)
        h += np.outer(g, g)
    return h / len(measurements)


def fd_hessian(
    kernel: KernelField,
    phi: PhaseField,
    measurements: MeasurementSet,
    data: np.ndarray,
    grid: SpaceGrid,
    tgrid: TimeGrid,
    h_rule: float = DEFAULT_H_HESSIAN,
) -> np.ndarray:
    """Hessian of the loss by differencing the adjoint gradient, then symmetrized.

    Columns use central differences with step h_j = h_rule*(1 + |K_j|); where
    K_j - h_j would leave the nonnegative orthant, a forward difference is
    used instead.
    """
    k_vec = kernel.flatten()
    dim = k_vec.size
    cols = np.empty((dim, dim))
    grad_center = None
    for j in range(dim):
        h = h_rule * (1.0 + abs(k_vec[j]))
        k_hi = k_vec.copy()
        k_hi[j] += h
        g_hi = gradient(kernel.with_values(k_hi), phi, measurements, data, grid, tgrid)
        if k_vec[j] - h >= 0.0:
            k_lo = k_vec.copy()
            k_lo[j] -= h
            g_lo = gradient(
                kernel.with_values(k_lo), phi, measurements, data, grid, tgrid
            )
            cols[:, j] = (g_hi - g_lo) / (2.0 * h)
        else:
            if grad_center is None:
                grad_center = gradient(kernel, phi, measurements, data, grid, tgrid)
            cols[:, j] = (g_hi - grad_center) / h
    return 0.5 * (cols + cols.T)


def fd_gradient(
    kernel: KernelField,
    phi: PhaseField,
    measurements: MeasurementSet,
    data: np.ndarray,
    grid: SpaceGrid,
    tgrid: TimeGrid,
    h_rule: float = DEFAULT_H_GRADCHECK,
) -> np.ndarray:
    """Central finite differences of the loss; the independent gradient oracle."""
    k_vec = kernel.flatten()
    out = np.empty(k_vec.size)
    for j in range(k_vec.size):
        h = h_rule * (1.0 + abs(k_vec[j]))
        k_hi = k_vec.copy()
        k_hi[j] += h
        k_lo = k_vec.copy()
        k_lo[j] -= h
        v_hi = loss(kernel.with_values(k_hi), phi, measurements, data, grid, tgrid).value
        v_lo = loss(kernel.with_values(k_lo), phi, measurements, data, grid, tgrid).value
        out[j] = (v_hi - v_lo) / (2.0 * h)
    return out


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues in ascending order with orthonormal eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


SYMMETRY_RTOL = 1e-10
JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_RTOL = 1e-12


def eigen_sym(a: np.ndarray) -> EigenResult:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps rotate every off-diagonal pair until the off-diagonal Frobenius
    mass falls below JACOBI_OFF_RTOL times the matrix Frobenius norm.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = float(np.abs(a).max())
    if scale > 0 and float(np.abs(a - a.T).max()) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    m = 0.5 * (a + a.T)
    n = m.shape[0]
    v = np.eye(n)
    fro = float(np.linalg.norm(m))
    if fro == 0.0:
        return EigenResult(eigenvalues=np.zeros(n), eigenvectors=v)
    tol = JACOBI_OFF_RTOL * fro
    for _ in range(JACOBI_MAX_SWEEPS):
        strict = m.copy()
        np.fill_diagonal(strict, 0.0)
        off = float(np.linalg.norm(strict))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if abs(apq) <= tol / n:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                mp = m[:, p].copy()
                mq = m[:, q].copy()
                m[:, p] = c * mp - s * mq
                m[:, q] = s * mp + c * mq
                mp = m[p, :].copy()
                mq = m[q, :].copy()
                m[p, :] = c * mp - s * mq
                m[q, :] = s * mp + c * mq
                m[p, q] = 0.0
                m[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NumericalError(
            f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )
    eigenvalues = np.diag(m).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return EigenResult(eigenvalues=eigenvalues[order], eigenvectors=v[:, order])


def numerical_rank(eigenvalues: np.ndarray, rtol: float = 1e-8) -> int:
    """Count of eigenvalues above rtol times the largest one."""
    lam_max = float(np.max(np.abs(eigenvalues)))
    if lam_max == 0.0:
        return 0
    return int(np.sum(np.asarray(eigenvalues) > rtol * lam_max))
