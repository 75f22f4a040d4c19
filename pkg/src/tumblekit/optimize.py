"""Projected gradient descent with the spectral step-size rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .calculus import fd_hessian, eigen_sym, loss_and_gradient
from .errors import DegenerateSpectrumError, DivergenceError
from .kernel import KernelField
from .mesh import SpaceGrid, TimeGrid
from .observe import MeasurementSet
from .solver import PhaseField

#: lambda_min at or below this fraction of lambda_max counts as degenerate
DEFAULT_EPS_SPEC = 1e-8


@dataclass(frozen=True)
class StepPolicy:
    """How the constant step size is chosen.

    spectral: 2*lambda_min/lambda_max**2 from the Hessian at ``reference``
    (the initial guess when no reference is given). fixed/override: use
    ``eta`` directly; override is the documented fallback after a degenerate
    spectrum.
    """

    kind: Literal["spectral", "fixed", "override"]
    eta: float | None = None
    reference: KernelField | None = None

    def __post_init__(self):
        if self.kind in ("fixed", "override"):
            if self.eta is None or not self.eta > 0:
                raise ValueError(f"{self.kind} step policy needs a positive eta")
        elif self.kind != "spectral":
            raise ValueError(f"unknown step policy {self.kind!r}")


def spectral_at(reference: KernelField | None = None) -> StepPolicy:
    return StepPolicy(kind="spectral", reference=reference)


def fixed(eta: float) -> StepPolicy:
    return StepPolicy(kind="fixed", eta=eta)


def override(eta: float) -> StepPolicy:
    return StepPolicy(kind="override", eta=eta)


@dataclass(frozen=True)
class OptimizerConfig:
    step: StepPolicy
    max_iters: int = 2000
    tol_grad: float = 1e-10
    tol_loss: float = 1e-14
    projection: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.tol_grad > 0 and self.tol_loss > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class RunHistory:
    """Per-iteration record of a descent run."""

    iters: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    etas: list[float] = field(default_factory=list)
    kernels: list[np.ndarray] = field(default_factory=list)

    def append(self, it, loss_value, grad_norm, eta, k_vec):
        self.iters.append(int(it))
        self.losses.append(float(loss_value))
        self.grad_norms.append(float(grad_norm))
        self.etas.append(float(eta))
        self.kernels.append(np.asarray(k_vec, dtype=float).copy())

    def __len__(self):
        return len(self.iters)

    @property
    def final_kernel(self) -> np.ndarray:
        return self.kernels[-1]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    def header(self, n_cells: int) -> list[str]:
        cols = ["iter", "loss", "grad_norm", "eta"]
        for r in range(1, n_cells + 1):
            cols += [f"k_{r}_1", f"k_{r}_2"]
        return cols

    def rows(self):
        for it, lv, gn, eta, k in zip(
            self.iters, self.losses, self.grad_norms, self.etas, self.kernels
        ):
            yield (it, lv, gn, eta, *k)


def spectral_step(
    reference: KernelField,
    phi: PhaseField,
    measurements: MeasurementSet,
    data: np.ndarray,
    grid: SpaceGrid,
    tgrid: TimeGrid,
    eps_spec: float = DEFAULT_EPS_SPEC,
) -> float:
    """Constant step 2*lambda_min/lambda_max**2 of the Hessian at ``reference``.

    Raises DegenerateSpectrumError when lambda_min <= eps_spec*lambda_max;
    the caller must then supply an override step.
    """
    hess = fd_hessian(reference, phi, measurements, data, grid, tgrid)
    eig = eigen_sym(hess)
    lam_min, lam_max = eig.lambda_min, eig.lambda_max
    if lam_max <= 0 or lam_min <= eps_spec * lam_max:
        raise DegenerateSpectrumError(lam_min, lam_max)
    return 2.0 * lam_min / lam_max**2


def gd_run(
    k0: KernelField,
    config: OptimizerConfig,
    phi: PhaseField,
    measurements: MeasurementSet,
    data: np.ndarray,
    grid: SpaceGrid,
    tgrid: TimeGrid,
) -> RunHistory:
    """Constant-step gradient descent from k0, optionally projected onto K >= 0.

    Row i of the history describes the i-th iterate before it is updated;
    row 0 is the initial guess. Terminates on max_iters, small gradient, or
    small loss.
    """
    if config.step.kind == "spectral":
        ref = config.step.reference if config.step.reference is not None else k0
        eta = spectral_step(ref, phi, measurements, data, grid, tgrid)
    else:
        eta = config.step.eta
    history = RunHistory()
    k_vec = k0.flatten()
    for it in range(config.max_iters + 1):
        try:
            kernel = k0.with_values(k_vec)
            ev, grad = loss_and_gradient(kernel, phi, measurements, data, grid, tgrid)
        except (DivergenceError, ValueError) as exc:
            raise DivergenceError(
                f"iteration {it} failed: {exc}", last_good=history
            ) from exc
        if not np.isfinite(ev.value) or not np.all(np.isfinite(grad)):
            raise DivergenceError(
                f"non-finite loss or gradient at iteration {it}",
                last_good=history,
            )
        grad_norm = float(np.linalg.norm(grad))
        history.append(it, ev.value, grad_norm, eta, k_vec)
        if grad_norm <= config.tol_grad or ev.value <= config.tol_loss:
            break
        if it == config.max_iters:
            break
        k_vec = k_vec - eta * grad
        if config.projection:
            np.maximum(k_vec, 0.0, out=k_vec)
    return history
