"""Reconstruction of piecewise-constant tumbling kernels in the 1D
two-velocity kinetic chemotaxis model from velocity-averaged interior
measurements, with adjoint-state gradients and spectral diagnostics."""

from ._backend import BACKEND
from .kernel import KernelField
from .mesh import SpaceGrid, TimeGrid, build_time_grid, support_margin_check
from .observe import (
    MeasurementSet,
    TestFunction,
    make_indicator,
    make_mollified,
    measure,
    synthesize_data,
)
from .solver import (
    PhaseField,
    PhaseTrajectory,
    adjoint_solve,
    aggregate_final_condition,
    collision,
    forward_solve,
)
from .calculus import (
    eigen_sym,
    fd_hessian,
    gauss_newton_hessian,
    gradient,
    loss,
    measurement_gradient,
)
from .optimize import OptimizerConfig, RunHistory, gd_run, spectral_step
from .design import (
    CellProblem,
    DesignRealization,
    DesignSpec,
    build_design,
    split_cell_problems,
    validate_design,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "KernelField",
    "SpaceGrid",
    "TimeGrid",
    "build_time_grid",
    "support_margin_check",
    "MeasurementSet",
    "TestFunction",
    "make_indicator",
    "make_mollified",
    "measure",
    "synthesize_data",
    "PhaseField",
    "PhaseTrajectory",
    "adjoint_solve",
    "aggregate_final_condition",
    "collision",
    "forward_solve",
    "eigen_sym",
    "fd_hessian",
    "gauss_newton_hessian",
    "gradient",
    "loss",
    "measurement_gradient",
    "OptimizerConfig",
    "RunHistory",
    "gd_run",
    "spectral_step",
    "CellProblem",
    "DesignRealization",
    "DesignSpec",
    "build_design",
    "split_cell_problems",
    "validate_design",
]
