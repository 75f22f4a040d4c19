"""Scenario runners behind the CLI: loss landscapes, eigenvalue maps,
detector-degeneracy studies, convergence runs, and decoupled per-cell
reconstruction.

Sweep points and cell problems are distributed over a process pool when
``workers > 1``; results are always reduced in deterministic task order, so
worker count never changes the output.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .calculus import (
    eigen_sym,
    fd_hessian,
    gauss_newton_hessian,
    loss,
    numerical_rank,
)
from .config import (
    DesignSection,
    ExperimentConfig,
    parse_initial_guess,
    parse_optimizer,
    parse_truth,
    _get,
    _int,
    _num,
)
from .csvio import CsvTable
from .design import DesignRealization, build_design, split_cell_problems
from .errors import ConfigError, DegenerateSpectrumError
from .kernel import KernelField
from .mesh import SpaceGrid, TimeGrid, build_time_grid
from .observe import MeasurementSet, make_mollified, synthesize_data
from .optimize import OptimizerConfig, RunHistory, gd_run, spectral_step
from .solver import PhaseField


@dataclass(frozen=True)
class Scene:
    """One inverse problem: geometry, data-generating truth, and detectors."""

    grid: SpaceGrid
    tgrid: TimeGrid
    c_k: float
    truth: KernelField
    phi: PhaseField
    measurements: MeasurementSet

    @cached_property
    def data(self) -> np.ndarray:
        return synthesize_data(
            self.truth, self.phi, self.measurements, self.grid, self.tgrid
        )

    def kernel(self, vec) -> KernelField:
        return self.truth.with_values(vec)

    def loss_value(self, vec) -> float:
        return loss(
            self.kernel(vec), self.phi, self.measurements, self.data,
            self.grid, self.tgrid,
        ).value

    def hessian_lambda_min(self, vec) -> float:
        h = fd_hessian(
            self.kernel(vec), self.phi, self.measurements, self.data,
            self.grid, self.tgrid,
        )
        return eigen_sym(h).lambda_min


def design_scene(section: DesignSection, truth_vec) -> tuple[Scene, DesignRealization]:
    realization = build_design(
        section.cells,
        section.interval,
        section.c_k,
        shape_c=section.shape_c,
        nodes_per_halfwidth=section.nodes_per_halfwidth,
    )
    truth = KernelField.unflatten(truth_vec, realization.breakpoints)
    tgrid = build_time_grid(
        realization.spec.t_meas, realization.grid, section.c_k
    )
    scene = Scene(
        grid=realization.grid,
        tgrid=tgrid,
        c_k=section.c_k,
        truth=truth,
        phi=realization.phi,
        measurements=realization.measurements,
    )
    return scene, realization


# ---------------------------------------------------------------------------
# process-pool plumbing: the scene is installed once per worker

_WORKER_SCENE: Scene | None = None


def _install_scene(scene):
    global _WORKER_SCENE
    _WORKER_SCENE = scene


def _eval_loss_task(vec):
    return _WORKER_SCENE.loss_value(np.asarray(vec))


def _eval_lambda_min_task(vec):
    return _WORKER_SCENE.hessian_lambda_min(np.asarray(vec))


def _map_over_scene(fn, scene, tasks, workers):
    if workers <= 1:
        _install_scene(scene)
        try:
            return [fn(t) for t in tasks]
        finally:
            _install_scene(None)
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_install_scene, initargs=(scene,)
    ) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def _solve_cell_task(args):
    """Reconstruct one cell problem; used by run_design_recon."""
    problem, truth_pair, k0_pair, opt_cfg, step_reference = args
    tgrid = build_time_grid(
        problem.measurements.t_final, problem.grid, max(truth_pair.max(), 1.0)
    )
    truth_field = problem.kernel(*truth_pair)
    data = synthesize_data(
        truth_field, problem.phi, problem.measurements, problem.grid, tgrid
    )
    k0_field = problem.kernel(*k0_pair)
    ref = truth_field if step_reference == "truth" else k0_field
    eta = spectral_step(
        ref, problem.phi, problem.measurements, data, problem.grid, tgrid
    )
    from .optimize import StepPolicy

    cfg = OptimizerConfig(
        step=StepPolicy(kind="fixed", eta=eta),
        max_iters=opt_cfg.max_iters,
        tol_grad=opt_cfg.tol_grad,
        tol_loss=opt_cfg.tol_loss,
        projection=opt_cfg.projection,
    )
    t0 = time.perf_counter()
    history = gd_run(
        k0_field, cfg, problem.phi, problem.measurements, data, problem.grid, tgrid
    )
    wall = time.perf_counter() - t0
    return history.final_kernel, len(history) - 1, wall


# ---------------------------------------------------------------------------
# scenario runners


def sweep_axis(center: float, span: float, points: int) -> np.ndarray:
    """Symmetric sweep around ``center`` with negative values dropped.

    The center value itself is always on the axis, so the ground truth is an
    exact sweep point.
    """
    vals = center + np.linspace(-span, span, points)
    return vals[vals >= 0.0]


def run_landscape(
    scene: Scene, r_list, span=0.5, points=41, workers=1
) -> CsvTable:
    """Marginal loss surfaces: sweep one cell's rate pair, others at truth."""
    truth_vec = scene.truth.flatten()
    tasks = []
    meta = []
    for r in r_list:
        if not 1 <= r <= scene.truth.n_cells:
            raise ConfigError(f"landscape cell index {r} out of range")
        i1, i2 = 2 * (r - 1), 2 * (r - 1) + 1
        axis1 = sweep_axis(truth_vec[i1], span, points)
        axis2 = sweep_axis(truth_vec[i2], span, points)
        for a in axis1:
            for b in axis2:
                vec = truth_vec.copy()
                vec[i1], vec[i2] = a, b
                tasks.append(vec)
                meta.append((r, a, b))
    values = _map_over_scene(_eval_loss_task, scene, tasks, workers)
    rows = [(r, a, b, v) for (r, a, b), v in zip(meta, values)]
    return CsvTable(header=["r", "k_r_1", "k_r_2", "loss"], rows=rows)


def run_eigmap(scene: Scene, lo=0.0, hi=1.0, points=21, workers=1) -> CsvTable:
    """Minimal Hessian eigenvalue over the (k_1_1, k_2_2) perturbation plane.

    Sweeps the first cell's rate into +1 and the second cell's rate into -1,
    all other entries held at the truth; one extra row flags the truth point.
    """
    if scene.truth.n_cells != 2:
        raise ConfigError("eigmap expects a two-cell kernel")
    truth_vec = scene.truth.flatten()
    axis = np.linspace(lo, hi, points)
    tasks = []
    meta = []
    for a in axis:
        for b in axis:
            vec = truth_vec.copy()
            vec[0], vec[3] = a, b
            tasks.append(vec)
            meta.append((a, b))
    values = _map_over_scene(_eval_lambda_min_task, scene, tasks, workers)
    rows = [(a, b, v, 0) for (a, b), v in zip(meta, values)]
    rows.append(
        (truth_vec[0], truth_vec[3], scene.hessian_lambda_min(truth_vec), 1)
    )
    return CsvTable(header=["k_1_1", "k_2_2", "lambda_min", "is_truth"], rows=rows)


#: detector positions studied in the degeneracy scan, as offsets c_1 + f*T
ILLCOND_POSITION_FACTORS = (-1.0, 0.5, 0.8, 1.0)


def illcond_scene(
    section: DesignSection,
    truth_vec,
    detector_eta: float,
    position_factor: float,
    t_cap: float | None = None,
) -> Scene:
    """Design scene with cell 1's indicators replaced by a mollified pair.

    The second detector sits at the design position c_1 + T; the first at
    c_1 + position_factor*T, so factor 1 duplicates the second detector.
    """
    realization = build_design(
        section.cells,
        section.interval,
        section.c_k,
        shape_c=section.shape_c,
        nodes_per_halfwidth=section.nodes_per_halfwidth,
    )
    spec = realization.spec
    grid = realization.grid
    t_meas = spec.t_meas
    if t_cap is not None and t_meas > t_cap:
        t_meas = np.floor(t_cap / grid.dx) * grid.dx
        from .design import DesignSpec, design_measurements, validate_design
        from .errors import InfeasibleDesignError

        spec = DesignSpec(
            breakpoints=spec.breakpoints,
            d=spec.d,
            d_mu=spec.d_mu,
            t_meas=float(t_meas),
            bump_amplitude=spec.bump_amplitude,
            mu_amplitude=spec.mu_amplitude,
        )
        if validate_design(spec, section.c_k):
            raise InfeasibleDesignError("t_cap breaks the design constraints")
        realization = DesignRealization(
            spec=spec,
            grid=grid,
            phi=realization.phi,
            measurements=design_measurements(spec, grid),
        )
    c1 = float(spec.centers[0])
    x1 = c1 + position_factor * spec.t_meas
    x2 = c1 + spec.t_meas
    functions = list(realization.measurements.functions)
    functions[0] = make_mollified(x1, detector_eta, grid)
    functions[1] = make_mollified(x2, detector_eta, grid)
    measurements = MeasurementSet(functions=tuple(functions), t_final=spec.t_meas)
    truth = KernelField.unflatten(truth_vec, spec.breakpoints)
    tgrid = build_time_grid(spec.t_meas, grid, section.c_k)
    return Scene(
        grid=grid,
        tgrid=tgrid,
        c_k=section.c_k,
        truth=truth,
        phi=realization.phi,
        measurements=measurements,
    )


def run_illcond(
    section: DesignSection,
    truth_vec,
    k0_vec,
    opt_cfg: OptimizerConfig,
    detector_eta: float,
    t_cap: float | None = None,
) -> tuple[CsvTable, dict[int, CsvTable]]:
    """Degeneracy scan: move detector 1 toward detector 2 and reconstruct.

    Per position: spectrum of the Gauss-Newton Hessian at the truth, the
    spectral step (swapped in from the previous position when the spectrum
    degenerates, as at the coinciding position), a descent run, and the final
    error on cell 1. Returns the summary table and one history table per
    position.
    """
    summary_rows = []
    histories = {}
    last_eta = None
    for idx, factor in enumerate(ILLCOND_POSITION_FACTORS):
        scene = illcond_scene(section, truth_vec, detector_eta, factor, t_cap)
        gn = gauss_newton_hessian(
            scene.truth, scene.phi, scene.measurements, scene.grid, scene.tgrid
        )
        eig = eigen_sym(gn)
        rank = numerical_rank(eig.eigenvalues)
        try:
            eta = spectral_step(
                scene.truth, scene.phi, scene.measurements, scene.data,
                scene.grid, scene.tgrid,
            )
        except DegenerateSpectrumError:
            if last_eta is None:
                raise
            eta = last_eta  # the documented learning-rate swap
        last_eta = eta
        from .optimize import StepPolicy

        cfg = OptimizerConfig(
            step=StepPolicy(kind="fixed", eta=eta),
            max_iters=opt_cfg.max_iters,
            tol_grad=opt_cfg.tol_grad,
            tol_loss=opt_cfg.tol_loss,
            projection=opt_cfg.projection,
        )
        history = gd_run(
            scene.kernel(k0_vec), cfg, scene.phi, scene.measurements, scene.data,
            scene.grid, scene.tgrid,
        )
        final = history.final_kernel
        err_k1 = max(abs(final[0] - truth_vec[0]), abs(final[1] - truth_vec[1]))
        c1 = float(scene.truth.breakpoints[0] + scene.truth.breakpoints[1]) / 2.0
        x1 = c1 + factor * scene.measurements.t_final
        summary_rows.append(
            (idx, x1, eig.lambda_min, eig.lambda_max, rank, eta, err_k1)
        )
        histories[idx] = CsvTable(
            header=history.header(scene.truth.n_cells), rows=list(history.rows())
        )
    summary = CsvTable(
        header=[
            "position", "x_1", "lambda_min", "lambda_max", "rank_gn", "eta",
            "final_err_k1",
        ],
        rows=summary_rows,
    )
    return summary, histories


def run_convergence(
    scene: Scene, k0_vec, opt_cfg: OptimizerConfig, step_reference="truth"
) -> tuple[CsvTable, RunHistory]:
    """Descent run emitted as the standard history table."""
    cfg = opt_cfg
    if opt_cfg.step.kind == "spectral" and opt_cfg.step.reference is None:
        ref = scene.truth if step_reference == "truth" else scene.kernel(k0_vec)
        from .optimize import StepPolicy

        cfg = OptimizerConfig(
            step=StepPolicy(kind="spectral", reference=ref),
            max_iters=opt_cfg.max_iters,
            tol_grad=opt_cfg.tol_grad,
            tol_loss=opt_cfg.tol_loss,
            projection=opt_cfg.projection,
        )
    history = gd_run(
        scene.kernel(k0_vec), cfg, scene.phi, scene.measurements, scene.data,
        scene.grid, scene.tgrid,
    )
    table = CsvTable(
        header=history.header(scene.truth.n_cells), rows=list(history.rows())
    )
    return table, history


def hessian_offdiagonal_fraction(hess: np.ndarray) -> float:
    """Frobenius mass outside the per-cell 2x2 diagonal blocks, relative."""
    total = float(np.linalg.norm(hess))
    if total == 0.0:
        return 0.0
    mask = np.zeros(hess.shape, dtype=bool)
    for r in range(hess.shape[0] // 2):
        mask[2 * r : 2 * r + 2, 2 * r : 2 * r + 2] = True
    return float(np.linalg.norm(hess[~mask])) / total


def run_design_recon(
    section: DesignSection,
    truth_vec,
    k0_vec,
    opt_cfg: OptimizerConfig,
    workers: int = 1,
    step_reference: str = "truth",
) -> tuple[CsvTable, dict]:
    """Per-cell parallel reconstruction with the joint run as cross-check."""
    scene, realization = design_scene(section, truth_vec)
    problems = split_cell_problems(realization)
    tasks = [
        (
            problems[r],
            truth_vec[2 * r : 2 * r + 2],
            k0_vec[2 * r : 2 * r + 2],
            opt_cfg,
            step_reference,
        )
        for r in range(section.cells)
    ]

    t0 = time.perf_counter()
    if workers <= 1:
        cell_results = [_solve_cell_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cell_results = list(pool.map(_solve_cell_task, tasks))
    cell_wall = time.perf_counter() - t0

    t0 = time.perf_counter()
    _, joint_history = run_convergence(scene, k0_vec, opt_cfg, step_reference)
    joint_wall = time.perf_counter() - t0
    joint = joint_history.final_kernel

    hess = fd_hessian(
        scene.truth, scene.phi, scene.measurements, scene.data, scene.grid,
        scene.tgrid,
    )
    offdiag = hessian_offdiagonal_fraction(hess)

    rows = []
    for r, (pair, iters, wall) in enumerate(cell_results):
        jr = joint[2 * r : 2 * r + 2]
        rows.append(
            (
                r + 1, pair[0], pair[1], jr[0], jr[1],
                float(np.max(np.abs(pair - jr))), iters, wall, offdiag,
            )
        )
    table = CsvTable(
        header=[
            "r", "k_1", "k_2", "k_1_joint", "k_2_joint", "max_abs_diff",
            "iters", "wall_time_s", "offdiag_fraction",
        ],
        rows=rows,
    )
    timings = {
        "cell_total_wall_s": cell_wall,
        "joint_wall_s": joint_wall,
        "workers": workers,
    }
    return table, timings


# ---------------------------------------------------------------------------
# config-driven entry points used by the CLI


def scene_from_config(cfg: ExperimentConfig) -> tuple[Scene, np.ndarray, OptimizerConfig, str]:
    """Scene plus initial guess and optimizer for design-based scenarios."""
    section = DesignSection.parse(cfg.section("design", required=True))
    truth_vec = parse_truth(cfg.section("truth", required=True), section.cells)
    scene, _ = design_scene(section, truth_vec)
    if truth_vec.max() > section.c_k:
        raise ConfigError("truth rates exceed the design c_k bound")
    opt_cfg, reference = parse_optimizer(cfg.section("optimizer"))
    guess_raw = cfg.section("initial_guess", {"kind": "scale", "factor": 1.2})
    k0_vec = parse_initial_guess(guess_raw, truth_vec)
    return scene, k0_vec, opt_cfg, reference


def problem_from_config(cfg: ExperimentConfig) -> tuple[Scene, np.ndarray, OptimizerConfig, str]:
    """Scene for either flavor of problem definition.

    A ``design`` section builds the decoupling design; otherwise the manual
    sections (grid, time, kernel, initial_data, measurements) apply.
    """
    if cfg.section("design") is not None:
        return scene_from_config(cfg)
    from .config import parse_manual_problem

    grid, tgrid, c_k, truth, phi, measurements = parse_manual_problem(cfg)
    scene = Scene(
        grid=grid, tgrid=tgrid, c_k=c_k, truth=truth, phi=phi,
        measurements=measurements,
    )
    opt_cfg, reference = parse_optimizer(cfg.section("optimizer"))
    k0_vec = parse_initial_guess(
        cfg.section("initial_guess", {"kind": "scale", "factor": 1.2}),
        truth.flatten(),
    )
    return scene, k0_vec, opt_cfg, reference


def free_scene_from_config(cfg: ExperimentConfig) -> Scene:
    """Scene for the manually specified (non-design) eigmap panel."""
    from .config import parse_initial_data, parse_measurements

    raw = cfg.section("free_setup", required=True)
    window = _get(raw, "window", "free_setup", required=True)
    dx = _num(_get(raw, "dx", "free_setup", required=True), "free_setup.dx")
    lo, hi = _num(window[0], "window"), _num(window[1], "window")
    n_points = int(round((hi - lo) / dx)) + 1
    grid = SpaceGrid(x_min=lo, x_max=hi, n_points=n_points)
    t_final = _num(_get(raw, "t_final", "free_setup", required=True), "t_final")
    c_k = _num(_get(raw, "c_k", "free_setup", required=True), "c_k")
    tgrid = build_time_grid(t_final, grid, c_k)
    breakpoints = np.asarray(
        _get(raw, "breakpoints", "free_setup", required=True), dtype=float
    )
    truth_vec = parse_truth(
        cfg.section("truth", required=True), breakpoints.size - 1
    )
    truth = KernelField.unflatten(truth_vec, breakpoints)
    phi = parse_initial_data(_get(raw, "initial_data", "free_setup", required=True), grid)
    measurements = parse_measurements(
        _get(raw, "detectors", "free_setup", required=True), grid, t_final
    )
    return Scene(
        grid=grid, tgrid=tgrid, c_k=c_k, truth=truth, phi=phi,
        measurements=measurements,
    )
