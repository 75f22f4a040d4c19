"""Acceptance criteria, one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
Criteria 6-9 drive the shipped experiment configurations end to end.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from tumblekit.calculus import (
    eigen_sym,
    fd_gradient,
    fd_hessian,
    gauss_newton_hessian,
    gradient,
    numerical_rank,
)
from tumblekit.config import DesignSection, ExperimentConfig, parse_truth
from tumblekit.design import build_design, validate_design
from tumblekit.errors import DegenerateSpectrumError
from tumblekit.experiments import (
    design_scene,
    hessian_offdiagonal_fraction,
    problem_from_config,
    run_design_recon,
    run_eigmap,
    run_illcond,
    _solve_cell_task,
)
from tumblekit.kernel import KernelField
from tumblekit.mesh import SpaceGrid, build_time_grid
from tumblekit.observe import (
    MeasurementSet,
    make_indicator,
    make_mollified,
    synthesize_data,
)
from tumblekit.optimize import OptimizerConfig, spectral_at
from tumblekit.solver import (
    PhaseField,
    adjoint_l1_bound,
    adjoint_solve,
    forward_solve,
    forward_sup_bound,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

#: mass of the mollifier profile, frozen from the quadrature oracle
#: (see tests/test_observe.py::test_bump_mass_oracle)
BUMP_MASS = 1.2069003224378743


def report(criterion, passed, detail):
    print(f"\n[criterion {criterion:>2}] {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, f"criterion {criterion}: {detail}"


def truncated_gaussian(x, center, sigma, cut=6.0):
    out = np.exp(-(((x - center) / sigma) ** 2))
    out[np.abs(x - center) > cut * sigma] = 0.0
    return out


def test_criterion_01_forward_solver_order():
    t0 = time.time()
    errs = []
    for n_points in (201, 401, 801):
        grid = SpaceGrid(-2.0, 2.0, n_points)
        tgrid = build_time_grid(0.5, grid, c_k=1e-12)
        kernel = KernelField(breakpoints=[-2.0, 2.0], values=[[0.0, 0.0]])
        x = grid.nodes
        phi = PhaseField(
            f_plus=truncated_gaussian(x, 0.0, 0.2),
            f_minus=truncated_gaussian(x, -0.3, 0.2),
        )
        traj = forward_solve(grid, tgrid, kernel, phi)
        err = max(
            np.abs(traj.final.f_plus - truncated_gaussian(x, 0.5, 0.2)).max(),
            np.abs(traj.final.f_minus - truncated_gaussian(x, -0.8, 0.2)).max(),
        )
        errs.append(err)
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    elapsed = time.time() - t0
    report(
        1,
        all(r >= 3.5 for r in ratios) and elapsed < 5.0,
        f"error ratios per halving {ratios[0]:.2f}, {ratios[1]:.2f} (need >= 3.5); "
        f"{elapsed:.1f}s",
    )


def test_criterion_02_mass_conservation():
    t0 = time.time()
    rng = np.random.default_rng(2)
    grid = SpaceGrid(-2.0, 2.0, 801)
    kernel = KernelField(
        breakpoints=[-1.0, -0.5, 0.0, 0.5, 1.0],
        values=rng.uniform(0.0, 2.0, size=(4, 2)),
    )
    tgrid = build_time_grid(0.5, grid, c_k=2.0)
    x = grid.nodes
    phi = PhaseField(
        f_plus=truncated_gaussian(x, 0.1, 0.2),
        f_minus=0.7 * truncated_gaussian(x, -0.2, 0.18),
    )
    traj = forward_solve(grid, tgrid, kernel, phi)
    mass = traj.total_mass(grid)
    drift = np.abs(mass - mass[0]).max() / mass[0]
    elapsed = time.time() - t0
    report(2, drift <= 1e-12 and elapsed < 1.0, f"relative drift {drift:.2e}; {elapsed:.2f}s")


def test_criterion_03_a_priori_bounds():
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst_f, worst_g = 0.0, 0.0
    for _ in range(20):
        n_cells = int(rng.integers(1, 5))
        nodes_per_cell = int(rng.integers(50, 101))
        dx = 2.0 / (n_cells * nodes_per_cell)
        pad_nodes = int(rng.integers(150, 301))
        half = 1.0 + pad_nodes * dx
        grid = SpaceGrid(-half, half, n_cells * nodes_per_cell + 2 * pad_nodes + 1)
        kernel = KernelField(
            breakpoints=grid.nodes[pad_nodes :: nodes_per_cell][: n_cells + 1].copy(),
            values=rng.uniform(0.0, 2.0, size=(n_cells, 2)),
        )
        t_final = rng.uniform(0.3, 0.8) * pad_nodes * dx
        tgrid = build_time_grid(t_final, grid, c_k=2.0)
        x = grid.nodes
        phi = PhaseField(
            f_plus=rng.uniform(0.2, 1.5)
            * truncated_gaussian(x, rng.uniform(-0.5, 0.5), rng.uniform(0.08, 0.18)),
            f_minus=rng.uniform(0.2, 1.5)
            * truncated_gaussian(x, rng.uniform(-0.5, 0.5), rng.uniform(0.08, 0.18)),
        )
        traj = forward_solve(grid, tgrid, kernel, phi)
        bound = forward_sup_bound(kernel, phi, tgrid.times)
        worst_f = max(worst_f, (np.abs(traj.data).max(axis=(1, 2)) / bound).max())

        psi = PhaseField.isotropic(
            truncated_gaussian(x, rng.uniform(-0.4, 0.4), rng.uniform(0.08, 0.18))
        )
        gtraj = adjoint_solve(grid, tgrid, kernel, psi)
        l1 = np.abs(gtraj.data).sum(axis=2).max(axis=1) * grid.dx
        worst_g = max(
            worst_g, (l1 / adjoint_l1_bound(kernel, psi, grid, tgrid)).max()
        )
    elapsed = time.time() - t0
    report(
        3,
        worst_f <= 1.01 and worst_g <= 1.01 and elapsed < 10.0,
        f"sup-bound ratio {worst_f:.4f}, L1-bound ratio {worst_g:.4f} "
        f"(need <= 1.01); {elapsed:.1f}s",
    )


def _gradient_check_problem(n_points):
    grid = SpaceGrid(-0.75, 1.75, n_points)
    tgrid = build_time_grid(0.4, grid, c_k=2.0)
    x = grid.nodes
    phi = PhaseField(
        f_plus=truncated_gaussian(x, 0.35, 0.10),
        f_minus=0.8 * truncated_gaussian(x, 0.60, 0.11),
    )
    functions = tuple(
        make_indicator(c, hw, a, grid)
        for c, hw, a in [
            (0.20, 0.08, 1.0),
            (0.40, 0.10, 0.8),
            (0.55, 0.06, 1.2),
            (0.70, 0.09, 1.0),
            (0.85, 0.07, 0.9),
        ]
    )
    measurements = MeasurementSet(functions=functions, t_final=0.4)
    rng = np.random.default_rng(42)
    truth = KernelField.unflatten(
        rng.uniform(0.3, 1.5, size=8), [0.0, 0.25, 0.5, 0.75, 1.0]
    )
    data = synthesize_data(truth, phi, measurements, grid, tgrid)
    return grid, tgrid, phi, measurements, truth, data


def test_criterion_04_adjoint_gradient_against_finite_differences():
    t0 = time.time()
    discrepancies = {}
    for n_points in (401, 801):
        grid, tgrid, phi, measurements, truth, data = _gradient_check_problem(n_points)
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(5):
            k = truth.with_values(rng.uniform(0.2, 2.0, size=8))
            g = gradient(k, phi, measurements, data, grid, tgrid)
            g_fd = fd_gradient(k, phi, measurements, data, grid, tgrid)
            worst = max(worst, np.linalg.norm(g - g_fd) / np.linalg.norm(g_fd))
        discrepancies[n_points] = worst
    elapsed = time.time() - t0
    report(
        4,
        discrepancies[401] <= 1e-3 and discrepancies[801] < 1e-3 and elapsed < 60.0,
        f"worst rel l2 discrepancy {discrepancies[401]:.2e} at n=401, "
        f"{discrepancies[801]:.2e} at n=801 (tolerance 1e-3); {elapsed:.1f}s",
    )


def test_criterion_05_design_well_posedness():
    t0 = time.time()
    rng = np.random.default_rng(5)
    results = []
    for n_cells in (2, 5, 10):
        real = build_design(n_cells, (0.0, 1.0), c_k=1.0)
        violations = validate_design(real.spec, 1.0)
        truth = KernelField.unflatten(
            rng.uniform(0.3, 0.9, size=2 * n_cells), real.breakpoints
        )
        tgrid = build_time_grid(real.spec.t_meas, real.grid, 1.0)
        gn = gauss_newton_hessian(
            truth, real.phi, real.measurements, real.grid, tgrid
        )
        lam_min = eigen_sym(gn).lambda_min
        results.append((n_cells, violations, lam_min))
    elapsed = time.time() - t0
    ok = all(not v and lam > 0 for _, v, lam in results) and elapsed < 120.0
    detail = "; ".join(f"R={r}: valid, lambda_min={lam:.2e}" for r, v, lam in results)
    report(5, ok, f"{detail}; {elapsed:.1f}s")


def test_criterion_06_eigenvalue_map_panels():
    t0 = time.time()
    cfg_d = ExperimentConfig.load(CONFIG_DIR / "fig4_eigmap_design.yaml")
    scene_d, _, _, _ = problem_from_config(cfg_d)
    table_d = run_eigmap(scene_d, lo=0.0, hi=1.0, points=21)
    lam_d = np.array(table_d.column("lambda_min"))

    from tumblekit.experiments import free_scene_from_config

    cfg_f = ExperimentConfig.load(CONFIG_DIR / "fig4_eigmap_free.yaml")
    scene_f = free_scene_from_config(cfg_f)
    table_f = run_eigmap(scene_f, lo=0.0, hi=1.0, points=21)
    lam_f = np.array(table_f.column("lambda_min"))
    elapsed = time.time() - t0
    report(
        6,
        bool(np.all(lam_d > 0.0)) and bool(np.any(lam_f < 0.0)) and elapsed < 300.0,
        f"design panel min lambda_min {lam_d.min():.2e} (all positive); "
        f"non-design panel attains {lam_f.min():.2e} at "
        f"{int((lam_f < 0).sum())}/{lam_f.size} points; {elapsed:.1f}s",
    )


def test_criterion_07_design_reconstruction_converges():
    t0 = time.time()
    cfg = ExperimentConfig.load(CONFIG_DIR / "fig3_convergence.yaml")
    scene, k0_vec, opt_cfg, reference = problem_from_config(cfg)
    from tumblekit.experiments import run_convergence

    table, history = run_convergence(scene, k0_vec, opt_cfg, reference)
    final_err = np.abs(history.final_kernel - scene.truth.flatten()).max()
    losses = np.array([lv for lv in history.losses if lv > 0.0])
    tail = np.log(losses[losses.size // 2 :])
    idx = np.arange(tail.size)
    design_matrix = np.vstack([idx, np.ones_like(idx)]).T
    coef, *_ = np.linalg.lstsq(design_matrix, tail, rcond=None)
    pred = design_matrix @ coef
    ss_res = float(np.sum((tail - pred) ** 2))
    ss_tot = float(np.sum((tail - tail.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    slope = float(coef[0])
    elapsed = time.time() - t0
    report(
        7,
        final_err <= 1e-3 and slope < 0.0 and r2 >= 0.9 and elapsed < 300.0,
        f"final componentwise error {final_err:.2e} (<= 1e-3), log-loss tail "
        f"slope {slope:.3f}, R^2 {r2:.3f} (>= 0.9); {elapsed:.1f}s",
    )


def test_criterion_08_detector_degeneracy_scan():
    t0 = time.time()
    cfg = ExperimentConfig.load(CONFIG_DIR / "fig5_illcond.yaml")
    section = DesignSection.parse(cfg.section("design", required=True))
    truth_vec = parse_truth(cfg.section("truth", required=True), section.cells)
    from tumblekit.config import parse_initial_guess, parse_optimizer

    opt_cfg, _ = parse_optimizer(cfg.section("optimizer"))
    k0_vec = parse_initial_guess(cfg.section("initial_guess"), truth_vec)
    summary, _ = run_illcond(
        section,
        truth_vec,
        k0_vec,
        opt_cfg,
        detector_eta=float(cfg.section("detector_eta")),
        t_cap=float(cfg.section("t_cap")),
    )
    lam = summary.column("lambda_min")
    ranks = summary.column("rank_gn")
    errs = summary.column("final_err_k1")
    strictly_decreasing = all(a > b for a, b in zip(lam, lam[1:]))
    rank_dropped = ranks[3] <= 2 * section.cells - 1
    offset_grows = errs[3] > errs[1]
    elapsed = time.time() - t0
    report(
        8,
        strictly_decreasing and rank_dropped and offset_grows and elapsed < 600.0,
        f"lambda_min {['%.2e' % v for v in lam]} strictly decreasing: "
        f"{strictly_decreasing}; rank at coincidence {int(ranks[3])} <= "
        f"{2 * section.cells - 1}; offsets pos1 {errs[1]:.3f} < pos3 {errs[3]:.3f}; "
        f"{elapsed:.1f}s",
    )


def test_criterion_09_decoupled_reconstruction():
    t0 = time.time()
    cfg = ExperimentConfig.load(CONFIG_DIR / "design_recon.yaml")
    section = DesignSection.parse(cfg.section("design", required=True))
    truth_vec = parse_truth(cfg.section("truth", required=True), section.cells)
    from tumblekit.config import parse_initial_guess, parse_optimizer

    opt_cfg, reference = parse_optimizer(cfg.section("optimizer"))
    k0_vec = parse_initial_guess(cfg.section("initial_guess"), truth_vec)
    table, _ = run_design_recon(
        section, truth_vec, k0_vec, opt_cfg, workers=1, step_reference=reference
    )
    offdiag = table.rows[0][8]
    match = max(table.column("max_abs_diff"))
    elapsed = time.time() - t0
    report(
        9,
        offdiag <= 1e-8 and match <= 1e-6 and elapsed < 300.0,
        f"off-diagonal Hessian fraction {offdiag:.2e} (<= 1e-8); per-cell vs "
        f"joint max component difference {match:.2e} (<= 1e-6); {elapsed:.1f}s",
    )


@pytest.mark.skipif(
    (os.cpu_count() or 1) < 4,
    reason=f"parallel speedup needs >= 4 CPUs; this host has {os.cpu_count()}",
)
def test_criterion_09_parallel_speedup():
    cfg = ExperimentConfig.load(CONFIG_DIR / "design_recon.yaml")
    section = DesignSection.parse(cfg.section("design", required=True))
    truth_vec = parse_truth(cfg.section("truth", required=True), section.cells)
    from tumblekit.config import parse_initial_guess, parse_optimizer
    from tumblekit.design import split_cell_problems

    opt_cfg, reference = parse_optimizer(cfg.section("optimizer"))
    k0_vec = parse_initial_guess(cfg.section("initial_guess"), truth_vec)
    _, realization = design_scene(section, truth_vec)
    problems = split_cell_problems(realization)
    tasks = [
        (
            problems[r],
            truth_vec[2 * r : 2 * r + 2],
            k0_vec[2 * r : 2 * r + 2],
            opt_cfg,
            reference,
        )
        for r in range(section.cells)
    ]
    t0 = time.perf_counter()
    serial = [_solve_cell_task(t) for t in tasks]
    t_serial = time.perf_counter() - t0

    from concurrent.futures import ProcessPoolExecutor

    t0 = time.perf_counter()
    with ProcessPoolExecutor(max_workers=4) as pool:
        parallel = list(pool.map(_solve_cell_task, tasks))
    t_parallel = time.perf_counter() - t0
    for (ks, _, _), (kp, _, _) in zip(serial, parallel):
        assert np.array_equal(ks, kp)
    report(
        9,
        t_serial / t_parallel >= 2.0,
        f"parallel speedup {t_serial / t_parallel:.2f}x on 4 workers "
        f"({t_serial:.1f}s -> {t_parallel:.1f}s; need >= 2x)",
    )


def test_criterion_10_mollifier_fidelity():
    t0 = time.time()
    center_exact = True
    masses = []
    for eta in (0.05, 0.1, 0.2):
        n = int(round(1.0 / (eta / 20))) + 1
        grid = SpaceGrid(0.0, 1.0, n)
        mu = make_mollified(0.5, eta, grid)
        center_exact &= mu.samples[grid.node_index(0.5)] == 1.0 / eta
        masses.append(mu.samples.sum() * grid.dx)
    mass_ok = all(abs(m - BUMP_MASS) < 1e-3 for m in masses)
    elapsed = time.time() - t0
    report(
        10,
        center_exact and mass_ok and elapsed < 1.0,
        f"center value exactly 1/eta: {center_exact}; masses "
        f"{['%.5f' % m for m in masses]} within 1e-3 of the profile mass "
        f"{BUMP_MASS:.5f} for every eta; {elapsed:.2f}s",
    )
