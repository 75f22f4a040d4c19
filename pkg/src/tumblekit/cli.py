"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 infeasible design.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments
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
from .csvio import CsvTable, format_number
from .design import build_design, validate_design
from .errors import (
    BoundaryContaminationError,
    ConfigError,
    DegenerateSpectrumError,
    DivergenceError,
    InfeasibleDesignError,
    NumericalError,
)
from .solver import forward_solve, trajectory_rows

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4


def _add_common(parser, out_required=True):
    parser.add_argument("--config", required=True, help="experiment YAML file")
    parser.add_argument("--out", required=out_required, help="output CSV path")
    parser.add_argument(
        "--threads", type=int, default=1, help="worker processes for sweeps"
    )
    parser.add_argument(
        "--dump-trajectory",
        metavar="PATH",
        default=None,
        help="also write the forward trajectory (t, x, f_plus, f_minus); large",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tumblekit",
        description=(
            "Reconstruction of piecewise-constant tumbling kernels from "
            "velocity-averaged interior measurements"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("synth", "generate noise-free synthetic readings"),
        ("reconstruct", "gradient-descent reconstruction, history CSV"),
        ("landscape", "marginal loss surfaces around the truth"),
        ("eigmap", "minimal Hessian eigenvalue over a rate plane"),
        ("illcond", "detector-degeneracy scan with reconstructions"),
        ("design-recon", "decoupled per-cell reconstruction"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p_design = sub.add_parser("design", help="design construction utilities")
    design_sub = p_design.add_subparsers(dest="design_command", required=True)
    p_validate = design_sub.add_parser("validate", help="report violated constraints")
    p_validate.add_argument("--config", required=True)
    p_emit = design_sub.add_parser("emit", help="emit the constructed design")
    p_emit.add_argument("--config", required=True)
    p_emit.add_argument("--out", required=False, default=None)
    return parser


def _history_with_dump(scene, args, table):
    table.write(args.out)
    if args.dump_trajectory:
        traj = forward_solve(scene.grid, scene.tgrid, scene.truth, scene.phi)
        dump = CsvTable(
            header=["t", "x", "f_plus", "f_minus"],
            rows=list(trajectory_rows(traj, scene.grid, scene.tgrid)),
        )
        dump.write(args.dump_trajectory)


def _cmd_synth(args):
    cfg = ExperimentConfig.load(args.config)
    scene, _, _, _ = experiments.problem_from_config(cfg)
    table = CsvTable(
        header=["l", "y"], rows=[(i + 1, y) for i, y in enumerate(scene.data)]
    )
    table.write(args.out)
    if args.dump_trajectory:
        traj = forward_solve(scene.grid, scene.tgrid, scene.truth, scene.phi)
        CsvTable(
            header=["t", "x", "f_plus", "f_minus"],
            rows=list(trajectory_rows(traj, scene.grid, scene.tgrid)),
        ).write(args.dump_trajectory)
    return EXIT_OK


def _cmd_reconstruct(args):
    cfg = ExperimentConfig.load(args.config)
    scene, k0_vec, opt_cfg, reference = experiments.problem_from_config(cfg)
    table, history = experiments.run_convergence(scene, k0_vec, opt_cfg, reference)
    table.write(args.out)
    if args.dump_trajectory:
        traj = forward_solve(
            scene.grid, scene.tgrid, scene.kernel(history.final_kernel), scene.phi
        )
        CsvTable(
            header=["t", "x", "f_plus", "f_minus"],
            rows=list(trajectory_rows(traj, scene.grid, scene.tgrid)),
        ).write(args.dump_trajectory)
    return EXIT_OK


def _cmd_landscape(args):
    cfg = ExperimentConfig.load(args.config)
    scene, _, _, _ = experiments.scene_from_config(cfg)
    raw = cfg.section("landscape", {})
    r_list = _get(raw, "cells", "landscape", [2, 9, 13, 15])
    span = _num(_get(raw, "span", "landscape", 0.5), "landscape.span")
    points = _int(_get(raw, "points", "landscape", 41), "landscape.points")
    table = experiments.run_landscape(
        scene, r_list, span=span, points=points, workers=args.threads
    )
    _history_with_dump(scene, args, table)
    return EXIT_OK


def _cmd_eigmap(args):
    cfg = ExperimentConfig.load(args.config)
    panel = cfg.section("panel", "design")
    if panel == "design":
        scene, _, _, _ = experiments.scene_from_config(cfg)
    elif panel == "free":
        scene = experiments.free_scene_from_config(cfg)
    else:
        raise ConfigError(f"panel: expected 'design' or 'free', got {panel!r}")
    raw = cfg.section("sweep", {})
    lo = _num(_get(raw, "lo", "sweep", 0.0), "sweep.lo")
    hi = _num(_get(raw, "hi", "sweep", 1.0), "sweep.hi")
    points = _int(_get(raw, "points", "sweep", 21), "sweep.points")
    table = experiments.run_eigmap(
        scene, lo=lo, hi=hi, points=points, workers=args.threads
    )
    _history_with_dump(scene, args, table)
    return EXIT_OK


def _cmd_illcond(args):
    cfg = ExperimentConfig.load(args.config)
    section = DesignSection.parse(cfg.section("design", required=True))
    truth_vec = parse_truth(cfg.section("truth", required=True), section.cells)
    opt_cfg, _ = parse_optimizer(cfg.section("optimizer"))
    k0_vec = parse_initial_guess(
        cfg.section("initial_guess", {"kind": "scale", "factor": 1.2}), truth_vec
    )
    detector_eta = _num(cfg.section("detector_eta", required=True), "detector_eta")
    t_cap = cfg.section("t_cap")
    if t_cap is not None:
        t_cap = _num(t_cap, "t_cap")
    summary, histories = experiments.run_illcond(
        section, truth_vec, k0_vec, opt_cfg, detector_eta, t_cap
    )
    summary.write(args.out)
    stem = Path(args.out)
    for idx, table in histories.items():
        table.write(stem.with_name(f"{stem.stem}_pos{idx}{stem.suffix}"))
    return EXIT_OK


def _cmd_design_recon(args):
    cfg = ExperimentConfig.load(args.config)
    section = DesignSection.parse(cfg.section("design", required=True))
    truth_vec = parse_truth(cfg.section("truth", required=True), section.cells)
    opt_cfg, reference = parse_optimizer(cfg.section("optimizer"))
    k0_vec = parse_initial_guess(
        cfg.section("initial_guess", {"kind": "scale", "factor": 1.2}), truth_vec
    )
    table, timings = experiments.run_design_recon(
        section, truth_vec, k0_vec, opt_cfg, workers=args.threads,
        step_reference=reference,
    )
    table.write(args.out)
    print(
        f"cells: {timings['cell_total_wall_s']:.3f}s on {timings['workers']} worker(s); "
        f"joint: {timings['joint_wall_s']:.3f}s"
    )
    return EXIT_OK


def _cmd_design(args):
    cfg = ExperimentConfig.load(args.config)
    section = DesignSection.parse(cfg.section("design", required=True))
    realization = build_design(
        section.cells,
        section.interval,
        section.c_k,
        shape_c=section.shape_c,
        nodes_per_halfwidth=section.nodes_per_halfwidth,
    )
    spec = realization.spec
    if args.design_command == "validate":
        violations = validate_design(spec, section.c_k)
        if violations:
            print("violated constraints: " + ", ".join(violations))
            return EXIT_INFEASIBLE
        print("design valid")
        return EXIT_OK
    lines = [
        "breakpoints: " + " ".join(format_number(b) for b in spec.breakpoints),
        f"d: {format_number(spec.d)}",
        f"d_mu: {format_number(spec.d_mu)}",
        f"t_meas: {format_number(spec.t_meas)}",
        f"mu_amplitude: {format_number(spec.mu_amplitude)}",
        "detector_centers: "
        + " ".join(format_number(c) for c in spec.detector_centers),
        f"grid_points: {realization.grid.n_points}",
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "reconstruct": _cmd_reconstruct,
    "landscape": _cmd_landscape,
    "eigmap": _cmd_eigmap,
    "illcond": _cmd_illcond,
    "design-recon": _cmd_design_recon,
    "design": _cmd_design,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleDesignError as exc:
        print(f"infeasible design: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (
        DivergenceError,
        NumericalError,
        BoundaryContaminationError,
        DegenerateSpectrumError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
