"""Experiment configuration files (YAML) and their validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .kernel import KernelField
from .mesh import DEFAULT_CFL_SAFETY, SpaceGrid
from .observe import MeasurementSet, make_indicator, make_mollified
from .optimize import OptimizerConfig, StepPolicy
from .solver import PhaseField

SCENARIOS = (
    "synth",
    "reconstruct",
    "convergence",
    "landscape",
    "eigmap",
    "illcond",
    "design_recon",
)


def _get(mapping, key, where, default=None, required=False):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected a mapping")
    if key not in mapping:
        if required:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    return mapping[key]


def _num(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class DesignSection:
    cells: int
    interval: tuple[float, float]
    c_k: float
    shape_c: float
    nodes_per_halfwidth: int

    @classmethod
    def parse(cls, raw, where="design"):
        cells = _int(_get(raw, "cells", where, required=True), f"{where}.cells")
        interval = _get(raw, "interval", where, required=True)
        if not (isinstance(interval, list) and len(interval) == 2):
            raise ConfigError(f"{where}.interval: expected [lo, hi]")
        return cls(
            cells=cells,
            interval=(
                _num(interval[0], f"{where}.interval"),
                _num(interval[1], f"{where}.interval"),
            ),
            c_k=_num(_get(raw, "c_k", where, required=True), f"{where}.c_k"),
            shape_c=_num(_get(raw, "shape_c", where, 8.0), f"{where}.shape_c"),
            nodes_per_halfwidth=_int(
                _get(raw, "nodes_per_halfwidth", where, 4),
                f"{where}.nodes_per_halfwidth",
            ),
        )


def parse_truth(raw, n_cells, where="truth"):
    """Ground-truth rate vector of length 2*n_cells."""
    kind = _get(raw, "kind", where, required=True)
    if kind == "sinusoid":
        base = _num(_get(raw, "base", where, required=True), f"{where}.base")
        amp = _num(_get(raw, "amplitude", where, required=True), f"{where}.amplitude")
        j = np.arange(2 * n_cells)
        vals = base + amp * np.sin(2.0 * np.pi * j / (2 * n_cells))
    elif kind == "constant":
        pair = _get(raw, "values", where, required=True)
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"{where}.values: expected [k1, k2]")
        vals = np.tile([_num(v, where) for v in pair], n_cells)
    elif kind == "explicit":
        rows = _get(raw, "values", where, required=True)
        if not (isinstance(rows, list) and len(rows) == n_cells):
            raise ConfigError(f"{where}.values: expected {n_cells} [k1, k2] rows")
        vals = np.array(
            [[_num(v, where) for v in row] for row in rows], dtype=float
        ).reshape(-1)
    else:
        raise ConfigError(f"{where}.kind: unknown kind {kind!r}")
    if np.any(vals < 0):
        raise ConfigError(f"{where}: ground-truth rates must be nonnegative")
    return vals


def parse_initial_guess(raw, truth_vec, where="initial_guess"):
    kind = _get(raw, "kind", where, required=True)
    if kind == "scale":
        factor = _num(_get(raw, "factor", where, required=True), f"{where}.factor")
        return truth_vec * factor
    if kind == "explicit":
        vals = _get(raw, "values", where, required=True)
        arr = np.asarray(vals, dtype=float).reshape(-1)
        if arr.size != truth_vec.size:
            raise ConfigError(f"{where}.values: expected {truth_vec.size} entries")
        return arr
    raise ConfigError(f"{where}.kind: unknown kind {kind!r}")


def parse_optimizer(raw, where="optimizer"):
    if raw is None:
        raw = {}
    step_raw = _get(raw, "step", where, {"policy": "spectral", "reference": "truth"})
    policy = _get(step_raw, "policy", f"{where}.step", required=True)
    if policy == "spectral":
        reference = _get(step_raw, "reference", f"{where}.step", "truth")
        if reference not in ("truth", "initial"):
            raise ConfigError(
                f"{where}.step.reference: expected 'truth' or 'initial'"
            )
        step = StepPolicy(kind="spectral")
    elif policy in ("fixed", "override"):
        eta = _num(_get(step_raw, "eta", f"{where}.step", required=True), "eta")
        step = StepPolicy(kind=policy, eta=eta)
        reference = None
    else:
        raise ConfigError(f"{where}.step.policy: unknown policy {policy!r}")
    cfg = OptimizerConfig(
        step=step,
        max_iters=_int(_get(raw, "max_iters", where, 2000), f"{where}.max_iters"),
        tol_grad=_num(_get(raw, "tol_grad", where, 1e-10), f"{where}.tol_grad"),
        tol_loss=_num(_get(raw, "tol_loss", where, 1e-14), f"{where}.tol_loss"),
        projection=bool(_get(raw, "projection", where, True)),
    )
    return cfg, (reference or "truth")


def parse_initial_data(raw, grid: SpaceGrid, where="initial_data") -> PhaseField:
    """Initial phase-space data from a list of profile descriptors."""
    specs = raw if isinstance(raw, list) else [raw]
    fp = np.zeros(grid.n_points)
    fm = np.zeros(grid.n_points)
    x = grid.nodes
    for i, s in enumerate(specs):
        w = f"{where}[{i}]"
        kind = _get(s, "kind", w, required=True)
        velocity = _get(s, "velocity", w, "both")
        if velocity not in ("both", "plus", "minus"):
            raise ConfigError(f"{w}.velocity: expected both/plus/minus")
        if kind == "gaussian":
            center = _num(_get(s, "center", w, required=True), f"{w}.center")
            sigma = _num(_get(s, "sigma", w, required=True), f"{w}.sigma")
            amp = _num(_get(s, "amplitude", w, 1.0), f"{w}.amplitude")
            profile = amp * np.exp(-(((x - center) / sigma) ** 2) / 2.0)
            # hard zero outside 6 sigma keeps the support compact; the cut
            # value ~2e-16 is below the solver's support threshold
            profile[np.abs(x - center) > 6.0 * sigma] = 0.0
        elif kind == "plateau":
            lo = _num(_get(s, "lo", w, required=True), f"{w}.lo")
            hi = _num(_get(s, "hi", w, required=True), f"{w}.hi")
            ramp = _num(_get(s, "ramp", w, required=True), f"{w}.ramp")
            level = _num(_get(s, "level", w, 1.0), f"{w}.level")
            profile = np.zeros_like(x)
            profile[(x >= lo) & (x <= hi)] = level
            m_l = (x > lo - ramp) & (x < lo)
            profile[m_l] = level * 0.5 * (1.0 + np.cos(np.pi * (lo - x[m_l]) / ramp))
            m_r = (x > hi) & (x < hi + ramp)
            profile[m_r] = level * 0.5 * (1.0 + np.cos(np.pi * (x[m_r] - hi) / ramp))
        else:
            raise ConfigError(f"{w}.kind: unknown kind {kind!r}")
        if velocity in ("both", "plus"):
            fp += profile
        if velocity in ("both", "minus"):
            fm += profile
    return PhaseField(f_plus=fp, f_minus=fm)


def parse_measurements(raw, grid: SpaceGrid, t_final: float, where="measurements"):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: expected a non-empty list")
    functions = []
    for i, s in enumerate(raw):
        w = f"{where}[{i}]"
        kind = _get(s, "kind", w, required=True)
        center = _num(_get(s, "center", w, required=True), f"{w}.center")
        try:
            if kind == "indicator":
                functions.append(
                    make_indicator(
                        center,
                        _num(_get(s, "half_width", w, required=True), f"{w}.half_width"),
                        _num(_get(s, "amplitude", w, 1.0), f"{w}.amplitude"),
                        grid,
                    )
                )
            elif kind == "mollified":
                functions.append(
                    make_mollified(
                        center, _num(_get(s, "eta", w, required=True), f"{w}.eta"), grid
                    )
                )
            else:
                raise ConfigError(f"{w}.kind: unknown kind {kind!r}")
        except ValueError as exc:
            raise ConfigError(f"{w}: {exc}") from exc
    return MeasurementSet(functions=tuple(functions), t_final=t_final)


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed configuration file; sections beyond the scenario's needs stay None."""

    scenario: str
    raw: dict = field(repr=False)
    path: str = ""

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        scenario = _get(raw, "scenario", str(path), required=True)
        if scenario not in SCENARIOS:
            raise ConfigError(
                f"{path}: unknown scenario {scenario!r}; expected one of {SCENARIOS}"
            )
        return cls(scenario=scenario, raw=raw, path=str(path))

    def section(self, key, default=None, required=False):
        return _get(self.raw, key, self.path or "config", default, required)


def parse_manual_problem(cfg: ExperimentConfig):
    """Grid, time, kernel truth, phi, and measurements for synth/reconstruct."""
    from .mesh import build_time_grid

    raw_grid = cfg.section("grid", required=True)
    grid = SpaceGrid(
        x_min=_num(_get(raw_grid, "x_min", "grid", required=True), "grid.x_min"),
        x_max=_num(_get(raw_grid, "x_max", "grid", required=True), "grid.x_max"),
        n_points=_int(_get(raw_grid, "n_points", "grid", required=True), "grid.n_points"),
    )
    raw_time = cfg.section("time", required=True)
    t_final = _num(_get(raw_time, "t_final", "time", required=True), "time.t_final")
    cfl = _num(_get(raw_time, "cfl_safety", "time", DEFAULT_CFL_SAFETY), "time.cfl")
    c_k = _num(cfg.section("c_k", required=True), "c_k")
    tgrid = build_time_grid(t_final, grid, c_k, cfl)
    raw_kernel = cfg.section("kernel", required=True)
    breakpoints = np.asarray(
        _get(raw_kernel, "breakpoints", "kernel", required=True), dtype=float
    )
    truth_vec = parse_truth(
        _get(raw_kernel, "truth", "kernel", required=True),
        breakpoints.size - 1,
        "kernel.truth",
    )
    truth = KernelField.unflatten(truth_vec, breakpoints)
    if truth.max_rate > c_k:
        raise ConfigError("kernel.truth exceeds the stated c_k bound")
    phi = parse_initial_data(cfg.section("initial_data", required=True), grid)
    measurements = parse_measurements(
        cfg.section("measurements", required=True), grid, t_final
    )
    return grid, tgrid, c_k, truth, phi, measurements
