import numpy as np
import pytest

from tumblekit import (
    KernelField,
    MeasurementSet,
    PhaseField,
    SpaceGrid,
    build_time_grid,
    make_indicator,
    synthesize_data,
)


@pytest.fixture(scope="session")
def four_cell_problem():
    """Four-cell kernel on [0, 1], window [-0.5, 1.5], five indicator readings.

    Shared by the calculus and optimizer tests; the truth lies well inside
    the feasible set and all supports are contained.
    """
    grid = SpaceGrid(x_min=-0.75, x_max=1.75, n_points=401)
    c_k = 2.0
    tgrid = build_time_grid(0.4, grid, c_k)
    x = grid.nodes

    def bump(center, sigma):
        out = np.exp(-(((x - center) / sigma) ** 2))
        out[np.abs(x - center) > 6 * sigma] = 0.0
        return out

    phi = PhaseField(f_plus=bump(0.35, 0.10), f_minus=0.8 * bump(0.60, 0.11))
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
    return {
        "grid": grid,
        "tgrid": tgrid,
        "c_k": c_k,
        "phi": phi,
        "measurements": measurements,
        "truth": truth,
        "data": data,
    }
