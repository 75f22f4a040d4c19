import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tumblekit.mesh import SpaceGrid, TimeGrid, build_time_grid, support_margin_check


def grid_with_dx(dx, x_min=0.0, n_points=101):
    return SpaceGrid(x_min=x_min, x_max=x_min + dx * (n_points - 1), n_points=n_points)


class TestSpaceGrid:
    def test_nodes_hit_endpoints_exactly(self):
        g = SpaceGrid(x_min=-1.7, x_max=3.3, n_points=137)
        assert g.nodes[0] == -1.7
        assert g.nodes[-1] == 3.3
        assert np.allclose(np.diff(g.nodes), g.dx, rtol=1e-13)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(x_min=0.0, x_max=0.0, n_points=5),
            dict(x_min=1.0, x_max=0.0, n_points=5),
            dict(x_min=0.0, x_max=1.0, n_points=2),
            dict(x_min=float("nan"), x_max=1.0, n_points=5),
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            SpaceGrid(**kwargs)

    def test_node_index(self):
        g = SpaceGrid(x_min=0.0, x_max=1.0, n_points=11)
        assert g.node_index(0.3) == 3
        with pytest.raises(ValueError):
            g.node_index(0.35)


class TestBuildTimeGrid:
    def test_transport_limited_example(self):
        # dx = 0.01, C_K = 1: limit 0.9*0.01 -> 112 steps over T = 1
        tg = build_time_grid(1.0, grid_with_dx(0.01), c_k=1.0, cfl_safety=0.9)
        assert tg.n_steps == 112
        assert tg.dt == pytest.approx(1.0 / 112)
        assert tg.dt <= 0.9 * 0.01 * (1 + 1e-12)

    def test_collision_limited_example(self):
        # dx = 10 so the collision bound 1/C_K = 1 is active; one step
        tg = build_time_grid(1.0, grid_with_dx(10.0, n_points=3), c_k=1.0, cfl_safety=1.0)
        assert tg.n_steps == 1
        assert tg.dt == 1.0

    def test_fine_grid_example(self):
        tg = build_time_grid(0.02, grid_with_dx(0.001), c_k=1.0, cfl_safety=0.9)
        assert tg.n_steps == 23

    @pytest.mark.parametrize(
        "t_final,c_k,cfl", [(-1.0, 1.0, 0.9), (1.0, 0.0, 0.9), (1.0, 1.0, 1.5)]
    )
    def test_rejects_bad_parameters(self, t_final, c_k, cfl):
        with pytest.raises(ValueError):
            build_time_grid(t_final, grid_with_dx(0.01), c_k, cfl)

    @given(
        t_final=st.floats(1e-3, 10.0),
        dx=st.floats(1e-4, 1.0),
        c_k=st.floats(1e-2, 50.0),
        cfl=st.floats(0.1, 1.0),
    )
    @settings(max_examples=200)
    def test_invariants(self, t_final, dx, c_k, cfl):
        tg = build_time_grid(t_final, grid_with_dx(dx), c_k, cfl)
        # n_steps * dt recovers t_final to a few ulp
        assert tg.n_steps * tg.dt == pytest.approx(t_final, rel=4 * np.finfo(float).eps)
        # the stability bound holds (1 ulp cushion for the division round-off)
        assert tg.dt <= cfl * min(dx, 1.0 / c_k) * (1 + 4e-16)

    def test_halving_cfl_about_doubles_steps_when_transport_limited(self):
        # ceil(2q) can undershoot 2*ceil(q) by one, never more
        g = grid_with_dx(0.01)
        for cfl in (0.9, 0.5, 0.25):
            a = build_time_grid(1.0, g, c_k=1.0, cfl_safety=cfl)
            b = build_time_grid(1.0, g, c_k=1.0, cfl_safety=cfl / 2)
            assert b.n_steps >= 2 * a.n_steps - 1


class TestTimeGrid:
    def test_times_cover_final_time(self):
        tg = TimeGrid(t_final=0.7, n_steps=9)
        assert tg.times[-1] == 0.7
        assert len(tg.times) == 10


class TestSupportMargin:
    def test_contained(self):
        g = SpaceGrid(0.0, 1.0, 11)
        assert support_margin_check(g, (0.4, 0.6), 0.2) is True

    def test_reaches_boundary(self):
        g = SpaceGrid(0.0, 1.0, 11)
        assert support_margin_check(g, (0.4, 0.6), 0.5) is False

    def test_wide_window(self):
        g = SpaceGrid(-5.0, 5.0, 11)
        assert support_margin_check(g, (-1.0, 1.0), 3.0) is True

    def test_rejects_support_outside_window(self):
        g = SpaceGrid(0.0, 1.0, 11)
        with pytest.raises(ValueError):
            support_margin_check(g, (-0.1, 0.5), 0.1)
