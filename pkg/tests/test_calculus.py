import numpy as np
import pytest

from tumblekit.calculus import (
    EigenResult,
    eigen_sym,
    fd_gradient,
    fd_hessian,
    gauss_newton_hessian,
    gradient,
    loss,
    loss_and_gradient,
    measurement_gradient,
    measurement_gradient_bound,
    numerical_rank,
)
from tumblekit.design import build_design
from tumblekit.kernel import KernelField
from tumblekit.mesh import build_time_grid
from tumblekit.observe import MeasurementSet, measure, measure_all
from tumblekit.solver import forward_solve


class TestLoss:
    def test_zero_at_truth(self, four_cell_problem):
        p = four_cell_problem
        ev = loss(p["truth"], p["phi"], p["measurements"], p["data"], p["grid"], p["tgrid"])
        assert ev.value == 0.0
        assert np.all(ev.residuals == 0.0)

    def test_constant_residuals(self, four_cell_problem):
        p = four_cell_problem
        c = 0.37
        ev = loss(
            p["truth"], p["phi"], p["measurements"], p["data"] - c, p["grid"], p["tgrid"]
        )
        assert ev.value == pytest.approx(c * c / 2, rel=1e-12)

    def test_nonnegative(self, four_cell_problem):
        p = four_cell_problem
        rng = np.random.default_rng(0)
        for _ in range(3):
            k = p["truth"].with_values(rng.uniform(0.0, 2.0, 8))
            ev = loss(k, p["phi"], p["measurements"], p["data"], p["grid"], p["tgrid"])
            assert ev.value >= 0.0


class TestGradient:
    def test_exactly_zero_at_truth(self, four_cell_problem):
        p = four_cell_problem
        g = gradient(p["truth"], p["phi"], p["measurements"], p["data"], p["grid"], p["tgrid"])
        assert np.all(g == 0.0)

    def test_matches_finite_differences(self, four_cell_problem):
        p = four_cell_problem
        rng = np.random.default_rng(7)
        for _ in range(3):
            k = p["truth"].with_values(rng.uniform(0.2, 2.0, 8))
            g = gradient(k, p["phi"], p["measurements"], p["data"], p["grid"], p["tgrid"])
            g_fd = fd_gradient(
                k, p["phi"], p["measurements"], p["data"], p["grid"], p["tgrid"]
            )
            rel = np.linalg.norm(g - g_fd) / np.linalg.norm(g_fd)
            assert rel <= 1e-3

    def test_superposition_over_measurements(self, four_cell_problem):
        p = four_cell_problem
        k = p["truth"].with_values(p["truth"].flatten() * 1.3)
        ev, g = loss_and_gradient(
            k, p["phi"], p["measurements"], p["data"], p["grid"], p["tgrid"]
        )
        traj = forward_solve(p["grid"], p["tgrid"], k, p["phi"])
        combo = np.zeros_like(g)
        for res, mu in zip(ev.residuals, p["measurements"].functions):
            combo += res * measurement_gradient(
                k, p["phi"], mu, p["grid"], p["tgrid"], forward_traj=traj
            )
        combo /= len(p["measurements"])
        assert np.allclose(g, combo, rtol=1e-12, atol=1e-300)


class TestMeasurementGradient:
    def test_zero_test_function(self, four_cell_problem):
        p = four_cell_problem
        mu = p["measurements"].functions[0]
        zero_mu = type(mu)(samples=np.zeros_like(mu.samples), descriptor=mu.descriptor)
        g = measurement_gradient(p["truth"], p["phi"], zero_mu, p["grid"], p["tgrid"])
        assert np.all(g == 0.0)

    def test_against_fd_of_reading(self, four_cell_problem):
        p = four_cell_problem
        k = p["truth"]
        mu = p["measurements"].functions[2]
        g = measurement_gradient(k, p["phi"], mu, p["grid"], p["tgrid"])

        def reading(vec):
            traj = forward_solve(p["grid"], p["tgrid"], k.with_values(vec), p["phi"])
            return measure(traj, mu, p["grid"])

        k_vec = k.flatten()
        g_fd = np.empty_like(k_vec)
        for j in range(k_vec.size):
            h = 1e-5 * (1 + abs(k_vec[j]))
            hi, lo = k_vec.copy(), k_vec.copy()
            hi[j] += h
            lo[j] -= h
            g_fd[j] = (reading(hi) - reading(lo)) / (2 * h)
        assert np.linalg.norm(g - g_fd) / np.linalg.norm(g_fd) <= 1e-3

    def test_disjoint_cells_have_complementary_support(self):
        # under the decoupling design each detector only senses its own cell
        real = build_design(2, (0.0, 1.0), c_k=1.0)
        truth = KernelField.unflatten([0.5, 0.8, 0.9, 0.4], real.breakpoints)
        tgrid = build_time_grid(real.spec.t_meas, real.grid, 1.0)
        g_left = measurement_gradient(
            truth, real.phi, real.measurements.functions[0], real.grid, tgrid
        )
        g_right = measurement_gradient(
            truth, real.phi, real.measurements.functions[2], real.grid, tgrid
        )
        scale = max(np.abs(g_left).max(), np.abs(g_right).max())
        assert np.abs(g_left[2:]).max() <= 1e-10 * scale
        assert np.abs(g_right[:2]).max() <= 1e-10 * scale

    def test_a_priori_norm_bound(self, four_cell_problem):
        p = four_cell_problem
        for mu in p["measurements"].functions:
            g = measurement_gradient(p["truth"], p["phi"], mu, p["grid"], p["tgrid"])
            bound = measurement_gradient_bound(
                p["truth"], p["phi"], mu, p["grid"], p["measurements"].t_final
            )
            assert np.linalg.norm(g) <= 1.01 * bound


class TestGaussNewton:
    def test_positive_semidefinite(self, four_cell_problem):
        p = four_cell_problem
        h = gauss_newton_hessian(
            p["truth"], p["phi"], p["measurements"], p["grid"], p["tgrid"]
        )
        eig = eigen_sym(h)
        assert eig.lambda_min >= -1e-10 * np.abs(h).max()

    def test_rank_at_most_number_of_measurements(self, four_cell_problem):
        p = four_cell_problem
        ms = MeasurementSet(functions=p["measurements"].functions[:3], t_final=0.4)
        h = gauss_newton_hessian(p["truth"], p["phi"], ms, p["grid"], p["tgrid"])
        eig = eigen_sym(h)
        assert numerical_rank(eig.eigenvalues) <= 3

    def test_duplicated_detector_drops_rank(self, four_cell_problem):
        p = four_cell_problem
        fns = list(p["measurements"].functions)
        fns.append(fns[0])  # exact duplicate
        fns.append(fns[1])
        fns.append(fns[2])
        fns.append(fns[3])  # L = 9 >= 2R = 8, with one duplicated pair
        ms = MeasurementSet(functions=tuple(fns), t_final=0.4)
        h = gauss_newton_hessian(p["truth"], p["phi"], ms, p["grid"], p["tgrid"])
        eig = eigen_sym(h)
        assert numerical_rank(eig.eigenvalues) <= 7


class TestFdHessian:
    def test_close_to_gauss_newton_at_truth(self, four_cell_problem):
        p = four_cell_problem
        h_fd = fd_hessian(
            p["truth"], p["phi"], p["measurements"], p["data"], p["grid"], p["tgrid"]
        )
        h_gn = gauss_newton_hessian(
            p["truth"], p["phi"], p["measurements"], p["grid"], p["tgrid"]
        )
        rel = np.linalg.norm(h_fd - h_gn) / np.linalg.norm(h_gn)
        assert rel <= 1e-2

    def test_symmetry_defect_before_symmetrization(self, four_cell_problem):
        p = four_cell_problem
        k = p["truth"].with_values(p["truth"].flatten() * 1.2)
        k_vec = k.flatten()
        cols = np.empty((8, 8))
        for j in range(8):
            h = 1e-4 * (1 + abs(k_vec[j]))
            hi, lo = k_vec.copy(), k_vec.copy()
            hi[j] += h
            lo[j] -= h
            g_hi = gradient(
                k.with_values(hi), p["phi"], p["measurements"], p["data"],
                p["grid"], p["tgrid"],
            )
            g_lo = gradient(
                k.with_values(lo), p["phi"], p["measurements"], p["data"],
                p["grid"], p["tgrid"],
            )
            cols[:, j] = (g_hi - g_lo) / (2 * h)
        defect = np.abs(cols - cols.T).max()
        assert defect <= 1e-6 * np.abs(cols).max()

    def test_diagonal_matches_scalar_second_difference(self, four_cell_problem):
        p = four_cell_problem
        k = p["truth"].with_values(p["truth"].flatten() * 1.15)
        h_fd = fd_hessian(
            p["truth"].with_values(k.flatten()), p["phi"], p["measurements"],
            p["data"], p["grid"], p["tgrid"],
        )
        j = 3
        k_vec = k.flatten()
        h = 1e-4 * (1 + abs(k_vec[j]))

        def value(vec):
            return loss(
                k.with_values(vec), p["phi"], p["measurements"], p["data"],
                p["grid"], p["tgrid"],
            ).value

        hi, lo = k_vec.copy(), k_vec.copy()
        hi[j] += h
        lo[j] -= h
        second = (value(hi) - 2 * value(k_vec) + value(lo)) / (h * h)
        assert h_fd[j, j] == pytest.approx(second, rel=1e-3)

    def test_boundary_component_uses_one_sided_difference(self, four_cell_problem):
        p = four_cell_problem
        vec = p["truth"].flatten()
        vec[0] = 0.0  # central step would leave the nonnegative orthant
        h = fd_hessian(
            p["truth"].with_values(vec), p["phi"], p["measurements"], p["data"],
            p["grid"], p["tgrid"],
        )
        assert np.all(np.isfinite(h))


class TestEigenSym:
    def test_identity(self):
        eig = eigen_sym(np.eye(4))
        assert np.allclose(eig.eigenvalues, 1.0)

    def test_diagonal_sorted(self):
        eig = eigen_sym(np.diag([3.0, 1.0, 2.0]))
        assert eig.eigenvalues.tolist() == [1.0, 2.0, 3.0]

    def test_two_by_two(self):
        eig = eigen_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(eig.eigenvalues, [1.0, 3.0])

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(12, 12))
        a = a + a.T
        eig = eigen_sym(a)
        v, lam = eig.eigenvectors, eig.eigenvalues
        assert np.linalg.norm(a - v @ np.diag(lam) @ v.T) <= 1e-8 * np.linalg.norm(a)
        assert np.abs(v.T @ v - np.eye(12)).max() <= 1e-10
        # stated residual bound per eigenpair
        for i in range(12):
            res = np.linalg.norm(a @ v[:, i] - lam[i] * v[:, i])
            assert res <= 1e-8 * np.linalg.norm(a)

    def test_agrees_with_lapack_oracle(self):
        rng = np.random.default_rng(6)
        for n in (2, 5, 9):
            a = rng.normal(size=(n, n))
            a = 0.5 * (a + a.T)
            mine = eigen_sym(a).eigenvalues
            oracle = np.linalg.eigvalsh(a)
            assert np.allclose(mine, oracle, atol=1e-10 * max(1.0, np.abs(a).max()))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eigen_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_zero_matrix(self):
        eig = eigen_sym(np.zeros((3, 3)))
        assert np.all(eig.eigenvalues == 0.0)
