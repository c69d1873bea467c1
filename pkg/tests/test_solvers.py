import numpy as np
import pytest
import scipy.sparse as sp

from vino.grids import Field, Grid1D, Grid2D
from vino.grf import GrfSampler, GrfSpec, darcy_coefficient
from vino.losses import ProblemSpec
from vino.solvers import (functional_at, pcg, solve_antiderivative_1d,
                          solve_darcy_2d, solve_elasticity_2d, solve_poisson_2d)
from vino.tensor import RngStream


class TestPcg:
    def test_solves_spd_system(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((20, 20))
        A = sp.csr_matrix(A @ A.T + 20 * np.eye(20))
        b = rng.standard_normal(20)
        x = pcg(A, b)
        assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)

    def test_zero_rhs(self):
        A = sp.eye(4, format="csr")
        assert np.array_equal(pcg(A, np.zeros(4)), np.zeros(4))

    def test_nonconvergence_reported_with_residual(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((30, 30))
        A = sp.csr_matrix(A @ A.T + 30 * np.eye(30))
        with pytest.raises(RuntimeError, match="residual"):
            pcg(A, rng.standard_normal(30), maxiter=1)


class TestAntiderivative1D:
    def test_zero_source(self):
        s = solve_antiderivative_1d(Field(Grid1D(17), np.zeros(17)))
        assert np.all(s.values == 0.0)

    def test_manufactured_sine(self):
        grid = Grid1D(256)
        x = grid.nodes()
        s = solve_antiderivative_1d(Field(grid, np.pi ** 2 * np.sin(np.pi * x)))
        assert np.abs(s.values - np.sin(np.pi * x)).max() <= 1e-3

    def test_constant_source_nodally_exact(self):
        grid = Grid1D(31)
        x = grid.nodes()
        s = solve_antiderivative_1d(Field(grid, np.ones(31)))
        assert np.abs(s.values - x * (1 - x) / 2).max() < 1e-12

    def test_convergence_order_two(self):
        errors = []
        for n in (17, 33, 65):
            grid = Grid1D(n)
            x = grid.nodes()
            s = solve_antiderivative_1d(Field(grid, np.pi ** 2 * np.sin(np.pi * x)))
            errors.append(np.abs(s.values - np.sin(np.pi * x)).max())
        assert 3.0 < errors[0] / errors[1] < 5.0
        assert 3.0 < errors[1] / errors[2] < 5.0


class TestPoissonDarcy2D:
    def test_manufactured_poisson(self):
        grid = Grid2D(64, 64)
        xx, yy = np.meshgrid(grid.xs(), grid.ys())
        f = 2 * np.pi ** 2 * np.sin(np.pi * xx) * np.sin(np.pi * yy)
        exact = np.sin(np.pi * xx) * np.sin(np.pi * yy)
        s = solve_poisson_2d(Field(grid, f)).values
        rel = np.linalg.norm(s - exact) / np.linalg.norm(exact)
        assert rel <= 2e-3

    def test_poisson_convergence_order_two(self):
        errors = []
        for n in (9, 17, 33):
            grid = Grid2D(n, n)
            xx, yy = np.meshgrid(grid.xs(), grid.ys())
            f = 2 * np.pi ** 2 * np.sin(np.pi * xx) * np.sin(np.pi * yy)
            exact = np.sin(np.pi * xx) * np.sin(np.pi * yy)
            s = solve_poisson_2d(Field(grid, f)).values
            errors.append(np.linalg.norm(s - exact) / np.linalg.norm(exact))
        assert 3.0 < errors[0] / errors[1] < 5.5
        assert 3.0 < errors[1] / errors[2] < 5.5

    def test_darcy_with_unit_coefficient_matches_poisson_bitwise(self):
        grid = Grid2D(17, 17)
        rng = np.random.default_rng(2)
        f = np.full((17, 17), 1.0)
        poisson = solve_poisson_2d(Field(grid, f)).values
        darcy = solve_darcy_2d(Field(grid, np.ones((17, 17))), f=1.0).values
        assert np.array_equal(poisson, darcy)

    def test_darcy_solution_symmetric_for_symmetric_input(self):
        grid = Grid2D(17, 17)
        s = solve_poisson_2d(Field(grid, np.ones((17, 17)))).values
        assert np.abs(s - s.T).max() < 1e-11

    def test_darcy_rejects_nonpositive_coefficient(self):
        grid = Grid2D(9, 9)
        p = np.ones((9, 9))
        p[4, 4] = 0.0
        with pytest.raises(ValueError, match="positive"):
            solve_darcy_2d(Field(grid, p))

    def test_darcy_with_two_phase_field_runs(self):
        grid = Grid2D(17, 17)
        g = GrfSampler(GrfSpec(0.1, 0.0, grid)).sample(RngStream(0, 0))
        p = darcy_coefficient(g)
        s = solve_darcy_2d(p).values
        assert s.shape == (17, 17)
        assert np.all(s[0, :] == 0.0) and np.all(s[:, 0] == 0.0)
        assert s[1:-1, 1:-1].max() > 0.0  # positive source pushes the head up


class TestElasticity2D:
    GRID = Grid2D(13, 7, 0.0, 1.0, 0.0, 0.1)

    def test_zero_traction_zero_displacement(self):
        E = Field(self.GRID, np.full((7, 13), 200.0))
        t = Field(Grid1D(13), np.zeros(13))
        uv = solve_elasticity_2d(E, t)
        assert np.all(uv == 0.0)

    def test_doubling_modulus_halves_displacement(self):
        E1 = Field(self.GRID, np.full((7, 13), 100.0))
        E2 = Field(self.GRID, np.full((7, 13), 200.0))
        t = Field(Grid1D(13), np.full(13, -0.5))
        uv1 = solve_elasticity_2d(E1, t)
        uv2 = solve_elasticity_2d(E2, t)
        assert np.allclose(uv1, 2.0 * uv2, rtol=1e-12, atol=1e-16)

    def test_downward_traction_deflects_top_edge_down(self):
        for n in ((13, 7), (49, 25)):  # coarse and a much finer cross-check
            grid = Grid2D(n[0], n[1], 0.0, 1.0, 0.0, 0.1)
            E = Field(grid, np.full((n[1], n[0]), 150.0))
            t = Field(Grid1D(n[0]), np.full(n[0], -0.3))
            uv = solve_elasticity_2d(E, t)
            assert np.all(uv[1][-1, :] <= 1e-15)
            assert uv[1][-1].min() < 0.0

    def test_clamped_edges_stay_fixed(self):
        E = Field(self.GRID, np.full((7, 13), 80.0))
        t = Field(Grid1D(13), np.full(13, 0.4))
        uv = solve_elasticity_2d(E, t)
        assert np.all(uv[:, :, 0] == 0.0)
        assert np.all(uv[:, :, -1] == 0.0)


class TestFunctionalAt:
    def test_zero_field_zero_source(self):
        grid = Grid2D(9, 9)
        problem = ProblemSpec("poisson2d", grid)
        val = functional_at(np.zeros((9, 9)), problem, {"input": np.zeros((9, 9))})
        assert val == 0.0

    def test_stationary_value_identity(self):
        # at the discrete solution, Pi(u) = -1/2 u^T K u = -(1/2 u^T K u)
        grid = Grid2D(17, 17)
        f = GrfSampler(GrfSpec(0.1, 0.0, grid)).sample(RngStream(1, 0))
        sol = solve_poisson_2d(f)
        problem = ProblemSpec("poisson2d", grid)
        pi = functional_at(sol.values, problem, {"input": f.values})
        internal = functional_at(sol.values, problem, {"input": np.zeros((17, 17))})
        assert abs(pi + internal) < 1e-10 * max(1.0, abs(pi))

    def test_strictly_below_100_perturbations(self):
        grid = Grid2D(13, 13)
        f = GrfSampler(GrfSpec(0.1, 0.0, grid)).sample(RngStream(2, 0))
        sol = solve_poisson_2d(f)
        problem = ProblemSpec("poisson2d", grid)
        pi_star = functional_at(sol.values, problem, {"input": f.values})
        interior = np.zeros((13, 13))
        interior[1:-1, 1:-1] = 1.0
        rng = np.random.default_rng(3)
        scale = 1e-2 * np.abs(sol.values).max()
        for _ in range(100):
            delta = rng.standard_normal((13, 13)) * interior * scale
            assert functional_at(sol.values + delta, problem,
                                 {"input": f.values}) > pi_star
