from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose

from core.exceptions import InputError
from design.construction import build_cecm_design
from design.models import TimeSeriesPanel
from simulation.dgp import gen_vecm
from simulation.models import DgpFamily, DgpSpec
from solver.grid import build_grid
from solver.initialization import initial_weights
from solver.models import GridSpec, PenaltyGrid, SpecsSolution, WeightSpec
from solver.proximal import specs_path

from .models import TscvConfig, WindowScheme
from .selection import bic_score, bic_select, tscv_select


def cointegrated_panel(T=100, alpha=-0.5, seed=0):
    """y adjusts towards x1 - x2; x's are random walks."""
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.standard_normal((T, 2)), axis=0)
    y = np.zeros(T)
    for t in range(1, T):
        y[t] = y[t - 1] + alpha * (y[t - 1] - x[t - 1, 0] + x[t - 1, 1]) + rng.standard_normal()
    return TimeSeriesPanel(values=np.column_stack([y, x]))


def fake_solution(gamma, lambda_I, lambda_G=0.0, N=2):
    return SpecsSolution(
        gamma=np.asarray(gamma, dtype=float), N=N, lambda_I=lambda_I, lambda_G=lambda_G,
        objective=0.0, iterations=1, converged=True,
    )


class BicSelectTests(SimpleTestCase):
    def setUp(self):
        self.design = build_cecm_design(cointegrated_panel(), p=0, det='constant')

    def test_single_element_path(self):
        solution = fake_solution(np.zeros(self.design.n_coefficients), 1.0)
        selected = bic_select([solution], self.design)
        assert_allclose(selected.gamma, solution.gamma)
        self.assertEqual(selected.criterion, bic_score(solution, self.design))

    def test_equal_fit_prefers_fewer_coefficients(self):
        # zero columns leave the fit unchanged whatever their coefficient
        design = replace(self.design, V_proj=self.design.V_proj.copy())
        design.V_proj[:, 3:] = 0.0
        base = np.array([0.1, 0.0, 0.0, 0.0, 0.0])
        sparse = fake_solution(base, lambda_I=1.0)
        dense = fake_solution(base + np.array([0, 0, 0, 1.0, 1.0]), lambda_I=2.0)
        self.assertEqual(bic_select([dense, sparse], design).lambda_I, 1.0)

    def test_ties_prefer_larger_penalties(self):
        gamma = np.zeros(self.design.n_coefficients)
        path = [fake_solution(gamma, 1.0, 0.0), fake_solution(gamma, 3.0, 0.0), fake_solution(gamma, 3.0, 5.0)]
        selected = bic_select(path, self.design)
        self.assertEqual((selected.lambda_I, selected.lambda_G), (3.0, 5.0))

    def test_empty_path(self):
        with self.assertRaises(InputError):
            bic_select([], self.design)

    def test_score_matches_recomputation(self):
        weights = initial_weights(self.design, WeightSpec(lambda_ridge=0))
        grid = build_grid(self.design, weights, n_I=20, n_G=3)
        path = specs_path(self.design, weights, grid)
        selected = bic_select(path, self.design)
        residual = self.design.dy_proj - self.design.V_proj @ selected.gamma
        T = self.design.T_eff
        expected = np.log(residual @ residual / T) + np.log(T) * np.count_nonzero(selected.gamma) / T
        self.assertAlmostEqual(selected.criterion, expected, places=12)
        self.assertTrue(selected.has_levels)

    @tag('slow')
    def test_grid_brackets_the_optimum(self):
        interior = 0
        for seed in range(100):
            panel, _ = gen_vecm(DgpSpec(DgpFamily.TABLE2_LOW_WE), seed=seed)
            design = build_cecm_design(panel, p=1, det='constant_and_trend')
            weights = initial_weights(design)
            grid = build_grid(design, weights, n_I=100, n_G=1)
            selected = bic_select(specs_path(design, weights, grid), design)
            interior += 0 < selected.grid_position[1] < len(grid.lambda_I) - 1
        self.assertGreaterEqual(interior, 90)


class TscvConfigTests(SimpleTestCase):
    def test_windows(self):
        expanding = TscvConfig()
        rolling = TscvConfig(scheme=WindowScheme.ROLLING)
        self.assertEqual(expanding.initial_window(168), 112)
        self.assertEqual(expanding.window(120, 168), (0, 120))
        self.assertEqual(rolling.window(120, 168), (8, 120))

    def test_validation(self):
        with self.assertRaises(InputError):
            TscvConfig(initial_fraction=1.5)
        with self.assertRaises(InputError):
            TscvConfig(scheme='k-fold')


class TscvSelectTests(SimpleTestCase):
    def test_single_pair_grid(self):
        panel = cointegrated_panel(T=60)
        grid = PenaltyGrid(lambda_I=[5.0], lambda_G=[0.0])
        result = tscv_select(panel, 0, 'constant', grid_spec=grid)
        self.assertEqual(result.pair, (5.0, 0.0))
        self.assertEqual(result.n_splits, 60 - 40)
        self.assertGreater(result.mspe, 0.0)
        assert_allclose(result.mspe, np.mean(result.errors ** 2))

    def test_grid_positions_map_to_full_sample_grid(self):
        panel = cointegrated_panel(T=80, seed=3)
        spec = GridSpec(n_I=6, n_G=2)
        result = tscv_select(panel, 0, 'constant', grid_spec=spec)
        design = build_cecm_design(panel, 0, 'constant')
        grid = build_grid(design, initial_weights(design), n_I=6, n_G=2)
        i_G, i_I = result.grid_position
        self.assertAlmostEqual(result.lambda_I, grid.lambda_I[i_I])
        self.assertAlmostEqual(result.lambda_G, grid.lambda_G[i_G])
        self.assertEqual(result.scores.shape, (2, 6))

    def test_window_too_small(self):
        rng = np.random.default_rng(0)
        panel = TimeSeriesPanel(values=rng.standard_normal((30, 6)))
        with self.assertRaises(InputError):
            tscv_select(panel, 1, 'constant', grid_spec=GridSpec(n_I=4, n_G=1))

    def test_no_lookahead(self):
        # moving the last observation changes only the last nowcast error
        panel = cointegrated_panel(T=60, seed=5)
        grid = PenaltyGrid(lambda_I=[2.0, 0.5], lambda_G=[0.0])
        first = tscv_select(panel, 0, 'constant', grid_spec=grid)
        values = panel.values.copy()
        values[-1] += 100.0
        second = tscv_select(TimeSeriesPanel(values=values), 0, 'constant', grid_spec=grid)
        assert_allclose(first.errors[:-1], second.errors[:-1])
        self.assertFalse(np.allclose(first.errors[-1], second.errors[-1]))

    def test_parallel_matches_serial(self):
        panel = cointegrated_panel(T=60, seed=6)
        spec = GridSpec(n_I=4, n_G=1)
        serial = tscv_select(panel, 0, 'constant', grid_spec=spec, jobs=1)
        parallel = tscv_select(panel, 0, 'constant', grid_spec=spec, jobs=2)
        assert_allclose(serial.errors, parallel.errors)

    @tag('slow')
    def test_pure_noise_prefers_heavy_shrinkage(self):
        spec = GridSpec(n_I=8, n_G=1, eps_ratio=1e-2)
        top_quartile = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = np.cumsum(rng.standard_normal((60, 2)), axis=0)
            y = np.cumsum(rng.standard_normal(60))
            panel = TimeSeriesPanel(values=np.column_stack([y, x]))
            result = tscv_select(panel, 0, 'constant', grid_spec=spec)
            top_quartile += result.grid_position[1] < 2
        self.assertGreaterEqual(top_quartile, 80)
