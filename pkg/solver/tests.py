from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import InputError, RankDeficiencyError
from core.linalg import qr_least_squares
from design.construction import build_cecm_design, project_out
from design.models import CecmDesign, DeterministicSpec, TimeSeriesPanel

from .grid import build_grid, lambda_max_I
from .initialization import compute_weights, initial_weights, resolve_ridge_penalty, ridge_fit
from .models import AdaptiveWeights, GridSpec, PenaltyGrid, SolverConfig, WeightSpec
from .proximal import PenalizedProblem, largest_eigenvalue, soft_threshold, specs_fit, specs_path

TIGHT = SolverConfig(kkt_tolerance=1e-11, tolerance=1e-14, max_iterations=50000)


def white_noise_design(T=100, N=4, p=1, det='constant', seed=0):
    rng = np.random.default_rng(seed)
    panel = TimeSeriesPanel(values=rng.standard_normal((T, N)))
    return build_cecm_design(panel, p=p, det=det)


def random_walk_design(T=100, N=10, p=1, det='constant', seed=0):
    rng = np.random.default_rng(seed)
    panel = TimeSeriesPanel(values=np.cumsum(rng.standard_normal((T, N)), axis=0))
    return build_cecm_design(panel, p=p, det=det)


def raw_design(V, dy, N, p):
    return project_out(CecmDesign(
        dy=np.asarray(dy, dtype=float),
        V=np.asarray(V, dtype=float),
        D=np.zeros((len(dy), 0)),
        p=p,
        N=N,
        det=DeterministicSpec('none'),
    ))


def orthonormal_design(T=60, N=2, p=0, seed=0):
    rng = np.random.default_rng(seed)
    K = N * (p + 2) - 1
    Q, _ = np.linalg.qr(rng.standard_normal((T, K)))
    dy = Q @ rng.normal(scale=3.0, size=K) + 0.1 * rng.standard_normal(T)
    return raw_design(Q, dy, N, p)


def unit_weights(design):
    return AdaptiveWeights(omega=np.ones(design.n_coefficients))


class RidgeFitTests(SimpleTestCase):
    def test_orthonormal_columns(self):
        design = orthonormal_design()
        assert_allclose(ridge_fit(design, 0.0), design.V_proj.T @ design.dy_proj, atol=1e-12)

    def test_heavy_shrinkage(self):
        design = white_noise_design()
        gamma = ridge_fit(design, 1e12)
        bound = np.linalg.norm(design.V_proj.T @ design.dy_proj) / 1e12
        self.assertLessEqual(np.linalg.norm(gamma), bound)

    def test_unpenalized_matches_qr(self):
        design = white_noise_design(T=100, N=10, p=1)
        self.assertEqual(design.n_coefficients, 29)
        expected = qr_least_squares(design.V_proj, design.dy_proj)
        assert_allclose(ridge_fit(design, 0.0), expected, rtol=1e-8, atol=1e-12)

    def test_unpenalized_wide_design_is_rejected(self):
        design = white_noise_design(T=25, N=10, p=1)
        with self.assertRaises(RankDeficiencyError):
            ridge_fit(design, 0.0)

    def test_negative_penalty(self):
        with self.assertRaises(InputError):
            ridge_fit(white_noise_design(), -1.0)

    def test_auto_penalty(self):
        self.assertEqual(resolve_ridge_penalty(white_noise_design(T=200, N=4), 'auto'), 0.0)
        wide = white_noise_design(T=40, N=10, p=1)
        self.assertGreater(resolve_ridge_penalty(wide, 'auto'), 0.0)
        self.assertEqual(resolve_ridge_penalty(wide, 0.5), 0.5)


class ComputeWeightsTests(SimpleTestCase):
    def test_split_exponents(self):
        weights = compute_weights(np.array([0.5, -0.25]), k_delta=2, k_pi=1, N=1)
        assert_allclose(weights.omega, [4.0, 4.0])

    def test_zero_initializer_is_excluded(self):
        weights = compute_weights(np.array([0.5, 0.0, 2.0]), k_delta=2, k_pi=1, N=1)
        self.assertTrue(np.isinf(weights.omega[1]))
        assert_array_equal(weights.excluded, [1])

    def test_exponents_must_be_positive(self):
        with self.assertRaises(InputError):
            compute_weights(np.ones(3), k_delta=0, k_pi=1, N=1)

    def test_settings_defaults(self):
        spec = WeightSpec.from_settings()
        self.assertEqual((spec.k_delta, spec.k_pi), (2.0, 1.0))

    def test_initial_weights_cover_every_coefficient(self):
        design = white_noise_design(T=150, N=5)
        weights = initial_weights(design, WeightSpec(k_delta=2, k_pi=1, lambda_ridge=0))
        self.assertEqual(weights.omega.shape, (design.n_coefficients,))


class LambdaMaxTests(SimpleTestCase):
    def test_single_column(self):
        v = np.zeros(20)
        v[0] = 1.0
        dy = np.zeros(20)
        dy[0] = 3.0
        design = raw_design(v[:, None], dy, N=1, p=0)
        self.assertAlmostEqual(lambda_max_I(design, unit_weights(design)), 6.0)

    def test_zero_solution_at_lambda_max(self):
        for seed in range(30):
            design = random_walk_design(N=3 + seed % 5, seed=seed)
            weights = initial_weights(design, WeightSpec(lambda_ridge=0))
            top = lambda_max_I(design, weights)
            solution = specs_fit(design, weights, top, 0.0)
            assert_array_equal(solution.gamma, 0.0, err_msg=f'seed {seed}')
            self.assertEqual(solution.df, 0)

    def test_first_path_point_is_empty_with_levels_excluded(self):
        for seed in range(20):
            design = random_walk_design(T=200, N=3, seed=seed)
            weights = initial_weights(design).with_excluded(range(design.N))
            grid = build_grid(design, weights, n_I=5, n_G=1)
            first = specs_path(design, weights, grid)[0]
            self.assertEqual(first.df, 0, msg=f'seed {seed}')
            self.assertEqual(first.iterations, 0)

    def test_soft_threshold_tie_is_exact_zero(self):
        v = np.array([0.3, -0.3, 0.7])
        threshold = np.array([0.3 * (1 - 1e-15), 0.3, 0.5])
        shrunk = soft_threshold(v, threshold)
        assert_array_equal(shrunk[:2], 0.0)
        self.assertAlmostEqual(shrunk[2], 0.2)

    def test_doubling_weights_halves_anchor(self):
        design = white_noise_design()
        weights = unit_weights(design)
        self.assertAlmostEqual(
            lambda_max_I(design, weights.scaled(2.0)), lambda_max_I(design, weights) / 2
        )

    def test_all_weights_infinite(self):
        design = white_noise_design()
        weights = AdaptiveWeights(omega=np.full(design.n_coefficients, np.inf))
        with self.assertRaises(InputError):
            lambda_max_I(design, weights)


class BuildGridTests(SimpleTestCase):
    def setUp(self):
        self.design = white_noise_design()
        self.weights = unit_weights(self.design)

    def test_single_group_value_is_zero(self):
        grid = build_grid(self.design, self.weights, n_I=10, n_G=1)
        assert_array_equal(grid.lambda_G, [0.0])

    def test_two_point_individual_grid(self):
        grid = build_grid(self.design, self.weights, n_I=2, n_G=1)
        top = lambda_max_I(self.design, self.weights)
        assert_allclose(grid.lambda_I, [top, 1e-4 * top])

    def test_default_shape(self):
        grid = build_grid(self.design, self.weights)
        self.assertEqual(grid.shape, (10, 100))
        self.assertEqual(grid.lambda_G[0], 0.0)
        self.assertTrue(np.all(np.diff(grid.lambda_I) < 0))

    def test_too_few_points(self):
        with self.assertRaises(InputError):
            build_grid(self.design, self.weights, n_I=1)

    def test_grid_validation(self):
        with self.assertRaises(InputError):
            PenaltyGrid(lambda_I=[1.0, 2.0], lambda_G=[0.0])
        with self.assertRaises(InputError):
            GridSpec(n_I=1)


class SpecsFitTests(SimpleTestCase):
    def test_unpenalized_fit_is_ols(self):
        design = white_noise_design(T=200, N=5, p=1)
        solution = specs_fit(design, unit_weights(design), 0.0, 0.0, config=TIGHT)
        expected = qr_least_squares(design.V_proj, design.dy_proj)
        assert_allclose(solution.gamma, expected, rtol=1e-6, atol=1e-9)
        self.assertTrue(solution.converged)

    def test_tiny_penalty_matches_ols(self):
        design = white_noise_design(T=200, N=4, p=1, seed=5)
        weights = unit_weights(design)
        top = lambda_max_I(design, weights)
        solution = specs_fit(design, weights, 1e-10 * top, 0.0, config=TIGHT)
        expected = qr_least_squares(design.V_proj, design.dy_proj)
        assert_allclose(solution.gamma, expected, rtol=1e-6, atol=1e-8)

    def test_tiny_penalty_with_adaptive_weights_is_stationary(self):
        # weights reach the thousands here, so the penalized fit is biased away from OLS
        design = white_noise_design(T=200, N=4, p=1, seed=5)
        weights = initial_weights(design, WeightSpec(lambda_ridge=0))
        top = lambda_max_I(design, weights)
        problem = PenalizedProblem(design, weights, TIGHT)
        solution = problem.fit(1e-10 * top, 0.0)
        self.assertTrue(solution.converged)
        self.assertLessEqual(problem.kkt_residual(solution.gamma, solution.lambda_I, 0.0), 1e-6 * problem.kkt_scale)

    def test_large_group_penalty_removes_levels(self):
        design = white_noise_design(T=200, N=4, p=1, seed=1)
        weights = unit_weights(design)
        solution = specs_fit(design, weights, 0.0, 1e8, config=TIGHT)
        assert_array_equal(solution.delta, 0.0)
        restricted = specs_fit(design, weights.with_excluded(range(design.N)), 0.0, 0.0, config=TIGHT)
        assert_allclose(solution.pi, restricted.pi, rtol=1e-6, atol=1e-9)
        W = design.V_proj[:, design.differences]
        assert_allclose(solution.pi, qr_least_squares(W, design.dy_proj), rtol=1e-6, atol=1e-9)

    def test_orthonormal_closed_form(self):
        design = orthonormal_design(T=80, N=3, p=1, seed=4)
        rng = np.random.default_rng(4)
        weights = AdaptiveWeights(omega=rng.uniform(0.5, 2.0, design.n_coefficients))
        lambda_I = 1.5
        solution = specs_fit(design, weights, lambda_I, 0.0, config=TIGHT)
        expected = soft_threshold(design.V_proj.T @ design.dy_proj, lambda_I * weights.omega / 2)
        assert_allclose(solution.gamma, expected, atol=1e-9)

    def test_objective_matches_definition(self):
        design = random_walk_design(seed=7)
        weights = initial_weights(design, WeightSpec(lambda_ridge=0))
        top = lambda_max_I(design, weights)
        solution = specs_fit(design, weights, 0.05 * top, 1.0)
        residual = design.dy_proj - design.V_proj @ solution.gamma
        free = weights.free
        expected = (
            residual @ residual
            + solution.lambda_I * np.sum(weights.omega[free] * np.abs(solution.gamma[free]))
            + solution.lambda_G * np.linalg.norm(solution.delta)
        )
        self.assertAlmostEqual(solution.objective / expected, 1.0, delta=1e-8)

    def test_excluded_coordinates_stay_zero(self):
        design = white_noise_design(seed=3)
        weights = unit_weights(design).with_excluded([0, 2, 5])
        solution = specs_fit(design, weights, 0.0, 0.0)
        assert_array_equal(solution.gamma[[0, 2, 5]], 0.0)

    def test_scaling_equivariance(self):
        design = white_noise_design(T=150, N=3, p=1, seed=9)
        weights = unit_weights(design)
        base = specs_fit(design, weights, 5.0, 2.0, config=TIGHT)
        scaled_design = replace(design, dy_proj=3.0 * design.dy_proj)
        scaled = specs_fit(scaled_design, weights, 15.0, 6.0, config=TIGHT)
        assert_allclose(scaled.gamma, 3.0 * base.gamma, rtol=1e-6, atol=1e-9)

    def test_permutation_invariance(self):
        design = white_noise_design(T=150, N=3, p=1, seed=10)
        rng = np.random.default_rng(10)
        weights = AdaptiveWeights(omega=rng.uniform(0.5, 2.0, design.n_coefficients))
        order = np.concatenate([
            rng.permutation(design.N), design.N + rng.permutation(design.M)
        ])
        permuted = replace(design, V_proj=design.V_proj[:, order])
        base = specs_fit(design, weights, 4.0, 3.0, config=TIGHT)
        other = specs_fit(permuted, AdaptiveWeights(omega=weights.omega[order]), 4.0, 3.0, config=TIGHT)
        assert_allclose(other.gamma, base.gamma[order], atol=1e-10)

    def test_non_convergence_is_flagged(self):
        design = random_walk_design(seed=1)
        weights = unit_weights(design)
        with self.assertLogs('solver', 'WARNING'):
            solution = specs_fit(design, weights, 1.0, 0.0, config=SolverConfig(max_iterations=1))
        self.assertFalse(solution.converged)

    def test_weight_length_mismatch(self):
        design = white_noise_design()
        with self.assertRaises(InputError):
            specs_fit(design, AdaptiveWeights(omega=np.ones(3)), 1.0, 0.0)

    def test_non_finite_penalty(self):
        design = white_noise_design()
        with self.assertRaises(InputError):
            specs_fit(design, unit_weights(design), np.inf, 0.0)

    def test_standardized_fit_maps_back(self):
        design = white_noise_design(T=200, N=3, p=1, seed=12)
        config = SolverConfig(standardize=True, kkt_tolerance=1e-11, tolerance=1e-14)
        solution = specs_fit(design, unit_weights(design), 0.0, 0.0, config=config)
        expected = qr_least_squares(design.V_proj, design.dy_proj)
        assert_allclose(solution.gamma, expected, rtol=1e-6, atol=1e-9)

    def test_theta_is_recovered(self):
        design = white_noise_design(det='constant_and_trend')
        solution = specs_fit(design, unit_weights(design), 1.0, 0.0)
        self.assertEqual(solution.theta.shape, (2,))

    def test_power_iteration(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((50, 8))
        gram = X.T @ X
        self.assertAlmostEqual(
            largest_eigenvalue(gram, 500, 1e-12) / np.linalg.eigvalsh(gram).max(), 1.0, places=6
        )


class KktTests(SimpleTestCase):
    def check_path(self, seed, n_I=20, n_G=4):
        design = random_walk_design(T=100, N=10, p=1, seed=seed)
        weights = initial_weights(design, WeightSpec(lambda_ridge=0))
        grid = build_grid(design, weights, n_I=n_I, n_G=n_G)
        problem = PenalizedProblem(design, weights)
        for solution in specs_path(design, weights, grid):
            residual = problem.kkt_residual(solution.gamma, solution.lambda_I, solution.lambda_G)
            self.assertLessEqual(residual, 1e-6 * problem.kkt_scale, msg=solution.grid_position)
            self.assertAlmostEqual(residual, solution.kkt_residual)

    def test_stationarity_on_a_sub_grid(self):
        self.check_path(seed=0, n_I=10, n_G=3)

    @tag('slow')
    def test_stationarity_on_fifty_instances(self):
        for seed in range(50):
            self.check_path(seed)


class SpecsPathTests(SimpleTestCase):
    def test_single_point_grid(self):
        design = white_noise_design()
        weights = unit_weights(design)
        grid = PenaltyGrid(lambda_I=[lambda_max_I(design, weights)], lambda_G=[0.0])
        path = specs_path(design, weights, grid)
        self.assertEqual(len(path), 1)
        assert_array_equal(path[0].gamma, 0.0)

    def test_path_order(self):
        design = white_noise_design()
        weights = unit_weights(design)
        grid = build_grid(design, weights, n_I=5, n_G=3)
        path = specs_path(design, weights, grid)
        self.assertEqual([s.grid_position for s in path[:6]], [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 0)])
        self.assertEqual(path[5].lambda_G, grid.lambda_G[1])

    def test_optimal_value_monotone_in_lambda_I(self):
        design = random_walk_design(seed=4)
        weights = initial_weights(design, WeightSpec(lambda_ridge=0))
        grid = build_grid(design, weights, n_I=15, n_G=2)
        path = specs_path(design, weights, grid, config=TIGHT)
        for lambda_G in grid.lambda_G:
            values = [s.objective for s in path if s.lambda_G == lambda_G]
            self.assertTrue(np.all(np.diff(values) <= 1e-8 * max(values)))

    def test_warm_start_matches_cold_start(self):
        design = random_walk_design(T=100, N=10, p=1, seed=6)
        weights = initial_weights(design, WeightSpec(lambda_ridge=0))
        grid = build_grid(design, weights, n_I=12, n_G=2, eps_ratio=1e-2)
        warm = specs_path(design, weights, grid, config=TIGHT)
        cold = specs_path(design, weights, grid, config=replace(TIGHT, warm_start=False))
        for a, b in zip(warm, cold):
            assert_allclose(a.gamma, b.gamma, atol=1e-6)
