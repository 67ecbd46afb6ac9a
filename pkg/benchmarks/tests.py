from dataclasses import replace
from unittest import mock

import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import InputError
from core.linalg import qr_least_squares
from design.construction import build_cecm_design
from design.models import TimeSeriesPanel
from solver.grid import lambda_max_I
from solver.initialization import initial_weights
from solver.models import GridSpec, PenaltyGrid
from solver.proximal import specs_fit
from solver.tests import TIGHT, raw_design, unit_weights, white_noise_design

from . import estimators, statistics
from .estimators import (
    adf_decisions, adf_transform, adl_adf_fit, adl_fit, fit_estimator, ols_fit, ols_solution,
)
from .models import EstimatorKind, TuningRule
from .statistics import adf_test, dm_test, schwert_max_lags, wald_coint_stat, wald_critical_value, wald_test


def error_correcting_panel(T=150, alpha=-0.4, seed=0, N=3):
    """y error-corrects towards x_1 - x_2; the x's are independent random walks."""
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.standard_normal((T, N - 1)), axis=0)
    y = np.zeros(T)
    for t in range(1, T):
        y[t] = y[t - 1] + alpha * (y[t - 1] - x[t - 1, 0] + x[t - 1, 1]) + rng.standard_normal()
    return TimeSeriesPanel(values=np.column_stack([y, x]))


def random_walk_panel(T=150, N=3, seed=0):
    rng = np.random.default_rng(seed)
    return TimeSeriesPanel(values=np.cumsum(rng.standard_normal((T, N)), axis=0))


class OlsFitTests(SimpleTestCase):
    def test_full_subset_matches_qr(self):
        design = white_noise_design(T=120, N=4, p=1)
        assert_allclose(ols_fit(design), qr_least_squares(design.V_proj, design.dy_proj))

    def test_empty_subset_is_zero(self):
        design = white_noise_design()
        gamma = ols_fit(design, [])
        assert_array_equal(gamma, 0.0)
        solution = ols_solution(design, [])
        self.assertAlmostEqual(solution.objective, float(design.dy_proj @ design.dy_proj))

    def test_subset_zeros_elsewhere(self):
        design = white_noise_design(T=120, N=4, p=1)
        gamma = ols_fit(design, [0, 5])
        self.assertEqual(set(np.flatnonzero(gamma)), {0, 5})
        expected = qr_least_squares(design.V_proj[:, [0, 5]], design.dy_proj)
        assert_allclose(gamma[[0, 5]], expected)

    def test_too_many_columns(self):
        design = white_noise_design(T=10, N=3, p=1)
        with self.assertRaises(InputError):
            ols_fit(design)

    def test_out_of_range_subset(self):
        design = white_noise_design()
        with self.assertRaises(InputError):
            ols_fit(design, [design.n_coefficients])

    def test_theta_is_recovered(self):
        rng = np.random.default_rng(2)
        values = rng.standard_normal((80, 3))
        values[:, 0] = np.cumsum(2.0 + 0.1 * rng.standard_normal(80))
        design = build_cecm_design(TimeSeriesPanel(values=values), p=0, det='constant')
        solution = ols_solution(design, [])
        self.assertAlmostEqual(solution.theta[0], design.dy.mean())

    def test_tiny_penalty_reproduces_ols(self):
        design = white_noise_design(T=200, N=5, p=1, seed=8)
        weights = unit_weights(design)
        top = lambda_max_I(design, weights)
        solution = specs_fit(design, weights, 1e-10 * top, 0.0, config=TIGHT)
        assert_allclose(solution.gamma, ols_fit(design), rtol=1e-6, atol=1e-8)

    def test_gap_to_post_selection_ols_is_linear_in_lambda(self):
        for seed in range(20):
            design = white_noise_design(T=200, N=3, p=1, seed=seed)
            weights = unit_weights(design)
            top = lambda_max_I(design, weights)
            gaps = []
            for factor in (1e-5, 5e-6):
                solution = specs_fit(design, weights, factor * top, 0.0, config=TIGHT)
                post = ols_fit(design, solution.active)
                gaps.append(np.linalg.norm(solution.gamma - post))
            self.assertLessEqual(gaps[1], 0.5 * gaps[0] * (1 + 1e-3) + 1e-12, msg=f'seed {seed}')


class AdlFitTests(SimpleTestCase):
    def setUp(self):
        self.panel = error_correcting_panel()
        self.design = build_cecm_design(self.panel, p=1, det='constant')
        self.weights = initial_weights(self.design)

    def test_levels_are_excluded(self):
        solution = adl_fit(self.design, self.weights, GridSpec(n_I=20, n_G=5))
        assert_array_equal(solution.delta, 0.0)
        self.assertTrue(np.all(solution.active >= self.design.N))
        self.assertEqual(solution.lambda_G, 0.0)
        self.assertEqual(solution.metadata['estimator'], 'adl')

    def test_fixed_grid_drops_group_values(self):
        grid = PenaltyGrid(lambda_I=[10.0, 1.0, 0.1], lambda_G=[0.0, 5.0])
        solution = adl_fit(self.design, self.weights, grid)
        self.assertEqual(solution.lambda_G, 0.0)
        self.assertIn(solution.lambda_I, (10.0, 1.0, 0.1))

    def test_estimator_entry_point(self):
        design, solution = fit_estimator(
            EstimatorKind.ADL, self.panel, 1, 'constant', grid_spec=GridSpec(n_I=20, n_G=5),
        )
        assert_array_equal(solution.delta, 0.0)
        expected = adl_fit(design, initial_weights(design), GridSpec(n_I=20, n_G=5))
        assert_allclose(solution.gamma, expected.gamma)

    def test_specs1_never_uses_the_group_penalty(self):
        _, solution = fit_estimator(
            EstimatorKind.SPECS1, self.panel, 1, 'constant', grid_spec=GridSpec(n_I=20, n_G=5),
        )
        self.assertEqual(solution.lambda_G, 0.0)
        self.assertEqual(solution.metadata['estimator'], 'specs1')

    def test_specs1_ols_refits_the_selected_support(self):
        grid = GridSpec(n_I=20, n_G=5)
        design, selected = fit_estimator(EstimatorKind.SPECS1, self.panel, 1, 'constant', grid_spec=grid)
        _, refit = fit_estimator(EstimatorKind.SPECS1_OLS, self.panel, 1, 'constant', grid_spec=grid)
        assert_allclose(refit.gamma, ols_fit(design, selected.active))
        assert_array_equal(np.flatnonzero(refit.gamma), selected.active)
        self.assertEqual((refit.lambda_I, refit.lambda_G), (selected.lambda_I, 0.0))
        self.assertEqual(refit.metadata['estimator'], 'specs1-ols')

    def test_frozen_penalties(self):
        _, solution = fit_estimator(
            EstimatorKind.SPECS2, self.panel, 1, 'constant', penalties=(0.5, 2.0),
        )
        self.assertEqual((solution.lambda_I, solution.lambda_G), (0.5, 2.0))

    def test_tscv_tuning(self):
        _, solution = fit_estimator(
            EstimatorKind.SPECS1, self.panel, 0, 'constant', grid_spec=GridSpec(n_I=5, n_G=1),
            tune=TuningRule.TSCV,
        )
        self.assertIsNotNone(solution.criterion)
        self.assertEqual(solution.grid_position[0], 0)

    def test_oracle_needs_truth(self):
        with self.assertRaises(InputError):
            fit_estimator(EstimatorKind.OLS_ORACLE, self.panel, 1, 'constant')

    def test_unknown_estimator(self):
        with self.assertRaises(InputError):
            fit_estimator('lasso', self.panel, 1, 'constant')


class AdlAdfTests(SimpleTestCase):
    def test_random_walks_match_plain_adl(self):
        panel = random_walk_panel(T=200, N=3, seed=4)
        grid = GridSpec(n_I=15, n_G=1)
        with mock.patch.object(estimators, 'adf_decisions', return_value=([True] * 3, [-1.0] * 3)):
            solution = adl_adf_fit(panel, 1, 'constant', grid_spec=grid)
        self.assertTrue(all(solution.metadata['differenced']))
        design = build_cecm_design(panel, 1, 'constant')
        expected = adl_fit(design, initial_weights(design), grid)
        assert_allclose(solution.gamma, expected.gamma, atol=1e-8)

    def test_stationary_series_are_kept_in_levels(self):
        rng = np.random.default_rng(1)
        panel = TimeSeriesPanel(values=rng.standard_normal((200, 3)))
        differenced, statistics_ = adf_decisions(panel)
        self.assertEqual(differenced, [False, False, False])
        self.assertTrue(all(stat < -5 for stat in statistics_))
        transformed = adf_transform(panel, differenced)
        assert_allclose(np.diff(transformed.values, axis=0), panel.values[1:])

    def test_transform_mixes_levels_and_differences(self):
        panel = random_walk_panel(T=50, N=3, seed=2)
        transformed = adf_transform(panel, [True, False, True])
        u = np.diff(transformed.values, axis=0)
        assert_allclose(u[:, 0], np.diff(panel.values[:, 0]))
        assert_allclose(u[:, 1], panel.values[1:, 1])
        self.assertEqual(transformed.T, panel.T)

    def test_degenerate_series_is_differenced(self):
        rng = np.random.default_rng(3)
        values = np.column_stack([np.cumsum(rng.standard_normal(120)), np.full(120, 2.0)])
        with self.assertLogs('benchmarks', level='WARNING'):
            differenced, statistics_ = adf_decisions(TimeSeriesPanel(values=values))
        self.assertEqual(differenced[1], True)
        self.assertIsNone(statistics_[1])

    def test_entry_point_returns_transformed_design(self):
        rng = np.random.default_rng(6)
        values = np.column_stack([rng.standard_normal(150), np.cumsum(rng.standard_normal((150, 2)), axis=0)])
        design, solution = fit_estimator(
            EstimatorKind.ADL_ADF, TimeSeriesPanel(values=values), 1, 'constant', grid_spec=GridSpec(n_I=10, n_G=1),
        )
        self.assertEqual(solution.metadata['estimator'], 'adl-adf')
        self.assertFalse(solution.metadata['differenced'][0])
        assert_allclose(design.dy, values[2:, 0])


class AdfTestTests(SimpleTestCase):
    def test_white_noise_rejects(self):
        series = np.random.default_rng(0).standard_normal(500)
        result = adf_test(series)
        self.assertTrue(result.reject_unit_root)
        self.assertLess(result.statistic, -10)
        self.assertLessEqual(result.lags_used, result.max_lags)

    def test_lag_cap(self):
        self.assertEqual(schwert_max_lags(100), 12)
        self.assertEqual(schwert_max_lags(500), 17)

    def test_affine_invariance(self):
        series = np.cumsum(np.random.default_rng(1).standard_normal(300)) * 0.2
        base = adf_test(series)
        moved = adf_test(3.0 - 2.5 * series)
        self.assertAlmostEqual(base.statistic, moved.statistic, places=8)
        self.assertEqual(base.lags_used, moved.lags_used)

    def test_too_short(self):
        with self.assertRaises(InputError):
            adf_test(np.arange(15.0) ** 2, max_lags=5)

    def test_degenerate(self):
        with self.assertRaises(InputError):
            adf_test(np.ones(100))

    def test_trend_case_uses_its_own_critical_value(self):
        series = np.random.default_rng(2).standard_normal(200)
        self.assertLess(adf_test(series, det='trend').critical_value, adf_test(series).critical_value)

    @tag('slow')
    def test_size_and_power(self):
        size = power = 0
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            size += adf_test(np.cumsum(rng.standard_normal(500))).reject_unit_root
            power += adf_test(rng.standard_normal(500)).reject_unit_root
        self.assertLessEqual(abs(size / 1000 - 0.05), 0.02)
        self.assertGreaterEqual(power / 1000, 0.90)


class WaldStatisticTests(SimpleTestCase):
    def test_orthogonal_response_gives_zero(self):
        rng = np.random.default_rng(0)
        V = rng.standard_normal((100, 3))
        noise = rng.standard_normal(100)
        dy = noise - V @ qr_least_squares(V, noise)
        self.assertAlmostEqual(wald_coint_stat(raw_design(V, dy, N=2, p=0)), 0.0, places=20)

    def test_invariant_to_level_rescaling(self):
        design = build_cecm_design(error_correcting_panel(seed=1), p=1, det='constant')
        scaled = design.V_proj.copy()
        scaled[:, 1] *= -7.0
        other = replace(design, V_proj=scaled)
        self.assertAlmostEqual(wald_coint_stat(design), wald_coint_stat(other), places=8)

    def test_matches_restricted_regression(self):
        # the Wald statistic equals (RSS_r - RSS_u) / sigma^2 in a linear regression
        design = build_cecm_design(error_correcting_panel(seed=2), p=1, det='constant')
        V, dy = design.V_proj, design.dy_proj
        full = dy - V @ qr_least_squares(V, dy)
        W = V[:, design.differences]
        restricted = dy - W @ qr_least_squares(W, dy)
        sigma2 = full @ full / (design.T_eff - design.n_coefficients - design.d)
        expected = (restricted @ restricted - full @ full) / sigma2
        self.assertAlmostEqual(wald_coint_stat(design), expected, places=6)

    def test_subset_without_levels(self):
        design = build_cecm_design(error_correcting_panel(), p=1, det='constant')
        self.assertEqual(wald_coint_stat(design, [4, 5]), 0.0)

    def test_cointegration_is_detected(self):
        design = build_cecm_design(error_correcting_panel(T=300, alpha=-0.5), p=1, det='constant')
        cache.clear()
        result = wald_test(design, n_draws=1000)
        self.assertTrue(result.reject)
        self.assertEqual(result.null_draws, 1000)

    def test_post_selection_subset(self):
        design = build_cecm_design(error_correcting_panel(T=200), p=1, det='constant')
        subset = [0, 1, 2, 3]
        W = design.V_proj[:, subset]
        full = design.dy_proj - W @ qr_least_squares(W, design.dy_proj)
        restricted = design.dy_proj - design.V_proj[:, [3]] @ qr_least_squares(design.V_proj[:, [3]], design.dy_proj)
        sigma2 = full @ full / (design.T_eff - 4 - design.d)
        expected = (restricted @ restricted - full @ full) / sigma2
        self.assertAlmostEqual(wald_coint_stat(design, subset), expected, places=6)

    @tag('slow')
    def test_grows_with_sample_size(self):
        sizes = [100, 200, 400]
        means = []
        for T in sizes:
            values = [
                wald_coint_stat(build_cecm_design(error_correcting_panel(T=T, seed=seed), p=1, det='constant'))
                for seed in range(30)
            ]
            means.append(np.mean(values))
        slope = np.polyfit(sizes, means, 1)[0]
        self.assertGreater(slope, 0)


class WaldCriticalValueTests(SimpleTestCase):
    def setUp(self):
        cache.clear()

    def test_single_level_matches_dickey_fuller_case(self):
        value = wald_critical_value(499, 1, 'constant', n_draws=1999, seed=0)
        self.assertGreaterEqual(value, 7.5)
        self.assertLessEqual(value, 9.5)

    def test_increases_with_levels(self):
        values = [wald_critical_value(150, n, 'constant', n_draws=1000, seed=1) for n in (1, 2, 3)]
        self.assertLess(values[0], values[1])
        self.assertLess(values[1], values[2])

    def test_minimum_draws(self):
        with self.assertRaises(InputError):
            wald_critical_value(100, 1, 'constant', n_draws=999)

    def test_cached(self):
        first = wald_critical_value(80, 1, 'constant', n_draws=1000, seed=3)
        with mock.patch.object(statistics, 'simulate_wald_null') as simulate:
            second = wald_critical_value(80, 1, 'constant', n_draws=1000, seed=3)
        simulate.assert_not_called()
        self.assertEqual(first, second)

    def test_parallel_draws_match_serial(self):
        serial = statistics.simulate_wald_null(60, 2, 'constant', 1000, seed=5, jobs=1)
        parallel = statistics.simulate_wald_null(60, 2, 'constant', 1000, seed=5, jobs=2)
        assert_array_equal(serial, parallel)

    @tag('slow')
    def test_null_rejection_rate(self):
        value = wald_critical_value(150, 2, 'constant', n_draws=2000, seed=0)
        fresh = statistics.simulate_wald_null(150, 2, 'constant', 2000, seed=1)
        self.assertLessEqual(abs(np.mean(fresh > value) - 0.05), 0.015)


class DieboldMarianoTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.a = rng.standard_normal(40)
        self.b = 1.3 * rng.standard_normal(40)

    def test_identical_errors(self):
        self.assertEqual(tuple(dm_test(self.a, self.a)), (0.0, 1.0))

    def test_constant_differential(self):
        statistic, p_value = dm_test(np.full(20, 2.0), np.full(20, 1.0))
        self.assertEqual(statistic, statistics.DM_SENTINEL)
        self.assertEqual(p_value, 0.0)

    def test_antisymmetry(self):
        forward = dm_test(self.a, self.b)
        backward = dm_test(self.b, self.a)
        self.assertAlmostEqual(forward.statistic, -backward.statistic)
        self.assertAlmostEqual(forward.p_value, backward.p_value)

    def test_statistic_formula(self):
        d = self.a ** 2 - self.b ** 2
        expected = d.mean() / np.sqrt(d.var() / d.size)
        self.assertAlmostEqual(dm_test(self.a, self.b).statistic, expected)

    def test_preconditions(self):
        with self.assertRaises(InputError):
            dm_test(self.a[:9], self.b[:9])
        with self.assertRaises(InputError):
            dm_test(self.a, self.b[:-1])
