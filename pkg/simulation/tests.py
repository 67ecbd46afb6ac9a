import time
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, override_settings, tag
from numpy.testing import assert_allclose, assert_array_equal

from benchmarks.estimators import fit_estimator, ols_fit
from benchmarks.statistics import adf_test
from core.exceptions import ExplosiveProcessError, InputError, NumericalError
from design.construction import build_cecm_design
from design.models import ImpliedSingleEq, TimeSeriesPanel
from solver.models import GridSpec, SpecsSolution

from . import experiment
from .dgp import (
    chang_covariance, check_stability, gen_factor, gen_vecm, generate, polar_factor, vecm_params,
)
from .experiment import replicate, resolve_estimators, run_monte_carlo
from .metrics import nowcast_one, pseudo_power, selection_metrics
from .models import WALD_PS, DgpFamily, DgpSpec, MetricsReport

SMALL_GRID = GridSpec(n_I=6, n_G=2, eps_ratio=1e-3)

SPARSE_FAMILIES = [
    DgpFamily.TABLE2_LOW_WE, DgpFamily.TABLE2_LOW_NOWE,
    DgpFamily.TABLE2_HIGH_WE, DgpFamily.TABLE2_HIGH_NOWE,
]


def solution_with(gamma, N, theta=()):
    return SpecsSolution(
        gamma=np.asarray(gamma, dtype=float), N=N, lambda_I=0.0, lambda_G=0.0, objective=0.0,
        iterations=0, converged=True, theta=np.asarray(theta, dtype=float),
    )


class DgpSpecTests(SimpleTestCase):
    def test_defaults(self):
        spec = DgpSpec(DgpFamily.TABLE2_LOW_WE)
        self.assertEqual(spec.a, -0.5)
        self.assertEqual(spec.T, 100)
        self.assertEqual(spec.burn_in, 200)
        self.assertTrue(spec.has_truth)
        self.assertFalse(DgpSpec(DgpFamily.FACTOR_MODEL).has_truth)

    def test_burn_in_override(self):
        self.assertEqual(DgpSpec(DgpFamily.TABLE2_LOW_WE, extra={'burn_in': '400'}).burn_in, 400)

    def test_rejects_invalid(self):
        for kwargs in ({'family': 'table9'}, {'family': 'table2_low_we', 'a': 0.1},
                       {'family': 'table2_low_we', 'a': -0.6}, {'family': 'table2_low_we', 'T': 49},
                       {'family': 'table3_y_i0', 'persistence': 'medium'}):
            with self.subTest(**kwargs), self.assertRaises(InputError):
                DgpSpec(**kwargs)


class ChangCovarianceTests(SimpleTestCase):
    def test_spectrum(self):
        for N in (2, 5, 15, 50):
            eigenvalues = np.linalg.eigvalsh(chang_covariance(N, seed=N))
            self.assertAlmostEqual(eigenvalues.min(), 0.01, places=10)
            self.assertAlmostEqual(eigenvalues.max(), 1.0, places=10)
            if N > 2:
                self.assertTrue(np.all((eigenvalues[1:-1] >= 0.1 - 1e-10) & (eigenvalues[1:-1] <= 1 + 1e-10)))

    def test_symmetric(self):
        Sigma = chang_covariance(10, seed=3)
        assert_allclose(Sigma, Sigma.T, atol=1e-12)

    def test_polar_factor_is_orthogonal(self):
        H = polar_factor(np.random.default_rng(0).uniform(size=(12, 12)))
        assert_allclose(H.T @ H, np.eye(12), atol=1e-10)

    def test_polar_factor_rejects_singular(self):
        with self.assertRaises(NumericalError):
            polar_factor(np.ones((4, 4)))

    def test_seeded(self):
        assert_array_equal(chang_covariance(8, seed=1), chang_covariance(8, seed=1))
        self.assertGreater(np.linalg.norm(chang_covariance(8, seed=1) - chang_covariance(8, seed=2)), 0)

    def test_small_dimension(self):
        with self.assertRaises(InputError):
            chang_covariance(1)


class VecmDesignTests(SimpleTestCase):
    def test_sparse_design_shapes(self):
        expected = {
            DgpFamily.TABLE2_LOW_WE: (10, 1),
            DgpFamily.TABLE2_LOW_NOWE: (10, 2),
            DgpFamily.TABLE2_HIGH_WE: (50, 1),
            DgpFamily.TABLE2_HIGH_NOWE: (50, 3),
        }
        for family, (N, rank) in expected.items():
            with self.subTest(family=family):
                vecm = vecm_params(DgpSpec(family), np.random.default_rng(0))
                self.assertEqual(vecm.N, N)
                self.assertEqual(vecm.rank, rank)
                assert_allclose(vecm.Phi[0], 0.4 * np.eye(N))

    def test_weakly_exogenous_loading(self):
        vecm = vecm_params(DgpSpec(DgpFamily.TABLE2_LOW_WE, a=-0.3), np.random.default_rng(0))
        expected = np.zeros(10)
        expected[0] = -0.3
        assert_allclose(vecm.A[:, 0], expected)
        assert_allclose(vecm.B[:5, 0], [1, -1, -1, -1, -1])
        assert_array_equal(vecm.B[5:, 0], 0.0)

    def test_toeplitz_pi0(self):
        for family in SPARSE_FAMILIES:
            with self.subTest(family=family):
                _, truth = gen_vecm(DgpSpec(family, T=50), seed=0)
                expected = np.zeros(truth.pi0.size)
                expected[0] = 0.8
                assert_allclose(truth.pi0, expected, atol=1e-12)

    def test_no_cointegration_has_zero_delta(self):
        for family in SPARSE_FAMILIES + [DgpFamily.NONSPARSE_VECM]:
            with self.subTest(family=family):
                _, truth = gen_vecm(DgpSpec(family, a=0.0, T=50), seed=1)
                assert_array_equal(truth.delta, 0.0)

    def test_weakly_exogenous_delta(self):
        _, truth = gen_vecm(DgpSpec(DgpFamily.TABLE2_LOW_WE, a=-0.5, T=50), seed=0)
        assert_allclose(truth.delta[:5], -0.5 * np.array([1, -1, -1, -1, -1]), atol=1e-12)
        assert_allclose(truth.delta[5:], 0.0, atol=1e-12)

    def test_high_dimension_parameter_count(self):
        panel, truth = gen_vecm(DgpSpec(DgpFamily.TABLE2_HIGH_WE, T=100), seed=0)
        design = build_cecm_design(panel, 1, 'constant_and_trend')
        self.assertEqual(design.n_parameters, 151)
        self.assertEqual(truth.gamma.size, design.n_coefficients)

    def test_panel_shape_and_determinism(self):
        spec = DgpSpec(DgpFamily.TABLE2_LOW_NOWE, T=80)
        first, _ = gen_vecm(spec, seed=5)
        second, _ = gen_vecm(spec, seed=5)
        self.assertEqual(first.values.shape, (80, 10))
        assert_array_equal(first.values, second.values)

    def test_burn_in_changes_the_sample(self):
        short, _ = gen_vecm(DgpSpec(DgpFamily.TABLE2_LOW_WE, T=60, extra={'burn_in': 0}), seed=2)
        long, _ = gen_vecm(DgpSpec(DgpFamily.TABLE2_LOW_WE, T=60, extra={'burn_in': 400}), seed=2)
        self.assertFalse(np.allclose(short.values, long.values))

    def test_mixed_orders_block_is_stable(self):
        for family in (DgpFamily.TABLE3_Y_I0, DgpFamily.TABLE3_Y_I1):
            for persistence in ('low', 'high'):
                with self.subTest(family=family, persistence=persistence):
                    spec = DgpSpec(family, persistence=persistence, T=60, extra={'b_star': 'block'})
                    panel, truth = gen_vecm(spec, seed=0)
                    self.assertEqual(panel.N, 50)
                    self.assertTrue(np.all(np.isfinite(panel.values)))

    def test_mixed_orders_verbatim_b_star_is_explosive(self):
        spec = DgpSpec(DgpFamily.TABLE3_Y_I1, a=-0.5, T=60)
        with self.assertRaises(ExplosiveProcessError):
            gen_vecm(spec, seed=0)
        gen_vecm(DgpSpec(DgpFamily.TABLE3_Y_I1, a=-0.05, T=60), seed=0)

    def test_unknown_b_star(self):
        with self.assertRaises(InputError):
            vecm_params(DgpSpec(DgpFamily.TABLE3_Y_I0, extra={'b_star': 'diag'}), np.random.default_rng(0))

    def test_stationary_target_row(self):
        vecm = vecm_params(DgpSpec(DgpFamily.TABLE3_Y_I0, a=-0.2), np.random.default_rng(0))
        self.assertEqual(vecm.A[0, 0], 1.0)
        self.assertEqual(vecm.B[0, 0], -1.0)
        high = vecm_params(DgpSpec(DgpFamily.TABLE3_Y_I0, persistence='high'), np.random.default_rng(0))
        self.assertTrue(-0.2 <= high.B[0, 0] <= 0.0)

    def test_nonsparse_redraws_sigma(self):
        spec = DgpSpec(DgpFamily.NONSPARSE_VECM)
        first = vecm_params(spec, np.random.default_rng(0))
        second = vecm_params(spec, np.random.default_rng(1))
        self.assertEqual(first.N, 15)
        self.assertFalse(np.allclose(first.Sigma_eps, second.Sigma_eps))

    def test_random_walk_is_on_the_boundary(self):
        vecm = vecm_params(DgpSpec(DgpFamily.TABLE2_LOW_WE, a=0.0), np.random.default_rng(0))
        self.assertAlmostEqual(check_stability(vecm), 1.0, places=10)


class FactorModelTests(SimpleTestCase):
    def test_shape(self):
        panel = gen_factor(DgpSpec(DgpFamily.FACTOR_MODEL, T=70), seed=0)
        self.assertEqual(panel.values.shape, (70, 50))
        custom = gen_factor(DgpSpec(DgpFamily.FACTOR_MODEL, T=70, extra={'N': 12, 'dynamics': 'true'}), seed=0)
        self.assertEqual(custom.N, 12)

    def test_dynamics_change_the_data(self):
        static = gen_factor(DgpSpec(DgpFamily.FACTOR_MODEL, extra={'N': 8}), seed=4)
        dynamic = gen_factor(DgpSpec(DgpFamily.FACTOR_MODEL, extra={'N': 8, 'dynamics': True}), seed=4)
        self.assertFalse(np.allclose(static.values, dynamic.values))

    def test_wrong_family(self):
        with self.assertRaises(InputError):
            gen_factor(DgpSpec(DgpFamily.TABLE2_LOW_WE), seed=0)

    def test_generate_has_no_truth(self):
        panel, truth = generate(DgpSpec(DgpFamily.FACTOR_MODEL, extra={'N': 6}), seed=0)
        self.assertIsNone(truth)
        self.assertEqual(panel.N, 6)


class SelectionMetricsTests(SimpleTestCase):
    def setUp(self):
        # gamma = (0.5, 0.2 | 0, 0, 0)
        self.truth = ImpliedSingleEq(pi0=np.array([0.0]), delta=np.array([0.5, 0.2]), pi=np.zeros(3))

    def test_partial_selection(self):
        pcs, pics = selection_metrics(solution_with([0.1, 0, 0, 0, 0], 2), self.truth)
        self.assertEqual(pcs, 0.5)
        self.assertEqual(pics, 0.0)

    def test_incorrect_selection(self):
        pcs, pics = selection_metrics(solution_with([0.1, 0.1, 0.3, 0, 0], 2), self.truth)
        self.assertEqual(pcs, 1.0)
        self.assertAlmostEqual(pics, 1 / 3)

    def test_exact_selection(self):
        self.assertEqual(selection_metrics(solution_with([1, 1, 0, 0, 0], 2), self.truth), (1.0, 0.0))

    def test_empty_truth(self):
        truth = ImpliedSingleEq(pi0=np.zeros(1), delta=np.zeros(2), pi=np.zeros(3))
        pcs, pics = selection_metrics(solution_with([0, 0, 1, 0, 0], 2), truth)
        self.assertIsNone(pcs)
        self.assertEqual(pics, 0.2)

    def test_length_mismatch(self):
        with self.assertRaises(InputError):
            selection_metrics(solution_with([0, 0, 0], 2), self.truth)


class PseudoPowerTests(SimpleTestCase):
    def test_rates(self):
        with_levels = solution_with([0.3, 0, 0], 2)
        without = solution_with([0, 0, 0.3], 2)
        self.assertEqual(pseudo_power([without] * 4), 0.0)
        self.assertEqual(pseudo_power([with_levels] * 4), 1.0)
        self.assertEqual(pseudo_power([with_levels, with_levels, without, with_levels]), 0.75)

    def test_empty(self):
        with self.assertRaises(InputError):
            pseudo_power([])


class NowcastTests(SimpleTestCase):
    def noiseless_panel(self, T=40):
        rng = np.random.default_rng(0)
        x = np.cumsum(rng.standard_normal(T))
        y = np.zeros(T)
        for t in range(1, T):
            y[t] = y[t - 1] + 0.5 * (x[t] - x[t - 1]) + 1.0
        return TimeSeriesPanel(values=np.column_stack([y, x]))

    def test_zero_solution_is_a_random_walk_nowcast(self):
        panel = self.noiseless_panel()
        design = build_cecm_design(panel.rows(0, panel.T - 1), 0, 'none')
        level, diff = nowcast_one(design, solution_with(np.zeros(design.n_coefficients), 2), panel)
        self.assertEqual(level, panel.values[-2, 0])
        self.assertEqual(diff, 0.0)

    def test_true_coefficients_are_exact(self):
        panel = self.noiseless_panel()
        design = build_cecm_design(panel.rows(0, panel.T - 1), 0, 'constant')
        solution = solution_with([0.0, 0.0, 0.5], 2, theta=[1.0])
        level, diff = nowcast_one(design, solution, panel)
        self.assertAlmostEqual(level, panel.values[-1, 0], places=10)
        self.assertAlmostEqual(diff, panel.values[-1, 0] - panel.values[-2, 0], places=10)

    def test_requires_the_next_observation(self):
        panel = self.noiseless_panel()
        design = build_cecm_design(panel.rows(0, panel.T - 1), 0, 'constant')
        with self.assertRaises(InputError):
            nowcast_one(design, solution_with(np.zeros(3), 2, theta=[0.0]), panel.rows(0, panel.T - 1))

    def test_adl_adf_nowcast_is_finite(self):
        panel, _ = gen_vecm(DgpSpec(DgpFamily.TABLE2_LOW_WE, T=80), seed=3)
        window = panel.rows(0, panel.T - 1)
        design, solution = fit_estimator('adl-adf', window, 1, 'constant', grid_spec=SMALL_GRID)
        level, diff = nowcast_one(design, solution, panel)
        self.assertTrue(np.isfinite(level) and np.isfinite(diff))


class ResolveEstimatorsTests(SimpleTestCase):
    def test_baseline_is_added(self):
        spec = DgpSpec(DgpFamily.TABLE2_LOW_WE)
        self.assertEqual(resolve_estimators(spec, ['specs2']), ['specs2', 'ols-oracle'])
        factor = DgpSpec(DgpFamily.FACTOR_MODEL)
        self.assertEqual(resolve_estimators(factor, ['specs1']), ['specs1', 'adl'])

    def test_factor_defaults_include_the_refit(self):
        names = resolve_estimators(DgpSpec(DgpFamily.FACTOR_MODEL))
        self.assertEqual(names, ['specs1', 'specs1-ols', 'specs2', 'adl'])

    def test_wald_ps_pulls_in_specs1(self):
        spec = DgpSpec(DgpFamily.TABLE2_HIGH_WE)
        self.assertIn('specs1', resolve_estimators(spec, ['adl', WALD_PS]))

    def test_unknown_and_oracle_without_truth(self):
        with self.assertRaises(InputError):
            resolve_estimators(DgpSpec(DgpFamily.TABLE2_LOW_WE), ['lasso'])
        with self.assertRaises(InputError):
            resolve_estimators(DgpSpec(DgpFamily.FACTOR_MODEL), ['ols-oracle'])


@override_settings(SPECS_BURN_IN=50)
class MonteCarloTests(SimpleTestCase):
    spec = DgpSpec(DgpFamily.TABLE2_LOW_WE, T=60)
    estimators = ['specs1', 'adl', 'ols-oracle']

    def test_single_replication_matches_replicate(self):
        report = run_monte_carlo(self.spec, self.estimators, n_reps=1, base_seed=11, grid_spec=SMALL_GRID)
        outcome = replicate(self.spec, self.estimators, 11, p=1, det='constant_and_trend', grid_spec=SMALL_GRID)
        self.assertIsInstance(report, MetricsReport)
        self.assertEqual(report.seeds, [11])
        oracle = abs(outcome['errors']['ols-oracle'])
        for name in self.estimators:
            self.assertAlmostEqual(report.rmsne[name], abs(outcome['errors'][name]) / oracle)
        self.assertEqual(report.pseudo_power['specs1'], float(outcome['has_levels']['specs1']))
        self.assertEqual(report.pcs['specs1'], outcome['pcs']['specs1'])
        self.assertEqual(report.rmsne['ols-oracle'], 1.0)
        self.assertEqual(report.pics['ols-oracle'], 0.0)

    def test_rates_are_bounded(self):
        report = run_monte_carlo(self.spec, self.estimators, n_reps=3, base_seed=0, grid_spec=SMALL_GRID)
        for metric in ('pseudo_power', 'pcs', 'pics'):
            for value in getattr(report, metric).values():
                self.assertTrue(0.0 <= value <= 1.0)
        self.assertTrue(all(value > 0 for value in report.rmsne.values()))
        self.assertNotIn('ols-oracle', report.pseudo_power)

    def test_parallel_matches_serial(self):
        serial = run_monte_carlo(self.spec, self.estimators, n_reps=3, base_seed=7, grid_spec=SMALL_GRID, jobs=1)
        parallel = run_monte_carlo(self.spec, self.estimators, n_reps=3, base_seed=7, grid_spec=SMALL_GRID, jobs=2)
        self.assertEqual(serial, parallel)

    def test_failures_are_counted(self):
        def fake(spec, estimators, seed, **options):
            if seed == 1:
                raise NumericalError('singular draw')
            return {
                'seed': seed,
                'errors': {'specs1': 1.0, 'ols-oracle': 2.0},
                'has_levels': {'specs1': True},
                'pcs': {'specs1': 1.0, 'ols-oracle': 1.0},
                'pics': {'specs1': 0.0, 'ols-oracle': 0.0},
                'rejects': {},
            }

        with mock.patch.object(experiment, 'replicate', side_effect=fake), \
                self.assertLogs('simulation.experiment', 'WARNING'):
            report = run_monte_carlo(self.spec, ['specs1'], n_reps=3)
        self.assertEqual(report.n_failed, 1)
        self.assertEqual(report.n_succeeded, 2)
        self.assertEqual(report.failures, [{'replication': 1, 'seed': 1, 'error': 'singular draw'}])
        self.assertEqual(report.rmsne['specs1'], 0.5)

    def test_every_replication_failing_is_an_error(self):
        spec = DgpSpec(DgpFamily.TABLE3_Y_I1, a=-0.5, T=60)
        with self.assertRaises(NumericalError), self.assertLogs('simulation.experiment', 'WARNING'):
            run_monte_carlo(spec, ['specs1'], n_reps=2, grid_spec=SMALL_GRID)

    def test_factor_model_reports_against_adl(self):
        spec = DgpSpec(DgpFamily.FACTOR_MODEL, T=60, extra={'N': 6})
        report = run_monte_carlo(spec, ['specs2'], n_reps=1, grid_spec=SMALL_GRID)
        self.assertEqual(report.baseline, 'adl')
        self.assertEqual(report.pcs, {})
        self.assertEqual(report.rmsne['adl'], 1.0)
        self.assertIn('factor_dynamics', report.metadata)

    def test_rejects_bad_arguments(self):
        with self.assertRaises(InputError):
            run_monte_carlo(self.spec, n_reps=0)
        with self.assertRaises(InputError):
            run_monte_carlo('table2_low_we')


@tag('slow')
class AcceptanceTests(SimpleTestCase):
    """Desk-scale reproductions of the simulation study; minutes, not seconds."""

    def test_low_dimension_gates(self):
        estimators = ['specs1', 'adl', 'ols-oracle']
        cointegrated = run_monte_carlo(DgpSpec(DgpFamily.TABLE2_LOW_WE, a=-0.5), estimators, n_reps=200, base_seed=2024)
        self.assertGreaterEqual(cointegrated.pseudo_power['specs1'], 0.95)
        self.assertLessEqual(cointegrated.pics['specs1'], 0.05)
        self.assertGreaterEqual(cointegrated.pcs['specs1'], 0.85)
        self.assertLess(cointegrated.rmsne['specs1'] / cointegrated.rmsne['adl'], 0.95)

        independent = run_monte_carlo(DgpSpec(DgpFamily.TABLE2_LOW_WE, a=0.0), estimators, n_reps=200, base_seed=2024)
        self.assertLessEqual(independent.pseudo_power['specs1'], 0.15)
        self.assertLessEqual(abs(independent.rmsne['specs1'] / independent.rmsne['adl'] - 1), 0.10)

    def test_high_dimension_power(self):
        report = run_monte_carlo(
            DgpSpec(DgpFamily.TABLE2_HIGH_WE, a=-0.5), ['specs2', 'adl', 'ols-oracle'], n_reps=100, base_seed=1,
        )
        self.assertGreaterEqual(report.pseudo_power['specs2'], 0.9)

    def test_implied_coefficients_are_recovered(self):
        for family in (DgpFamily.TABLE2_LOW_WE, DgpFamily.TABLE2_LOW_NOWE):
            with self.subTest(family=family):
                panel, truth = gen_vecm(DgpSpec(family, T=5000), seed=9)
                design = build_cecm_design(panel, 1, 'constant_and_trend')
                support = truth.support
                gamma = ols_fit(design, support)[support]
                X = design.V_proj[:, support]
                residual = design.dy_proj - X @ gamma
                sigma2 = residual @ residual / (design.T_eff - support.size - design.d)
                se = np.sqrt(sigma2 * np.diag(np.linalg.inv(X.T @ X)))
                self.assertTrue(np.all(np.abs(gamma - truth.gamma[support]) <= 3 * se))

    def test_burn_in_is_sufficient(self):
        estimators = ['specs1', 'ols-oracle']
        default = run_monte_carlo(DgpSpec(DgpFamily.TABLE2_LOW_WE), estimators, n_reps=100, base_seed=5)
        doubled = run_monte_carlo(
            DgpSpec(DgpFamily.TABLE2_LOW_WE, extra={'burn_in': 400}), estimators, n_reps=100, base_seed=5,
        )
        power = default.pseudo_power['specs1']
        standard_error = np.sqrt(power * (1 - power) / 100)
        difference = abs(power - doubled.pseudo_power['specs1'])
        self.assertTrue(difference == 0 or difference < standard_error, (difference, standard_error))

    def test_factor_series_are_integrated(self):
        rejections = []
        for seed in range(5):
            panel = gen_factor(DgpSpec(DgpFamily.FACTOR_MODEL, T=100), seed=seed)
            rejections += [adf_test(panel.values[:, i]).reject_unit_root for i in range(panel.N)]
        self.assertLessEqual(np.mean(rejections), 0.10)

    def test_mixed_order_stationary_block(self):
        spec = DgpSpec(DgpFamily.TABLE3_Y_I0, T=100, extra={'b_star': 'block'})
        rejections = []
        for seed in range(200):
            panel, _ = gen_vecm(spec, seed=seed)
            rejections.append(adf_test(panel.values[:, 0]).reject_unit_root)
        self.assertGreaterEqual(np.mean(rejections), 0.9)

    def test_high_dimension_fit_is_fast(self):
        fit_estimator('specs2', gen_vecm(DgpSpec(DgpFamily.TABLE2_HIGH_WE), seed=0)[0], 1, 'constant_and_trend')
        for seed in range(1, 4):
            panel, _ = gen_vecm(DgpSpec(DgpFamily.TABLE2_HIGH_WE), seed=seed)
            started = time.perf_counter()
            fit_estimator('specs2', panel, 1, 'constant_and_trend')
            self.assertLessEqual(time.perf_counter() - started, 5.0)
