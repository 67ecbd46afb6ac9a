import numpy as np
from django.test import SimpleTestCase, override_settings
from numpy.testing import assert_allclose

from .exceptions import (
    ConvergenceError, ExplosiveProcessError, InputError, NumericalError, RankDeficiencyError,
)
from .linalg import orthonormal_complement, qr_least_squares, residualize
from .parallel import effective_jobs, ordered_map
from .testing import SpecsTestRunner


def _square_plus_seed(seed):
    rng = np.random.default_rng(seed)
    return seed ** 2 + float(rng.standard_normal())


class ExceptionTests(SimpleTestCase):
    def test_str_lists_context_sorted(self):
        error = InputError('Bad cell', row=3, column='x1')
        self.assertEqual(str(error), 'Bad cell (column=x1, row=3)')

    def test_str_without_context_is_message(self):
        self.assertEqual(str(NumericalError('NaN iterate')), 'NaN iterate')

    def test_with_context_adds_keys_and_returns_self(self):
        error = NumericalError('NaN iterate', lambda_I=0.5)
        self.assertIs(error.with_context(split=4), error)
        self.assertEqual(error.context, {'lambda_I': 0.5, 'split': 4})

    def test_hierarchy(self):
        self.assertTrue(issubclass(InputError, ValueError))
        self.assertTrue(issubclass(RankDeficiencyError, InputError))
        self.assertTrue(issubclass(NumericalError, ArithmeticError))
        self.assertTrue(issubclass(ConvergenceError, NumericalError))
        self.assertTrue(issubclass(ExplosiveProcessError, NumericalError))
        self.assertFalse(issubclass(InputError, NumericalError))


class LinalgTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(7)
        self.X = rng.standard_normal((50, 4))
        self.beta = np.array([1.0, -2.0, 0.0, 0.5])

    def test_exact_fit_recovers_coefficients(self):
        assert_allclose(qr_least_squares(self.X, self.X @ self.beta), self.beta, atol=1e-10)

    def test_matches_lstsq_with_noise(self):
        y = self.X @ self.beta + np.random.default_rng(1).standard_normal(50)
        expected = np.linalg.lstsq(self.X, y, rcond=None)[0]
        assert_allclose(qr_least_squares(self.X, y), expected, atol=1e-10)

    def test_duplicate_column_is_rank_deficient(self):
        X = np.column_stack([self.X, self.X[:, 0]])
        with self.assertRaises(RankDeficiencyError) as ctx:
            qr_least_squares(X, np.ones(50))
        self.assertEqual(ctx.exception.context['rank'], 4)

    def test_wide_matrix_is_rejected(self):
        with self.assertRaises(RankDeficiencyError):
            qr_least_squares(self.X[:3], np.ones(3))

    def test_no_columns(self):
        self.assertEqual(qr_least_squares(np.empty((5, 0)), np.ones(5)).shape, (0,))

    def test_residualize_is_orthogonal_to_block(self):
        D = np.column_stack([np.ones(50), np.arange(50.0)])
        residual = residualize(D, self.X)
        assert_allclose(D.T @ residual, 0.0, atol=1e-9)

    def test_residualize_without_block_copies(self):
        residual = residualize(np.empty((50, 0)), self.X)
        assert_allclose(residual, self.X)
        self.assertIsNot(residual, self.X)

    def test_orthonormal_complement(self):
        B = self.X[:4, :2]
        complement = orthonormal_complement(B)
        self.assertEqual(complement.shape, (4, 2))
        assert_allclose(B.T @ complement, 0.0, atol=1e-10)
        assert_allclose(complement.T @ complement, np.eye(2), atol=1e-10)


class ParallelTests(SimpleTestCase):
    @override_settings(SPECS_NUM_THREADS=0)
    def test_effective_jobs_uncapped(self):
        self.assertEqual(effective_jobs(8), 8)
        self.assertEqual(effective_jobs(None), 1)
        self.assertEqual(effective_jobs(0), 1)

    @override_settings(SPECS_NUM_THREADS=2)
    def test_effective_jobs_capped(self):
        self.assertEqual(effective_jobs(8), 2)
        self.assertEqual(effective_jobs(1), 1)

    def test_ordered_map_keeps_input_order(self):
        seeds = list(range(9))
        serial = ordered_map(_square_plus_seed, seeds, jobs=1)
        self.assertEqual(ordered_map(_square_plus_seed, seeds, jobs=3), serial)
        self.assertEqual(serial, [_square_plus_seed(seed) for seed in seeds])

    def test_ordered_map_empty(self):
        self.assertEqual(ordered_map(_square_plus_seed, [], jobs=4), [])


class TestRunnerTests(SimpleTestCase):
    @override_settings(SPECS_RUN_SLOW=False)
    def test_slow_excluded_by_default(self):
        self.assertIn('slow', SpecsTestRunner(verbosity=0).exclude_tags)

    @override_settings(SPECS_RUN_SLOW=True)
    def test_slow_included_when_enabled(self):
        self.assertNotIn('slow', SpecsTestRunner(verbosity=0).exclude_tags)

    @override_settings(SPECS_RUN_SLOW=False)
    def test_tagging_slow_includes_it(self):
        runner = SpecsTestRunner(verbosity=0, tags=['slow'])
        self.assertNotIn('slow', runner.exclude_tags)
