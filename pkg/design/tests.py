import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import InputError, RankDeficiencyError
from core.linalg import qr_least_squares
from simulation.dgp import gen_vecm
from simulation.models import DgpFamily, DgpSpec

from .coefficients import implied_single_equation
from .construction import build_cecm_design, next_regressors, project_out, recover_theta
from .diagnostics import q_transform, scaled_covariance
from .models import DeterministicSpec, TimeSeriesPanel, VecmParams
from .readers import read_panel_csv

IOTA_TILDE = np.array([1.0, -1.0, -1.0, -1.0, -1.0])


def random_walk_panel(T=120, N=4, seed=0):
    rng = np.random.default_rng(seed)
    return TimeSeriesPanel(values=np.cumsum(rng.standard_normal((T, N)), axis=0))


def toeplitz(N, rho=0.8):
    idx = np.arange(N)
    return rho ** np.abs(idx[:, None] - idx[None, :])


class TimeSeriesPanelTests(SimpleTestCase):
    def test_rejects_non_finite_values(self):
        values = np.ones((10, 3))
        values[4, 1] = np.nan
        with self.assertRaises(InputError) as ctx:
            TimeSeriesPanel(values=values)
        self.assertEqual(ctx.exception.context['row'], 4)

    def test_rejects_target_out_of_range(self):
        with self.assertRaises(InputError):
            TimeSeriesPanel(values=np.ones((10, 3)), target_index=3)

    def test_target_first_moves_target_column(self):
        values = np.arange(30.0).reshape(10, 3)
        panel = TimeSeriesPanel(values=values, target_index=2, labels=['a', 'b', 'c'])
        reordered = panel.target_first()
        self.assertEqual(reordered.labels, ['c', 'a', 'b'])
        assert_array_equal(reordered.values[:, 0], values[:, 2])


class BuildCecmDesignTests(SimpleTestCase):
    def test_parameter_count_for_ten_series_one_lag(self):
        panel = random_walk_panel(T=100, N=10)
        design = build_cecm_design(panel, p=1, det='constant_and_trend')
        self.assertEqual(design.V.shape[1], 29)
        self.assertEqual(design.n_parameters, 31)
        self.assertEqual(design.T_eff, 98)

    def test_no_lag_two_series_constant(self):
        panel = random_walk_panel(T=30, N=2)
        design = build_cecm_design(panel, p=0, det='constant')
        self.assertEqual(design.M, 1)
        self.assertEqual(design.column_labels, ['L.z0', 'L.z1', 'D.z1'])
        Z = panel.values
        assert_allclose(design.V[:, 0], Z[:-1, 0])
        assert_allclose(design.V[:, 1], Z[:-1, 1])
        assert_allclose(design.V[:, 2], np.diff(Z[:, 1]))

    def test_row_alignment_with_lags(self):
        panel = random_walk_panel(T=40, N=3, seed=3)
        p = 2
        design = build_cecm_design(panel, p=p, det='constant_and_trend')
        Z = panel.values
        dZ = np.diff(Z, axis=0)
        t = 5
        assert_allclose(design.dy[t], Z[t + p + 1, 0] - Z[t + p, 0])
        expected = np.concatenate([Z[t + p], dZ[t + p, 1:], dZ[t + p - 1], dZ[t + p - 2]])
        assert_allclose(design.V[t], expected)
        self.assertEqual(design.D[t, 1], t + p)

    def test_linear_trend_panel_has_empty_difference_blocks(self):
        t = np.arange(50.0)
        panel = TimeSeriesPanel(values=np.column_stack([1 + 2 * t, 3 - t, 0.5 * t]))
        design = build_cecm_design(panel, p=1, det='constant')
        assert_allclose(design.V_proj[:, design.differences], 0.0, atol=1e-10)

    def test_projected_copies_are_orthogonal_to_deterministics(self):
        design = build_cecm_design(random_walk_panel(), p=1, det='constant_and_trend')
        DtV = design.D.T @ design.V_proj
        norms = np.linalg.norm(design.V, axis=0)
        self.assertTrue(np.all(np.abs(DtV) <= 1e-10 * norms * np.linalg.norm(design.D, axis=0)[:, None]))
        self.assertLess(np.abs(design.D.T @ design.dy_proj).max(), 1e-8)

    def test_insufficient_rows(self):
        panel = TimeSeriesPanel(values=np.random.default_rng(1).standard_normal((4, 2)))
        with self.assertRaises(InputError):
            build_cecm_design(panel, p=1, det='constant_and_trend')

    def test_negative_lag_order(self):
        with self.assertRaises(InputError):
            build_cecm_design(random_walk_panel(), p=-1, det='none')

    def test_unknown_deterministic_kind(self):
        with self.assertRaises(InputError):
            build_cecm_design(random_walk_panel(), p=1, det='quadratic')

    def test_next_regressors_match_design_rows(self):
        panel = random_walk_panel(T=60, N=3, seed=8)
        full = build_cecm_design(panel, p=2, det='none')
        assert_allclose(next_regressors(panel, 2), full.V[-1])


class ProjectOutTests(SimpleTestCase):
    def test_no_deterministics_is_identity(self):
        design = build_cecm_design(random_walk_panel(), p=1, det='none')
        assert_array_equal(design.dy_proj, design.dy)

    def test_constant_response_is_annihilated(self):
        design = build_cecm_design(random_walk_panel(), p=1, det='constant')
        from dataclasses import replace
        design = project_out(replace(design, dy=np.ones(design.T_eff)))
        assert_allclose(design.dy_proj, 0.0, atol=1e-12)

    def test_idempotent(self):
        once = build_cecm_design(random_walk_panel(), p=2, det='constant_and_trend')
        twice = project_out(once)
        assert_allclose(twice.V_proj, once.V_proj, atol=1e-12)
        assert_allclose(twice.dy_proj, once.dy_proj, atol=1e-12)

    def test_frisch_waugh_lovell(self):
        for seed in range(20):
            design = build_cecm_design(random_walk_panel(T=150, N=4, seed=seed), p=1, det='constant_and_trend')
            joint = qr_least_squares(np.hstack([design.V, design.D]), design.dy)
            projected = qr_least_squares(design.V_proj, design.dy_proj)
            assert_allclose(projected, joint[:design.n_coefficients], rtol=1e-8, atol=1e-10)


class RecoverThetaTests(SimpleTestCase):
    def test_mean_of_constant_response(self):
        from dataclasses import replace
        design = build_cecm_design(random_walk_panel(), p=1, det='constant')
        design = replace(design, dy=np.full(design.T_eff, 3.0))
        assert_allclose(recover_theta(design, np.zeros(design.n_coefficients)), [3.0])

    def test_empty_without_deterministics(self):
        design = build_cecm_design(random_walk_panel(), p=1, det='none')
        self.assertEqual(recover_theta(design, np.zeros(design.n_coefficients)).size, 0)

    def test_matches_joint_regression(self):
        design = build_cecm_design(random_walk_panel(T=200, N=3, seed=4), p=1, det='constant_and_trend')
        joint = qr_least_squares(np.hstack([design.V, design.D]), design.dy)
        gamma = joint[:design.n_coefficients]
        assert_allclose(recover_theta(design, gamma), joint[design.n_coefficients:], rtol=1e-8)

    def test_wrong_length(self):
        design = build_cecm_design(random_walk_panel(), p=1, det='constant')
        with self.assertRaises(InputError):
            recover_theta(design, np.zeros(3))


class ImpliedSingleEquationTests(SimpleTestCase):
    def test_toeplitz_gives_single_contemporaneous_coefficient(self):
        for N in (5, 10, 50):
            vecm = VecmParams(A=np.zeros((N, 1)), B=np.zeros((N, 1)), Phi=[], Sigma_eps=toeplitz(N))
            implied = implied_single_equation(vecm, p=0)
            expected = np.zeros(N - 1)
            expected[0] = 0.8
            assert_allclose(implied.pi0, expected, atol=1e-12)

    def test_toeplitz_sparsity_for_any_correlation(self):
        for rho in (-0.9, -0.3, 0.2, 0.95):
            vecm = VecmParams(A=np.zeros((6, 1)), B=np.zeros((6, 1)), Phi=[], Sigma_eps=toeplitz(6, rho))
            implied = implied_single_equation(vecm, p=0)
            assert_array_equal(implied.S_pi, [0])
            self.assertAlmostEqual(implied.pi0[0], rho, places=12)

    def test_no_cointegration_gives_zero_delta(self):
        vecm = VecmParams(A=np.zeros((10, 1)), B=np.zeros((10, 1)), Phi=[0.4 * np.eye(10)], Sigma_eps=toeplitz(10))
        implied = implied_single_equation(vecm, p=1)
        assert_array_equal(implied.delta, np.zeros(10))
        self.assertEqual(implied.S_delta.size, 0)

    def test_weakly_exogenous_low_dimension(self):
        alpha = -0.5
        B = np.concatenate([IOTA_TILDE, np.zeros(5)])[:, None]
        A = alpha * np.eye(10)[:, :1]
        vecm = VecmParams(A=A, B=B, Phi=[0.4 * np.eye(10)], Sigma_eps=toeplitz(10))
        implied = implied_single_equation(vecm, p=1)
        assert_allclose(implied.delta, alpha * B[:, 0], atol=1e-12)
        c = np.concatenate([[1.0], -implied.pi0])
        assert_allclose(implied.delta, (c @ A) @ B.T, atol=1e-12)

    def test_not_weakly_exogenous_low_dimension(self):
        alpha = -0.3
        B = np.zeros((10, 2))
        B[:5, 0] = IOTA_TILDE
        B[5:, 1] = IOTA_TILDE
        vecm = VecmParams(A=alpha * B, B=B, Phi=[0.4 * np.eye(10)], Sigma_eps=toeplitz(10))
        implied = implied_single_equation(vecm, p=1)
        expected = 1.8 * alpha * np.concatenate([IOTA_TILDE, np.zeros(5)])
        assert_allclose(implied.delta, expected, atol=1e-12)

    def test_lag_coefficients(self):
        vecm = VecmParams(A=np.zeros((4, 1)), B=np.zeros((4, 1)), Phi=[0.4 * np.eye(4)], Sigma_eps=toeplitz(4))
        implied = implied_single_equation(vecm, p=1)
        self.assertEqual(implied.pi.shape, (3 + 4,))
        assert_allclose(implied.pi[3:], 0.4 * np.array([1.0, -0.8, 0.0, 0.0]), atol=1e-12)

    def test_deterministic_coefficients(self):
        N = 3
        B = np.array([[1.0], [-1.0], [0.0]])
        A = np.array([[-0.5], [0.0], [0.0]])
        mu = np.array([1.0, 2.0, 3.0])
        vecm = VecmParams(A=A, B=B, Phi=[], Sigma_eps=np.eye(N), mu=mu)
        implied = implied_single_equation(vecm, p=0)
        self.assertAlmostEqual(implied.mu0, -implied.delta @ mu)
        self.assertEqual(implied.tau0, 0.0)

    def test_too_many_vecm_lags(self):
        vecm = VecmParams(A=np.zeros((3, 1)), B=np.zeros((3, 1)), Phi=[np.eye(3), np.eye(3)], Sigma_eps=np.eye(3))
        with self.assertRaises(InputError):
            implied_single_equation(vecm, p=1)


class VecmParamsTests(SimpleTestCase):
    def test_rejects_indefinite_covariance(self):
        with self.assertRaises(InputError):
            VecmParams(A=np.zeros((2, 1)), B=np.zeros((2, 1)), Phi=[], Sigma_eps=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_mismatched_ranks(self):
        with self.assertRaises(InputError):
            VecmParams(A=np.zeros((2, 1)), B=np.zeros((2, 2)), Phi=[], Sigma_eps=np.eye(2))


class DiagnosticsTests(SimpleTestCase):
    def setUp(self):
        self.design = build_cecm_design(random_walk_panel(T=200, N=5, seed=11), p=1, det='constant')

    def test_empty_basis_is_a_permutation(self):
        S_delta, S_pi = [0, 2], [1, 3]
        rotated = q_transform(self.design, S_delta, S_pi, np.zeros((2, 0)))
        W = self.design.V_proj[:, self.design.differences][:, S_pi]
        Z = self.design.V_proj[:, S_delta]
        assert_allclose(np.abs(rotated), np.abs(np.hstack([W, Z])), atol=1e-12)

    def test_full_rank_basis_leaves_no_trend_block(self):
        rotated = q_transform(self.design, [0, 1], [0], np.eye(2))
        self.assertEqual(rotated.shape[1], 3)

    def test_complement_has_unit_l1_columns(self):
        from .diagnostics import l1_normalized_complement
        B_perp = l1_normalized_complement(IOTA_TILDE[:, None])
        assert_allclose(np.abs(B_perp).sum(axis=0), 1.0)
        assert_allclose(IOTA_TILDE @ B_perp, 0.0, atol=1e-12)

    def test_rank_deficient_basis(self):
        with self.assertRaises(RankDeficiencyError):
            q_transform(self.design, [0, 1, 2], [], np.ones((3, 2)))

    def test_stationary_only_covariance(self):
        W = self.design.V_proj[:, self.design.differences]
        covariance = scaled_covariance(W, s_delta=0, s_pi=W.shape[1], T=self.design.T_eff)
        assert_allclose(covariance.matrix, W.T @ W / self.design.T_eff, atol=1e-12)
        self.assertEqual(covariance.sigma_22.size, 0)

    def test_blocks_match_dense_formula(self):
        rotated = q_transform(self.design, [0, 1, 2], [0, 2], IOTA_TILDE[:3, None])
        s_pi, s_delta, T = 3, 2, self.design.T_eff
        covariance = scaled_covariance(rotated, s_delta=s_delta, s_pi=s_pi, T=T)
        S_inv = np.diag(np.concatenate([np.full(s_pi, 1 / np.sqrt(T)), np.full(s_delta, np.sqrt(s_delta) / T)]))
        dense = S_inv @ rotated.T @ rotated @ S_inv
        assert_allclose(covariance.matrix, dense, atol=1e-12)
        assert_allclose(covariance.sigma_12, dense[:s_pi, s_pi:], atol=1e-12)

    def test_dimension_mismatch(self):
        with self.assertRaises(InputError):
            scaled_covariance(np.ones((10, 3)), s_delta=1, s_pi=1, T=10)


class WeaklyExogenousDiagnosticsTests(SimpleTestCase):
    """Diagnostics on data from the low-dimensional weakly exogenous VECM."""

    def design(self, T, seed):
        panel, _ = gen_vecm(DgpSpec(DgpFamily.TABLE2_LOW_WE, T=T), seed=seed)
        return build_cecm_design(panel, p=1, det='constant')

    def test_equilibrium_error_variance_stays_bounded(self):
        equilibrium, level = {}, {}
        for T in (200, 400, 800):
            variances = []
            for seed in range(50):
                design = self.design(T, seed)
                rotated = q_transform(design, range(5), [], IOTA_TILDE)
                variances.append((np.var(rotated[:, 0]), np.var(design.V_proj[:, 1])))
            equilibrium[T], level[T] = np.mean(variances, axis=0)
        self.assertLess(equilibrium[800] / equilibrium[200], 1.25)
        self.assertLess(equilibrium[400] / equilibrium[200], 1.25)
        self.assertGreater(level[800] / level[200], 2.0)
        self.assertGreater(level[800], level[400])

    def test_scaled_covariance_is_well_conditioned(self):
        for seed in range(10):
            design = self.design(500, seed)
            rotated = q_transform(design, [5], range(design.M), np.zeros((1, 0)))
            covariance = scaled_covariance(rotated, s_delta=1, s_pi=design.M, T=design.T_eff)
            with self.subTest(seed=seed):
                self.assertGreater(covariance.min_eigenvalue, 0.01)


class ReadPanelCsvTests(SimpleTestCase):
    def write(self, text):
        handle = tempfile.NamedTemporaryFile('w', suffix='.csv', delete=False)
        handle.write(text)
        handle.close()
        self.addCleanup(Path(handle.name).unlink)
        return handle.name

    def test_reads_date_column_as_index(self):
        path = self.write('date,u,x1,x2\n2020-01,1.0,2.0,3.0\n2020-02,1.5,2.5,3.5\n2020-03,1.2,2.2,3.1\n')
        panel = read_panel_csv(path, target='x1')
        self.assertEqual(panel.labels, ['u', 'x1', 'x2'])
        self.assertEqual(panel.target_index, 1)
        self.assertEqual(panel.index, ['2020-01', '2020-02', '2020-03'])

    def test_numeric_only_file(self):
        path = self.write('a,b\n1,2\n3,4\n5,6\n')
        panel = read_panel_csv(path)
        assert_array_equal(panel.values, [[1, 2], [3, 4], [5, 6]])
        self.assertIsNone(panel.index)

    def test_bad_cell_reports_line_and_column(self):
        path = self.write('a,b\n1,2\n3,oops\n5,6\n')
        with self.assertRaises(InputError) as ctx:
            read_panel_csv(path)
        self.assertEqual(ctx.exception.context['line'], 3)
        self.assertEqual(ctx.exception.context['column'], 'b')

    def test_unknown_target(self):
        path = self.write('a,b\n1,2\n3,4\n')
        with self.assertRaises(InputError):
            read_panel_csv(path, target='c')

    def test_target_by_position_string(self):
        path = self.write('a,b\n1,2\n3,4\n')
        self.assertEqual(read_panel_csv(path, target='1').target_index, 1)


class DeterministicSpecTests(SimpleTestCase):
    def test_aliases(self):
        self.assertEqual(DeterministicSpec.parse('trend').n_columns, 2)
        self.assertEqual(DeterministicSpec.parse('const').n_columns, 1)
        self.assertEqual(DeterministicSpec.parse('none').n_columns, 0)

    def test_trend_offset(self):
        D = DeterministicSpec.parse('trend').matrix(4, trend_start=2)
        assert_array_equal(D[:, 1], [2, 3, 4, 5])
