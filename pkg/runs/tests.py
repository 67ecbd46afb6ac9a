import json
import tempfile
import time
from dataclasses import replace
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, TestCase, override_settings, tag

from benchmarks.estimators import fit_estimator
from benchmarks.tests import error_correcting_panel
from simulation.models import MetricsReport
from solver.models import GridSpec

from .evaluation import evaluation_window, rolling_nowcasts
from .management.base import read_config_file
from .models import CommandName, RunManifest
from .reports import dumps
from .serializers import (
    EvalReportSerializer, FitReportSerializer, MetricsReportSerializer, SimulateOptionsSerializer,
)

SCHEMAS = Path(settings.BASE_DIR) / 'schemas'
FAST = ['--n-lambda-i', '6', '--n-lambda-g', '3']
SMALL_GRID = GridSpec(n_I=6, n_G=2, eps_ratio=1e-3)


def load_schema(name):
    return json.loads((SCHEMAS / f'{name}.json').read_text(encoding='utf-8'))


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def write_panel(self, T=120, seed=0, name='panel.csv'):
        panel = error_correcting_panel(T=T, seed=seed)
        path = self.dir / name
        frame = pd.DataFrame(panel.values, columns=['y', 'x1', 'x2'])
        frame.insert(0, 'date', pd.period_range('2004-01', periods=T, freq='M').astype(str))
        frame.to_csv(path, index=False)
        return path

    def write_config(self, text, name='run.env'):
        path = self.dir / name
        path.write_text(text, encoding='utf-8')
        return path

    def call(self, *args, **kwargs):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO(), **kwargs)
        return out.getvalue()

    def assertExitCode(self, code, *args):
        with self.assertRaises(CommandError) as raised:
            self.call(*args)
        self.assertEqual(raised.exception.returncode, code)
        return str(raised.exception)


class FitCommandTests(CommandTestCase):
    def test_writes_report_and_manifest(self):
        document = json.loads(self.call('specs_fit', str(self.write_panel()), '--lags', '1', *FAST))
        self.assertEqual(set(document), set(load_schema('fit')['required']))
        self.assertEqual(document['estimator'], 'specs2')
        self.assertEqual(document['target'], 'y')
        self.assertEqual(len(document['coefficients']), 3 * 3 - 1)
        self.assertIn('L.y', document['coefficients'])
        self.assertEqual(list(document['deterministic']), ['const'])
        self.assertTrue(set(document['active_levels']) <= {'L.y', 'L.x1', 'L.x2'})

        manifest = RunManifest.objects.get()
        self.assertEqual(manifest.command, CommandName.FIT)
        self.assertEqual(manifest.exit_code, 0)
        self.assertEqual(manifest.software_version, settings.SPECS_VERSION)
        self.assertEqual(document['manifest']['config_digest'], manifest.config_digest)
        self.assertIn('fit', manifest.stage_timings)

    def test_lambda_g_off_is_specs1(self):
        document = json.loads(self.call('specs_fit', str(self.write_panel()), '--lambda-g', 'off', *FAST))
        self.assertEqual(document['estimator'], 'specs1')
        self.assertEqual(document['lambda_G'], 0.0)

    def test_empirical_settings(self):
        args = ['--lags', '3', '--tune', 'tscv', '--k-delta', '1.1', '--k-pi', '1.1', '--det', 'trend']
        document = json.loads(self.call('specs_fit', str(self.write_panel(T=150)), *args, *FAST))
        self.assertEqual(document['tune'], 'tscv')
        self.assertEqual(document['p'], 3)
        self.assertEqual(document['det'], 'constant_and_trend')
        self.assertGreaterEqual(document['criterion'], 0.0)
        self.assertEqual(RunManifest.objects.get().options['k_delta'], 1.1)

    def test_output_file(self):
        output = self.dir / 'fit.json'
        self.assertEqual(self.call('specs_fit', str(self.write_panel()), '-o', str(output), *FAST), '')
        self.assertEqual(json.loads(output.read_text())['manifest']['output_path'], str(output))

    def test_config_file_and_flag_precedence(self):
        config = self.write_config('LAGS=2\nDET=none\nN_LAMBDA_I=6\nN_LAMBDA_G=2\n')
        panel = str(self.write_panel())
        from_file = json.loads(self.call('specs_fit', panel, '--config', str(config)))
        self.assertEqual((from_file['p'], from_file['det']), (2, 'none'))
        overridden = json.loads(self.call('specs_fit', panel, '--config', str(config), '--lags', '1'))
        self.assertEqual((overridden['p'], overridden['det']), (1, 'none'))

    def test_malformed_cell(self):
        path = self.dir / 'bad.csv'
        path.write_text('y,x1\n1.0,2.0\n1.5,abc\n2.0,2.5\n', encoding='utf-8')
        message = self.assertExitCode(2, 'specs_fit', str(path))
        self.assertIn('line=3', message)
        self.assertIn('column=x1', message)

    def test_input_errors(self):
        panel = str(self.write_panel())
        self.assertExitCode(2, 'specs_fit', panel, '--det', 'quadratic')
        self.assertExitCode(2, 'specs_fit', panel, '--target', 'unemployment')
        self.assertExitCode(2, 'specs_fit', panel, '--config', str(self.write_config('LAG=2\n')))
        self.assertExitCode(2, 'specs_fit', str(self.dir / 'missing.csv'))

    def test_non_convergence_exits_with_diagnostics(self):
        def stalled(*args, **kwargs):
            design, solution = fit_estimator(*args, **kwargs)
            return design, replace(solution, converged=False, kkt_residual=0.5)

        output = self.dir / 'fit.json'
        with mock.patch('runs.management.commands.specs_fit.fit_estimator', side_effect=stalled):
            message = self.assertExitCode(3, 'specs_fit', str(self.write_panel()), '-o', str(output), *FAST)
        self.assertIn('kkt_residual=0.5', message)
        self.assertFalse(json.loads(output.read_text())['converged'])
        self.assertEqual(RunManifest.objects.get().exit_code, 3)

    @override_settings(SPECS_RECORD_RUNS=False)
    def test_recording_can_be_disabled(self):
        document = json.loads(self.call('specs_fit', str(self.write_panel()), *FAST))
        self.assertIsNone(document['manifest']['id'])
        self.assertFalse(RunManifest.objects.exists())


class NowcastEvalCommandTests(CommandTestCase):
    def test_protocol_origin_count(self):
        args = ['--lags', '3', '--estimators', 'specs1,adl', '--n-lambda-i', '5']
        document = json.loads(self.call('specs_nowcast_eval', str(self.write_panel(T=168)), *args))
        self.assertEqual(set(document), set(load_schema('eval')['required']))
        self.assertEqual(document['n_origins'], 54)
        self.assertEqual(len(document['nowcasts']['specs1']), 54)
        self.assertEqual(document['origins'][-1], 167)
        self.assertEqual(document['msne_ratio']['adl'], 1.0)
        self.assertEqual(document['dm']['adl'], {'statistic': 0.0, 'p_value': 1.0})
        self.assertEqual(len(document['metadata']['origin_labels']), 54)
        self.assertEqual(RunManifest.objects.get().command, CommandName.NOWCAST_EVAL)

    def test_window_too_small(self):
        message = self.assertExitCode(
            2, 'specs_nowcast_eval', str(self.write_panel(T=40)), '--window-fraction', '0.2',
        )
        self.assertIn('window', message)

    def test_unknown_estimator(self):
        self.assertExitCode(2, 'specs_nowcast_eval', str(self.write_panel()), '--estimators', 'specs1,lasso')
        self.assertExitCode(2, 'specs_nowcast_eval', str(self.write_panel()), '--baseline', 'ols-oracle')


class EvaluationTests(SimpleTestCase):
    def test_window(self):
        self.assertEqual(evaluation_window(168, 3, 2 / 3), (110, 54))
        self.assertEqual(evaluation_window(100, 0, 0.5), (50, 49))

    def test_identical_estimators_tie(self):
        panel = error_correcting_panel(T=90, seed=4)
        report = rolling_nowcasts(panel, ['adl'], p=1, baseline='adl', grid_spec=SMALL_GRID, tune_once=True)
        self.assertEqual(report.msne_ratio, {'adl': 1.0})
        self.assertEqual(report.dm['adl'], {'statistic': 0.0, 'p_value': 1.0})
        self.assertEqual(set(report.metadata['frozen_penalties']), {'adl'})
        self.assertTrue(all(value == 0.0 for value in report.level_frequency['adl'].values()))

    def test_expanding_and_rolling_share_origins(self):
        panel = error_correcting_panel(T=80, seed=1)
        rolling = rolling_nowcasts(panel, ['ols'], p=0, baseline='ols')
        expanding = rolling_nowcasts(panel, ['ols'], p=0, baseline='ols', scheme='expanding')
        self.assertEqual(rolling.origins, expanding.origins)
        self.assertEqual(rolling.nowcasts['ols'][0], expanding.nowcasts['ols'][0])
        self.assertNotEqual(rolling.nowcasts['ols'][-1], expanding.nowcasts['ols'][-1])

    def test_parallel_matches_serial(self):
        panel = error_correcting_panel(T=80, seed=2)
        serial = rolling_nowcasts(panel, ['ols', 'adl'], p=1, grid_spec=SMALL_GRID)
        parallel = rolling_nowcasts(panel, ['ols', 'adl'], p=1, grid_spec=SMALL_GRID, jobs=2)
        self.assertEqual(serial.nowcasts, parallel.nowcasts)

    def test_few_origins_skip_dm(self):
        panel = error_correcting_panel(T=60, seed=2)
        with self.assertLogs('runs.evaluation', 'WARNING'):
            report = rolling_nowcasts(panel, ['ols'], p=0, baseline='ols', fraction=0.9)
        self.assertLess(report.n_origins, 10)
        self.assertIsNone(report.dm['ols'])
        self.assertIsNone(EvalReportSerializer(report).data['dm']['ols'])


class SimulateCommandTests(CommandTestCase):
    experiment = 'FAMILY=table2_low_we\nT=60\nREPS=2\nESTIMATORS=specs1\nBURN_IN=50\nN_LAMBDA_I=5\nN_LAMBDA_G=2\n'

    def test_report_is_byte_stable(self):
        config = self.write_config(self.experiment)
        first, second = self.dir / 'first.json', self.dir / 'second.json'
        table = self.call('specs_simulate', str(config), '-o', str(first), '--seed', '3', '--jobs', '1')
        self.call('specs_simulate', '--config', str(config), '-o', str(second), '--seed', '3', '--jobs', '2')
        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertIn('RMSNE', table)
        self.assertIn('specs1', table)

        document = json.loads(first.read_text())
        self.assertEqual(set(document), set(load_schema('simulate')['required']))
        self.assertEqual(document['seeds'], [3, 4])
        self.assertEqual(document['baseline'], 'ols-oracle')
        sidecar = json.loads(Path(f'{first}.manifest.json').read_text())
        self.assertEqual(sidecar['seed_ledger']['replication_seeds'], [3, 4])
        self.assertEqual(RunManifest.objects.filter(command=CommandName.SIMULATE).count(), 2)

    def test_flags_override_experiment(self):
        config = self.write_config(self.experiment)
        document = json.loads(self.call('specs_simulate', str(config), '--reps', '1', '--a', '0'))
        self.assertEqual(document['n_reps'], 1)
        self.assertEqual(document['a'], 0.0)

    def test_invalid_family_lists_valid_ones(self):
        message = self.assertExitCode(2, 'specs_simulate', '--family', 'table4')
        self.assertIn('table2_low_we', message)
        self.assertIn('factor_model', message)

    def test_out_of_range_design(self):
        self.assertExitCode(2, 'specs_simulate', '--family', 'table2_low_we', '--a', '0.3')
        self.assertExitCode(2, 'specs_simulate', '--family', 'table2_low_we', '--T', '20')

    def test_all_replications_failing_is_numerical(self):
        args = ['--family', 'table3_y_i1', '--a', '-0.5', '--T', '60', '--reps', '2', '--estimators', 'specs1']
        self.assertExitCode(3, 'specs_simulate', *args)
        self.assertEqual(RunManifest.objects.get().exit_code, 3)

    @tag('slow')
    def test_single_replication_is_fast(self):
        started = time.perf_counter()
        self.call('specs_simulate', '--family', 'table2_low_we', '--reps', '1')
        self.assertLess(time.perf_counter() - started, 5.0)


class OptionTests(SimpleTestCase):
    def test_design_knobs_become_extra(self):
        serializer = SimulateOptionsSerializer(data={
            'family': 'factor_model', 'dynamics': 'on', 'n': '12', 'phi': '0.9', 'estimators': 'specs1, adl',
        })
        self.assertTrue(serializer.is_valid(), serializer.errors)
        data = serializer.validated_data
        self.assertEqual(data['extra'], {'dynamics': True, 'N': 12, 'phi': 0.9})
        self.assertEqual(data['estimators'], ['specs1', 'adl'])
        self.assertEqual(data['det'], 'constant_and_trend')

    def test_read_config_file(self):
        with tempfile.NamedTemporaryFile('w', suffix='.env', delete=False) as handle:
            handle.write('# study\nFAMILY=table2_low_we\nK-DELTA = 1.1\n')
        self.addCleanup(Path(handle.name).unlink)
        self.assertEqual(read_config_file(handle.name), {'family': 'table2_low_we', 'k_delta': '1.1'})


class SchemaTests(SimpleTestCase):
    def test_required_keys_match_serializers(self):
        pairs = [
            ('fit', FitReportSerializer, {'solution', 'manifest'}),
            ('eval', EvalReportSerializer, {'manifest'}),
            ('simulate', MetricsReportSerializer, set()),
        ]
        for name, serializer, added in pairs:
            with self.subTest(schema=name):
                self.assertEqual(set(load_schema(name)['required']), set(serializer().fields) | added)

    def test_metrics_serializer_keeps_nulls(self):
        report = MetricsReport(
            family='factor_model', a=-0.5, T=100, n_reps=2, seed=0, baseline='adl',
            pseudo_power={'specs1': 0.5}, pcs={}, pics={}, rmsne={'specs1': np.float64(0.9), 'adl': 1.0},
        )
        data = MetricsReportSerializer(report).data
        self.assertEqual(data['rmsne'], {'specs1': 0.9, 'adl': 1.0})
        self.assertEqual(data['n_failed'], 0)


class DumpsTests(SimpleTestCase):
    def test_keys_are_sorted_and_indented(self):
        text = dumps({'b': 1, 'a': {'d': [1, 2], 'c': None}})
        self.assertEqual(text, '{\n  "a": {\n    "c": null,\n    "d": [\n      1,\n      2\n    ]\n  },\n  "b": 1\n}')

    def test_numpy_values(self):
        document = json.loads(dumps({'gamma': np.array([0.5, 0.0]), 'df': np.int64(1)}))
        self.assertEqual(document, {'gamma': [0.5, 0.0], 'df': 1})
