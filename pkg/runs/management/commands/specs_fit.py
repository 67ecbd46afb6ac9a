from benchmarks.estimators import fit_estimator
from benchmarks.models import EstimatorKind
from core.exceptions import ConvergenceError
from design.readers import read_panel_csv
from runs.management.base import SpecsCommand, add_solver_arguments, solver_inputs
from runs.models import CommandName
from runs.reports import fit_report
from runs.serializers import FitOptionsSerializer, FitReportSerializer, SpecsSolutionSerializer
from tuning.models import TscvConfig


class Command(SpecsCommand):
    help = 'Fit the penalized single-equation error-correction model to a CSV panel'
    command_name = CommandName.FIT
    options_serializer = FitOptionsSerializer

    def add_arguments(self, parser):
        parser.add_argument('csv', help='Levels panel: header row, one column per series')
        super().add_arguments(parser)
        parser.add_argument('--target', help='Target column name or position (default 0)')
        parser.add_argument('--lags', help='Lagged differences p')
        parser.add_argument('--det', help='none|const|trend')
        parser.add_argument('--tune', help='bic|tscv')
        parser.add_argument('--lambda-g', help='on (group penalty, SPECS2) or off (SPECS1)')
        parser.add_argument('--tscv-fraction', help='Initial cross-validation window as a share of T')
        parser.add_argument('--tscv-scheme', help='expanding|rolling')
        add_solver_arguments(parser)

    def run(self, options):
        with self.stage('read'):
            panel = read_panel_csv(self.arguments['csv'], options['target'])
        grid_spec, weight_spec, config = solver_inputs(options)
        tscv = TscvConfig(initial_fraction=options['tscv_fraction'], scheme=options['tscv_scheme'])
        kind = EstimatorKind.SPECS2 if options['lambda_g'] else EstimatorKind.SPECS1
        with self.stage('fit'):
            design, solution = fit_estimator(
                kind, panel, options['lags'], options['det'], grid_spec=grid_spec, weight_spec=weight_spec,
                config=config, tune=options['tune'], tscv=tscv, jobs=options['jobs'],
            )
        if not solution.converged:
            self.failure = ConvergenceError(
                'Solver did not converge at the selected penalties',
                lambda_I=solution.lambda_I, lambda_G=solution.lambda_G,
                iterations=solution.iterations, kkt_residual=solution.kkt_residual,
            )
        report = fit_report(panel, design, solution, options['tune'], options['seed'])
        document = dict(FitReportSerializer(report).data, solution=SpecsSolutionSerializer(solution).data)
        return document, {'seed': options['seed']}
