from design.readers import read_panel_csv
from runs.evaluation import rolling_nowcasts
from runs.management.base import SpecsCommand, add_solver_arguments, solver_inputs
from runs.models import CommandName
from runs.serializers import EvalOptionsSerializer, EvalReportSerializer
from tuning.models import TscvConfig


class Command(SpecsCommand):
    help = 'Pseudo out-of-sample nowcast comparison over a moving window'
    command_name = CommandName.NOWCAST_EVAL
    options_serializer = EvalOptionsSerializer

    def add_arguments(self, parser):
        parser.add_argument('csv', help='Levels panel: header row, one column per series')
        super().add_arguments(parser)
        parser.add_argument('--target')
        parser.add_argument('--lags')
        parser.add_argument('--det', help='none|const|trend')
        parser.add_argument('--tune', help='bic|tscv, applied inside every window')
        parser.add_argument('--tscv-fraction')
        parser.add_argument('--tscv-scheme')
        parser.add_argument('--window-fraction', help='First window as a share of the usable rows (default 2/3)')
        parser.add_argument('--scheme', help='rolling|expanding')
        parser.add_argument('--estimators', help='Comma separated, e.g. specs1,specs2,adl,adl-adf')
        parser.add_argument('--baseline', help='Estimator the MSNE ratios and DM tests refer to (default adl)')
        parser.add_argument('--tune-once', action='store_const', const=True,
                            help='Freeze penalties at the values chosen on the first window')
        add_solver_arguments(parser)

    def run(self, options):
        with self.stage('read'):
            panel = read_panel_csv(self.arguments['csv'], options['target'])
        grid_spec, weight_spec, config = solver_inputs(options)
        tscv = TscvConfig(initial_fraction=options['tscv_fraction'], scheme=options['tscv_scheme'])
        with self.stage('evaluate'):
            report = rolling_nowcasts(
                panel, options['estimators'], p=options['lags'], det=options['det'],
                fraction=options['window_fraction'], scheme=options['scheme'], baseline=options['baseline'],
                tune_once=options['tune_once'], jobs=options['jobs'], seed=options['seed'],
                tune=options['tune'], tscv=tscv, grid_spec=grid_spec, weight_spec=weight_spec, config=config,
            )
        return EvalReportSerializer(report).data, {'seed': options['seed']}
