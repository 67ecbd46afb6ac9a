from runs.management.base import SpecsCommand, add_solver_arguments, solver_inputs
from runs.models import CommandName
from runs.reports import metrics_table
from runs.serializers import MetricsReportSerializer, SimulateOptionsSerializer
from simulation.experiment import run_monte_carlo
from simulation.models import DgpSpec


class Command(SpecsCommand):
    help = 'Seeded Monte Carlo study of one simulation design'
    command_name = CommandName.SIMULATE
    options_serializer = SimulateOptionsSerializer

    def add_arguments(self, parser):
        parser.add_argument('experiment', nargs='?', help='Experiment config file (KEY=value), same as --config')
        super().add_arguments(parser)
        parser.add_argument('--family')
        parser.add_argument('--a', help='Adjustment multiplier in [-0.5, 0]')
        parser.add_argument('--persistence', help='low|high')
        parser.add_argument('-T', '--T', dest='t', help='Sample size')
        parser.add_argument('--reps', help='Number of replications')
        parser.add_argument('--lags')
        parser.add_argument('--det', help='Deterministic terms of the fitted models (default trend)')
        parser.add_argument('--estimators', help='Comma separated; wald and wald-ps add the tests')
        extra = parser.add_argument_group('design knobs')
        extra.add_argument('--burn-in')
        extra.add_argument('--b-star', help='kron|block')
        extra.add_argument('--n', help='Cross-section size of the factor model')
        extra.add_argument('--dynamics', help='on|off (factor model)')
        for name in ('phi', 'alpha2', 'beta2', 'a1', 'b1'):
            extra.add_argument(f'--{name}')
        add_solver_arguments(parser)

    def resolve_options(self, options):
        options = dict(options, config=options.get('config') or options.get('experiment'))
        return super().resolve_options(options)

    def run(self, options):
        spec = DgpSpec(
            family=options['family'], a=options['a'], persistence=options['persistence'], T=options['t'],
            extra=options['extra'],
        )
        grid_spec, weight_spec, config = solver_inputs(options)
        with self.stage('simulate'):
            report = run_monte_carlo(
                spec, options.get('estimators'), n_reps=options['reps'], base_seed=options['seed'],
                jobs=options['jobs'], p=options['lags'], det=options['det'], grid_spec=grid_spec,
                weight_spec=weight_spec, solver_config=config,
            )
        self.report = report
        ledger = {'base_seed': options['seed'], 'replication_seeds': report.seeds, 'wald_seed': options['seed']}
        return MetricsReportSerializer(report).data, ledger

    def emit(self, document, manifest, output):
        """The report stays free of timestamps; the manifest goes to a sidecar file."""
        self.write_document(document, output)
        if output:
            self.write_document(manifest, f'{output}.manifest.json')
            self.stdout.write(metrics_table(self.report))
        else:
            self.stderr.write(metrics_table(self.report))
