import hashlib
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

from decouple import Config, RepositoryEnv
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from rest_framework import serializers

from core.exceptions import InputError, NumericalError
from runs.models import RunManifest
from runs.reports import dumps
from runs.serializers import RunManifestSerializer
from solver.models import GridSpec, SolverConfig, WeightSpec

logger = logging.getLogger(__name__)

INPUT_ERROR = 2
NUMERICAL_ERROR = 3


def read_config_file(path):
    """Flat KEY=value file as lower-cased option names."""
    try:
        config = Config(RepositoryEnv(path))
    except OSError as exc:
        raise InputError('Could not read config file', path=str(path), reason=str(exc)) from exc
    return {key.strip().lower().replace('-', '_'): config.repository[key] for key in config.repository.data}


class SpecsCommand(BaseCommand):
    """Shared plumbing: config files, option validation, exit codes and the run manifest.

    Subclasses set ``options_serializer`` and implement ``run(options)``, returning the
    output document and the seed ledger. Option precedence is flag, then config file,
    then the serializer default (which falls back to settings).
    """
    options_serializer = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='KEY=value file; flags override its values')
        parser.add_argument('--output', '-o', help='Write the JSON document here instead of stdout')

    def resolve_options(self, options):
        fields = self.options_serializer().fields
        values = {}
        if options.get('config'):
            from_file = read_config_file(options['config'])
            unknown = sorted(set(from_file) - set(fields) - {'output'})
            if unknown:
                raise InputError('Unknown keys in config file', keys=unknown, valid=sorted(fields))
            values.update(from_file)
        file_output = values.pop('output', None)
        values.update({name: options[name] for name in fields if options.get(name) is not None})
        output = options.get('output') or file_output
        serializer = self.options_serializer(data=values)
        serializer.is_valid(raise_exception=True)
        return dict(serializer.validated_data), output

    @contextmanager
    def stage(self, name):
        started = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - started, 6)

    def handle(self, *args, **options):
        self.arguments = options
        self.timings = {}
        self.failure = None
        started = time.perf_counter()
        resolved = {}
        output = None
        try:
            resolved, output = self.resolve_options(options)
            document, seed_ledger = self.run(resolved)
        except serializers.ValidationError as exc:
            raise CommandError(f'Invalid options: {json.dumps(exc.detail, default=str)}', returncode=INPUT_ERROR) from exc
        except InputError as exc:
            raise CommandError(str(exc), returncode=INPUT_ERROR) from exc
        except NumericalError as exc:
            self.save_manifest(resolved, {}, output, started, NUMERICAL_ERROR)
            raise CommandError(str(exc), returncode=NUMERICAL_ERROR) from exc

        exit_code = NUMERICAL_ERROR if self.failure else 0
        manifest = self.save_manifest(resolved, seed_ledger, output, started, exit_code)
        self.emit(document, manifest, output)
        if self.failure:
            raise CommandError(str(self.failure), returncode=NUMERICAL_ERROR)

    def emit(self, document, manifest, output):
        """Embed the manifest and write the document."""
        document = dict(document, manifest=manifest)
        self.write_document(document, output)

    def write_document(self, document, output):
        text = dumps(document) + '\n'
        if output:
            Path(output).write_text(text, encoding='utf-8')
            logger.info('Wrote %s', output)
        else:
            self.stdout.write(text, ending='')

    def save_manifest(self, resolved, seed_ledger, output, started, exit_code):
        options = json.loads(json.dumps(resolved, sort_keys=True, default=str))
        manifest = RunManifest(
            command=self.command_name,
            config_digest=hashlib.sha256(json.dumps(options, sort_keys=True).encode()).hexdigest(),
            options=options,
            seed_ledger=seed_ledger,
            software_version=settings.SPECS_VERSION,
            wall_clock_seconds=round(time.perf_counter() - started, 6),
            stage_timings=self.timings,
            output_path=str(output or ''),
            exit_code=exit_code,
        )
        if settings.SPECS_RECORD_RUNS:
            try:
                manifest.save()
            except DatabaseError as exc:
                logger.warning('Run manifest not recorded (%s); run "manage.py migrate" to create the ledger', exc)
        return RunManifestSerializer(manifest).data

    def run(self, options):
        raise NotImplementedError


def add_solver_arguments(parser):
    group = parser.add_argument_group('penalized fit')
    group.add_argument('--k-delta', help='Adaptive weight exponent for lagged levels')
    group.add_argument('--k-pi', help='Adaptive weight exponent for differences')
    group.add_argument('--lambda-ridge', help='Ridge penalty of the initial estimator, or "auto"')
    group.add_argument('--n-lambda-i', help='Number of individual penalties on the grid')
    group.add_argument('--n-lambda-g', help='Number of group penalties on the grid')
    group.add_argument('--eps-ratio', help='Smallest over largest individual penalty')
    group.add_argument('--max-iterations')
    group.add_argument('--tolerance')
    group.add_argument('--standardize', help='on|off')
    group.add_argument('--seed', help='Seed for every random draw of the run')
    group.add_argument('--jobs', help='Worker processes (capped by SPECS_NUM_THREADS)')


def solver_inputs(options):
    """(GridSpec, WeightSpec, SolverConfig) from validated options over settings defaults."""
    grid_spec = GridSpec.from_settings(
        n_I=options.get('n_lambda_i'), n_G=options.get('n_lambda_g'), eps_ratio=options.get('eps_ratio'),
    )
    weight_spec = WeightSpec.from_settings(
        k_delta=options.get('k_delta'), k_pi=options.get('k_pi'), lambda_ridge=options.get('lambda_ridge'),
    )
    config = SolverConfig.from_settings(
        max_iterations=options.get('max_iterations'), tolerance=options.get('tolerance'),
        standardize=options.get('standardize'),
    )
    return grid_spec, weight_spec, config
