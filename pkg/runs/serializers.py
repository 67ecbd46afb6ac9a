from rest_framework import serializers

from benchmarks.models import EstimatorKind, TuningRule
from design.models import DETERMINISTIC_ALIASES
from simulation.models import WALD, WALD_PS, DgpFamily, Persistence
from tuning.models import WindowScheme

from .models import RunManifest


def _vector(**kwargs):
    return serializers.ListField(child=serializers.FloatField(), **kwargs)


class CommaSeparatedField(serializers.ListField):
    """Accepts ``a,b,c`` from a flag or config file as well as a list."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(',') if item.strip()]
        return super().to_internal_value(data)


class OnOffField(serializers.BooleanField):
    TRUE_VALUES = serializers.BooleanField.TRUE_VALUES | {'on', 'On', 'ON'}
    FALSE_VALUES = serializers.BooleanField.FALSE_VALUES | {'off', 'Off', 'OFF'}


# Output documents

class SpecsSolutionSerializer(serializers.Serializer):
    gamma = _vector()
    N = serializers.IntegerField()
    lambda_I = serializers.FloatField()
    lambda_G = serializers.FloatField()
    objective = serializers.FloatField()
    iterations = serializers.IntegerField()
    converged = serializers.BooleanField()
    kkt_residual = serializers.FloatField()
    theta = _vector()
    grid_position = serializers.ListField(child=serializers.IntegerField(), allow_null=True)
    criterion = serializers.FloatField(allow_null=True)
    active = serializers.ListField(child=serializers.IntegerField())
    df = serializers.IntegerField()


class RunManifestSerializer(serializers.ModelSerializer):
    class Meta:
        model = RunManifest
        fields = [
            'id', 'command', 'config_digest', 'options', 'seed_ledger', 'software_version',
            'wall_clock_seconds', 'stage_timings', 'output_path', 'exit_code', 'created_at',
        ]


class FitReportSerializer(serializers.Serializer):
    estimator = serializers.CharField()
    target = serializers.CharField()
    p = serializers.IntegerField()
    det = serializers.CharField()
    T_eff = serializers.IntegerField()
    n_parameters = serializers.IntegerField()
    tune = serializers.CharField()
    coefficients = serializers.DictField(child=serializers.FloatField())
    deterministic = serializers.DictField(child=serializers.FloatField())
    active_levels = serializers.ListField(child=serializers.CharField())
    active_differences = serializers.ListField(child=serializers.CharField())
    lambda_I = serializers.FloatField()
    lambda_G = serializers.FloatField()
    criterion = serializers.FloatField(allow_null=True)
    kkt_residual = serializers.FloatField()
    converged = serializers.BooleanField()
    iterations = serializers.IntegerField()
    seed = serializers.IntegerField()
    metadata = serializers.JSONField()


class EvalReportSerializer(serializers.Serializer):
    estimators = serializers.ListField(child=serializers.CharField())
    baseline = serializers.CharField()
    scheme = serializers.CharField()
    window = serializers.IntegerField()
    n_origins = serializers.IntegerField()
    origins = serializers.ListField(child=serializers.IntegerField())
    actuals = _vector()
    nowcasts = serializers.DictField(child=_vector())
    errors = serializers.DictField(child=_vector())
    msne = serializers.DictField(child=serializers.FloatField())
    msne_ratio = serializers.DictField(child=serializers.FloatField(allow_null=True))
    dm = serializers.DictField(child=serializers.DictField(child=serializers.FloatField()), allow_empty=True)
    level_frequency = serializers.DictField(child=serializers.DictField(child=serializers.FloatField()))
    tune = serializers.CharField()
    tune_once = serializers.BooleanField()
    p = serializers.IntegerField()
    det = serializers.CharField()
    seed = serializers.IntegerField()
    metadata = serializers.JSONField()


class MetricsReportSerializer(serializers.Serializer):
    family = serializers.CharField()
    a = serializers.FloatField()
    T = serializers.IntegerField()
    n_reps = serializers.IntegerField()
    n_failed = serializers.IntegerField()
    seed = serializers.IntegerField()
    baseline = serializers.CharField()
    pseudo_power = serializers.DictField(child=serializers.FloatField(allow_null=True))
    pcs = serializers.DictField(child=serializers.FloatField(allow_null=True))
    pics = serializers.DictField(child=serializers.FloatField(allow_null=True))
    rmsne = serializers.DictField(child=serializers.FloatField(allow_null=True))
    seeds = serializers.ListField(child=serializers.IntegerField())
    failures = serializers.ListField(child=serializers.DictField())
    metadata = serializers.JSONField()


# Command options; flags and config-file values both arrive here as strings or None

DET_CHOICES = sorted(DETERMINISTIC_ALIASES)


class SolverOptionsSerializer(serializers.Serializer):
    k_delta = serializers.FloatField(required=False, allow_null=True, min_value=0.0)
    k_pi = serializers.FloatField(required=False, allow_null=True, min_value=0.0)
    lambda_ridge = serializers.CharField(required=False, allow_null=True)
    n_lambda_i = serializers.IntegerField(required=False, allow_null=True, min_value=2)
    n_lambda_g = serializers.IntegerField(required=False, allow_null=True, min_value=1)
    eps_ratio = serializers.FloatField(required=False, allow_null=True)
    max_iterations = serializers.IntegerField(required=False, allow_null=True, min_value=1)
    tolerance = serializers.FloatField(required=False, allow_null=True)
    standardize = OnOffField(required=False, allow_null=True)
    seed = serializers.IntegerField(default=0, min_value=0)
    jobs = serializers.IntegerField(default=1, min_value=1)

    def validate_lambda_ridge(self, value):
        if value is None or value == 'auto':
            return value
        try:
            number = float(value)
        except ValueError:
            raise serializers.ValidationError('Must be "auto" or a non-negative number.') from None
        if number < 0:
            raise serializers.ValidationError('Must be "auto" or a non-negative number.')
        return number


class FitOptionsSerializer(SolverOptionsSerializer):
    target = serializers.CharField(default='0')
    lags = serializers.IntegerField(default=1, min_value=0)
    det = serializers.ChoiceField(choices=DET_CHOICES, default='constant')
    tune = serializers.ChoiceField(choices=TuningRule.values, default=TuningRule.BIC)
    lambda_g = OnOffField(default=True)
    tscv_fraction = serializers.FloatField(default=2 / 3)
    tscv_scheme = serializers.ChoiceField(choices=WindowScheme.values, default=WindowScheme.EXPANDING)


class EvalOptionsSerializer(FitOptionsSerializer):
    window_fraction = serializers.FloatField(default=2 / 3)
    scheme = serializers.ChoiceField(choices=WindowScheme.values, default=WindowScheme.ROLLING)
    estimators = CommaSeparatedField(
        child=serializers.ChoiceField(choices=[EstimatorKind.SPECS1, EstimatorKind.SPECS2, EstimatorKind.ADL,
                                               EstimatorKind.ADL_ADF, EstimatorKind.OLS,
                                               EstimatorKind.SPECS1_OLS]),
        default=['specs1', 'specs2', 'adl', 'adl-adf'],
    )
    baseline = serializers.ChoiceField(choices=EstimatorKind.values, default=EstimatorKind.ADL)
    tune_once = OnOffField(default=False)

    def validate(self, attrs):
        if not 0 < attrs['window_fraction'] < 1:
            raise serializers.ValidationError({'window_fraction': 'Must lie in (0, 1).'})
        return attrs


class SimulateOptionsSerializer(SolverOptionsSerializer):
    family = serializers.CharField()
    a = serializers.FloatField(default=-0.5, min_value=-0.5, max_value=0.0)
    persistence = serializers.ChoiceField(choices=Persistence.values, default=Persistence.LOW)
    t = serializers.IntegerField(default=100, min_value=50)
    reps = serializers.IntegerField(default=100, min_value=1)
    lags = serializers.IntegerField(default=1, min_value=0)
    det = serializers.ChoiceField(choices=DET_CHOICES, default='constant_and_trend')
    estimators = CommaSeparatedField(
        child=serializers.ChoiceField(choices=EstimatorKind.values + [WALD, WALD_PS]), required=False,
    )
    # family-specific knobs, passed on as DgpSpec.extra
    burn_in = serializers.IntegerField(required=False, min_value=0)
    b_star = serializers.ChoiceField(choices=['kron', 'block'], required=False)
    n = serializers.IntegerField(required=False, min_value=2)
    dynamics = OnOffField(required=False)
    phi = serializers.FloatField(required=False)
    alpha2 = serializers.FloatField(required=False)
    beta2 = serializers.FloatField(required=False)
    a1 = serializers.FloatField(required=False)
    b1 = serializers.FloatField(required=False)

    EXTRA = {'burn_in': 'burn_in', 'b_star': 'b_star', 'n': 'N', 'dynamics': 'dynamics', 'phi': 'phi',
             'alpha2': 'alpha2', 'beta2': 'beta2', 'a1': 'a1', 'b1': 'b1'}

    def validate_family(self, value):
        if value not in DgpFamily.values:
            raise serializers.ValidationError(f"Unknown family; valid families: {', '.join(DgpFamily.values)}")
        return value

    def validate(self, attrs):
        attrs['extra'] = {self.EXTRA[key]: attrs.pop(key) for key in list(self.EXTRA) if key in attrs}
        return attrs
