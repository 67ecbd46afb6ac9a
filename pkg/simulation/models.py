"""Experiment descriptions and aggregated Monte Carlo results."""
from dataclasses import dataclass, field

from django.conf import settings
from django.db import models
from django.utils.translation import gettext_lazy as _

from core.exceptions import InputError


class DgpFamily(models.TextChoices):
    TABLE2_LOW_WE = 'table2_low_we', _('Low dimension, weak exogeneity')
    TABLE2_LOW_NOWE = 'table2_low_nowe', _('Low dimension, no weak exogeneity')
    TABLE2_HIGH_WE = 'table2_high_we', _('High dimension, weak exogeneity')
    TABLE2_HIGH_NOWE = 'table2_high_nowe', _('High dimension, no weak exogeneity')
    TABLE3_Y_I0 = 'table3_y_i0', _('Mixed orders, stationary target')
    TABLE3_Y_I1 = 'table3_y_i1', _('Mixed orders, integrated target')
    NONSPARSE_VECM = 'nonsparse_vecm', _('Non-sparse VECM')
    FACTOR_MODEL = 'factor_model', _('Non-stationary factor model')


class Persistence(models.TextChoices):
    LOW = 'low', _('Low persistence')
    HIGH = 'high', _('High persistence')


# Tests reported next to the estimators; they produce rejections, not nowcasts
WALD = 'wald'
WALD_PS = 'wald-ps'


@dataclass(frozen=True)
class DgpSpec:
    """One simulation design.

    ``extra`` holds family-specific knobs: ``b_star`` (kron/block) for the mixed-order
    designs, ``phi``, ``alpha2``, ``beta2``, ``dynamics`` and ``N`` for the factor
    model, and ``burn_in`` for every family.
    """
    family: str
    a: float = -0.5
    persistence: str = Persistence.LOW
    T: int = 100
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in DgpFamily.values:
            raise InputError('Unknown DGP family', family=self.family, valid=DgpFamily.values)
        if not -0.5 <= self.a <= 0:
            raise InputError('Adjustment multiplier must lie in [-0.5, 0]', a=self.a)
        if self.T < 50:
            raise InputError('Simulated samples need T >= 50', T=self.T)
        if self.persistence not in Persistence.values:
            raise InputError('Unknown persistence level', persistence=self.persistence)

    @property
    def burn_in(self):
        return int(self.extra.get('burn_in', settings.SPECS_BURN_IN))

    @property
    def has_truth(self):
        return self.family != DgpFamily.FACTOR_MODEL


@dataclass(frozen=True)
class MetricsReport:
    """Per-estimator aggregates; rates are None where a metric does not apply."""
    family: str
    a: float
    T: int
    n_reps: int
    seed: int
    baseline: str
    pseudo_power: dict
    pcs: dict
    pics: dict
    rmsne: dict
    n_failed: int = 0
    seeds: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def n_succeeded(self):
        return self.n_reps - self.n_failed
