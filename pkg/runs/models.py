from dataclasses import dataclass, field

from django.db import models
from django.utils.translation import gettext_lazy as _

from core.models import BaseModel


class CommandName(models.TextChoices):
    FIT = 'specs_fit', _('Fit')
    NOWCAST_EVAL = 'specs_nowcast_eval', _('Rolling nowcast evaluation')
    SIMULATE = 'specs_simulate', _('Monte Carlo simulation')


class RunManifest(BaseModel):
    """Provenance of one command invocation; every output document embeds or references one."""
    command = models.CharField(max_length=40, choices=CommandName.choices)
    config_digest = models.CharField(max_length=64, db_index=True)
    options = models.JSONField(default=dict)
    seed_ledger = models.JSONField(default=dict)
    software_version = models.CharField(max_length=20)
    wall_clock_seconds = models.FloatField(default=0.0)
    stage_timings = models.JSONField(default=dict)
    output_path = models.CharField(max_length=500, blank=True)
    exit_code = models.PositiveSmallIntegerField(default=0)

    class Meta:
        ordering = ['-created_at']
        verbose_name = 'Run Manifest'
        verbose_name_plural = 'Run Manifests'

    def __str__(self):
        return f"{self.command} {self.config_digest[:12]}"


@dataclass(frozen=True)
class FitReport:
    """A tuned fit with every coefficient labelled."""
    estimator: str
    target: str
    p: int
    det: str
    T_eff: int
    n_parameters: int
    tune: str
    coefficients: dict
    deterministic: dict
    active_levels: list
    active_differences: list
    lambda_I: float
    lambda_G: float
    criterion: float
    kkt_residual: float
    converged: bool
    iterations: int
    seed: int
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvalReport:
    """Pseudo out-of-sample nowcasts from a moving window, compared against a baseline."""
    estimators: list
    baseline: str
    scheme: str
    window: int
    n_origins: int
    origins: list
    actuals: list
    nowcasts: dict
    errors: dict
    msne: dict
    msne_ratio: dict
    dm: dict
    level_frequency: dict
    tune: str
    tune_once: bool
    p: int
    det: str
    seed: int
    metadata: dict = field(default_factory=dict)
