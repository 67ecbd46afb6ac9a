from dataclasses import dataclass
from typing import NamedTuple

from django.db import models
from django.utils.translation import gettext_lazy as _


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    lags_used: int
    max_lags: int
    critical_value: float
    reject_unit_root: bool


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    critical_value: float
    null_draws: int

    @property
    def reject(self):
        return self.statistic > self.critical_value


class DmResult(NamedTuple):
    statistic: float
    p_value: float


class EstimatorKind(models.TextChoices):
    SPECS1 = 'specs1', _('SPECS, individual penalty only')
    SPECS2 = 'specs2', _('SPECS, individual and group penalty')
    ADL = 'adl', _('Penalized ADL in differences')
    ADL_ADF = 'adl-adf', _('Penalized ADL after ADF pre-testing')
    OLS = 'ols', _('OLS on every regressor')
    OLS_ORACLE = 'ols-oracle', _('OLS on the true active set')
    SPECS1_OLS = 'specs1-ols', _('OLS refit on the SPECS1 active set')


class TuningRule(models.TextChoices):
    BIC = 'bic', _('Bayesian information criterion')
    TSCV = 'tscv', _('Time-series cross-validation')
