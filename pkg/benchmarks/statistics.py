"""Unit-root, cointegration and forecast-comparison statistics."""
import logging

import numpy as np
from django.conf import settings
from django.core.cache import cache
from scipy.stats import norm
from statsmodels.tsa.stattools import adfuller

from core.exceptions import InputError
from core.linalg import qr_least_squares, residualize
from core.parallel import ordered_map
from design.construction import assemble_design
from design.models import DeterministicSpec

from .models import AdfResult, DmResult, WaldResult

logger = logging.getLogger(__name__)

# Reported when the loss differential is a nonzero constant
DM_SENTINEL = 1e12


def schwert_max_lags(n):
    return int(np.floor(12 * (n / 100) ** 0.25))


def is_degenerate(series):
    series = np.asarray(series, dtype=float)
    return bool(np.ptp(series) == 0 or np.ptp(np.diff(series)) == 0)


def adf_test(series, max_lags=None, det=None):
    """ADF regression with BIC lag choice and MacKinnon 5% critical values."""
    series = np.asarray(series, dtype=float)
    det = DeterministicSpec.parse(det or 'constant')
    n = series.shape[0]
    max_lags = schwert_max_lags(n) if max_lags is None else int(max_lags)
    if n <= max_lags + 10:
        raise InputError('Series too short for the ADF regression', length=n, max_lags=max_lags)
    if is_degenerate(series):
        raise InputError('Degenerate series (zero variance) in ADF test', length=n)
    statistic, _, lags_used, _, critical_values, _ = adfuller(
        series, maxlag=max_lags, regression=det.adf_regression, autolag='BIC'
    )
    critical_value = float(critical_values['5%'])
    return AdfResult(
        statistic=float(statistic),
        lags_used=int(lags_used),
        max_lags=max_lags,
        critical_value=critical_value,
        reject_unit_root=bool(statistic < critical_value),
    )


def wald_coint_stat(design, subset=None):
    """Wald statistic for joint exclusion of the lagged levels.

    OLS on the columns in ``subset`` (all by default); the levels tested are
    the level columns inside the subset. Without any, the statistic is 0.
    """
    subset = np.arange(design.n_coefficients) if subset is None else np.unique(np.asarray(subset, dtype=int))
    levels = subset[subset < design.N]
    if levels.size == 0:
        return 0.0
    rest = subset[subset >= design.N]
    dof = design.T_eff - subset.size - design.d
    if dof <= 0:
        raise InputError('Wald regression has no residual degrees of freedom', columns=subset.size, T_eff=design.T_eff)
    X = design.V_proj[:, subset]
    coef = qr_least_squares(X, design.dy_proj, what='Wald regressors')
    residual = design.dy_proj - X @ coef
    sigma2 = float(residual @ residual) / dof
    delta = coef[:levels.size]
    Z_rest = residualize(design.V_proj[:, rest], design.V_proj[:, levels], what='short-run regressors')
    quadratic = Z_rest @ delta
    return float(quadratic @ quadratic / sigma2)


def _null_statistics(task):
    seeds, T_eff, n_levels, det, p = task
    values = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        Z = np.cumsum(rng.standard_normal((T_eff + p + 1, n_levels)), axis=0)
        values.append(wald_coint_stat(assemble_design(Z, p, det)))
    return values


def simulate_wald_null(T_eff, n_levels, det, n_draws, seed, p=0, jobs=1):
    seeds = np.random.SeedSequence(seed).spawn(n_draws)
    chunk = max(1, n_draws // (4 * max(1, jobs)))
    tasks = [(seeds[i:i + chunk], T_eff, n_levels, det, p) for i in range(0, n_draws, chunk)]
    return np.concatenate([np.asarray(part) for part in ordered_map(_null_statistics, tasks, jobs=jobs)])


def wald_critical_value(T_eff, n_levels, det, n_draws=None, seed=0, p=0, jobs=1):
    """95th percentile of the Wald statistic over random-walk panels of matching size."""
    det = DeterministicSpec.parse(det)
    n_draws = n_draws or settings.SPECS_WALD_DRAWS
    if n_draws < 1000:
        raise InputError('At least 1000 null draws are required', n_draws=n_draws)
    key = f'wald-cv:{T_eff}:{n_levels}:{det.kind}:{p}:{n_draws}:{seed}'
    value = cache.get(key)
    if value is None:
        draws = simulate_wald_null(T_eff, n_levels, det, n_draws, seed, p=p, jobs=jobs)
        value = float(np.quantile(draws, 0.95))
        cache.set(key, value)
        logger.info('Simulated Wald critical value %.3f (T_eff=%d, levels=%d, %s)', value, T_eff, n_levels, det.kind)
    return value


def wald_test(design, subset=None, n_draws=None, seed=0, jobs=1):
    n_draws = n_draws or settings.SPECS_WALD_DRAWS
    subset_levels = design.N if subset is None else int(np.sum(np.asarray(subset) < design.N))
    statistic = wald_coint_stat(design, subset)
    if subset_levels == 0:
        return WaldResult(statistic=0.0, critical_value=np.inf, null_draws=0)
    critical_value = wald_critical_value(design.T_eff, subset_levels, design.det, n_draws, seed, p=design.p, jobs=jobs)
    return WaldResult(statistic=statistic, critical_value=critical_value, null_draws=n_draws)


def dm_test(errors_a, errors_b):
    """Diebold-Mariano test for equal squared-error loss at horizon one."""
    errors_a = np.asarray(errors_a, dtype=float)
    errors_b = np.asarray(errors_b, dtype=float)
    if errors_a.shape != errors_b.shape or errors_a.ndim != 1:
        raise InputError('Error series must be vectors of equal length', a=errors_a.shape, b=errors_b.shape)
    n = errors_a.shape[0]
    if n < 10:
        raise InputError('Diebold-Mariano test needs at least 10 errors', n=n)
    d = errors_a ** 2 - errors_b ** 2
    mean = float(d.mean())
    if np.all(d == d[0]):
        if mean == 0:
            return DmResult(statistic=0.0, p_value=1.0)
        return DmResult(statistic=float(np.sign(mean) * DM_SENTINEL), p_value=0.0)
    gamma0 = float(np.mean((d - mean) ** 2))
    statistic = mean / np.sqrt(gamma0 / n)
    return DmResult(statistic=float(statistic), p_value=float(2 * norm.sf(abs(statistic))))
