"""Rolling-origin pseudo out-of-sample nowcast evaluation."""
import logging
import math

import numpy as np

from benchmarks.estimators import fit_estimator
from benchmarks.models import EstimatorKind
from benchmarks.statistics import dm_test
from core.exceptions import InputError, SpecsError
from core.parallel import effective_jobs, ordered_map
from design.models import DeterministicSpec
from simulation.metrics import nowcast_one
from tuning.models import WindowScheme

from .models import EvalReport

logger = logging.getLogger(__name__)

EVALUATED = (
    EstimatorKind.SPECS1, EstimatorKind.SPECS2, EstimatorKind.ADL, EstimatorKind.ADL_ADF, EstimatorKind.OLS,
    EstimatorKind.SPECS1_OLS,
)
MIN_WINDOW = 20
MIN_DM_ORIGINS = 10


def evaluation_window(T, p, fraction):
    """(window, n_origins) counted on the T - p - 1 usable regression rows."""
    if not 0 < fraction < 1:
        raise InputError('Window fraction must lie in (0, 1)', fraction=fraction)
    T_eff = T - p - 1
    window = math.ceil(fraction * T_eff - 1e-9)
    return window, T_eff - window


def _origin_nowcasts(task):
    panel, start, origin, p, det, estimators, options, penalties = task
    window_panel = panel.rows(start, origin + p + 1)
    extended = panel.rows(start, origin + p + 2)
    outcome = {}
    for name in estimators:
        try:
            design, solution = fit_estimator(name, window_panel, p, det, penalties=penalties.get(name), **options)
            level, _ = nowcast_one(design, solution, extended)
        except SpecsError as exc:
            raise exc.with_context(estimator=name, origin=origin)
        outcome[name] = {
            'nowcast': float(level),
            'levels': [int(i) for i in solution.active_delta],
            'penalties': (float(solution.lambda_I), float(solution.lambda_G)),
        }
    return outcome


def rolling_nowcasts(panel, estimators, p=1, det='constant', fraction=2 / 3, scheme=WindowScheme.ROLLING,
                     baseline=EstimatorKind.ADL, tune_once=False, jobs=1, seed=0, **fit_options):
    """Fit every estimator on a moving window and nowcast the observation after it.

    The first window covers ``ceil(fraction * (T - p - 1))`` regression rows; each
    origin then moves it forward by one. ``tune_once`` freezes each estimator's
    penalties at the values selected on the first window.
    """
    panel = panel.target_first()
    det = DeterministicSpec.parse(det)
    estimators = list(dict.fromkeys(str(name) for name in estimators))
    unknown = [name for name in estimators + [str(baseline)] if name not in EVALUATED]
    if unknown:
        raise InputError('Estimators cannot be evaluated out of sample', estimators=unknown,
                         valid=[str(name) for name in EVALUATED])
    if baseline not in estimators:
        estimators.append(str(baseline))
    if scheme not in WindowScheme.values:
        raise InputError('Unknown window scheme', scheme=scheme, valid=WindowScheme.values)

    window, n_origins = evaluation_window(panel.T, p, fraction)
    if window < MIN_WINDOW + det.n_columns or n_origins < 1:
        raise InputError('Evaluation window too small', window=window, origins=n_origins, T=panel.T, p=p)

    jobs = effective_jobs(jobs)
    inner = dict(fit_options, jobs=1 if jobs > 1 else fit_options.get('jobs', 1))
    origins = list(range(window, window + n_origins))

    def task(origin, penalties):
        start = origin - window if scheme == WindowScheme.ROLLING else 0
        return panel, start, origin, p, det, estimators, inner, penalties

    outcomes = []
    penalties = {}
    if tune_once:
        first = _origin_nowcasts(task(origins[0], {}))
        penalties = {name: first[name]['penalties'] for name in estimators}
        logger.info('Penalties frozen after the first window: %s', penalties)
        outcomes.append(first)
        origins_left = origins[1:]
    else:
        origins_left = origins
    outcomes += ordered_map(_origin_nowcasts, [task(origin, penalties) for origin in origins_left], jobs=jobs)

    rows = [origin + p + 1 for origin in origins]
    actuals = panel.values[rows, 0]
    nowcasts = {name: [outcome[name]['nowcast'] for outcome in outcomes] for name in estimators}
    errors = {name: (actuals - np.asarray(values)).tolist() for name, values in nowcasts.items()}
    msne = {name: float(np.mean(np.square(values))) for name, values in errors.items()}
    base = msne[str(baseline)]
    ratio = {name: (value / base if base > 0 else None) for name, value in msne.items()}

    dm = {}
    for name in estimators:
        if n_origins < MIN_DM_ORIGINS:
            dm[name] = None
            continue
        result = dm_test(errors[name], errors[str(baseline)])
        dm[name] = {'statistic': result.statistic, 'p_value': result.p_value}
    if n_origins < MIN_DM_ORIGINS:
        logger.warning('Only %d nowcast origins; Diebold-Mariano tests skipped', n_origins)

    level_labels = [f'L.{label}' for label in panel.labels]
    frequency = {}
    for name in estimators:
        counts = np.zeros(panel.N)
        for outcome in outcomes:
            counts[outcome[name]['levels']] += 1
        frequency[name] = dict(zip(level_labels, (counts / n_origins).tolist()))

    metadata = {}
    if panel.index is not None:
        metadata['origin_labels'] = [str(panel.index[row]) for row in rows]
    if tune_once:
        metadata['frozen_penalties'] = {name: list(pair) for name, pair in penalties.items()}
    logger.info('Evaluated %d nowcast origins for %s', n_origins, ', '.join(estimators))
    return EvalReport(
        estimators=estimators,
        baseline=str(baseline),
        scheme=str(scheme),
        window=window,
        n_origins=n_origins,
        origins=rows,
        actuals=actuals.tolist(),
        nowcasts=nowcasts,
        errors=errors,
        msne=msne,
        msne_ratio=ratio,
        dm=dm,
        level_frequency=frequency,
        tune=str(fit_options.get('tune', 'bic')),
        tune_once=tune_once,
        p=p,
        det=str(det.kind),
        seed=seed,
        metadata=metadata,
    )
