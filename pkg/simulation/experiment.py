"""Seeded Monte Carlo replications and their aggregation into a MetricsReport."""
import logging

import numpy as np

from benchmarks.estimators import fit_estimator
from benchmarks.models import EstimatorKind
from benchmarks.statistics import wald_test
from core.exceptions import InputError, NumericalError, SpecsError
from core.parallel import ordered_map
from design.construction import build_cecm_design
from design.models import DeterministicSpec
from solver.models import GridSpec, SolverConfig, WeightSpec

from .dgp import generate
from .metrics import nowcast_one, selection_metrics
from .models import WALD, WALD_PS, DgpFamily, DgpSpec, MetricsReport

logger = logging.getLogger(__name__)

# Estimators that can keep a lagged level, hence carry a pseudo-power
SELECTING = (EstimatorKind.SPECS1, EstimatorKind.SPECS2, EstimatorKind.ADL, EstimatorKind.SPECS1_OLS)

DEFAULT_ESTIMATORS = {
    DgpFamily.TABLE2_LOW_WE: ['specs1', 'specs2', 'adl', 'ols-oracle', WALD],
    DgpFamily.TABLE2_LOW_NOWE: ['specs1', 'specs2', 'adl', 'ols-oracle', WALD],
    DgpFamily.TABLE2_HIGH_WE: ['specs1', 'specs2', 'adl', 'ols-oracle', WALD_PS],
    DgpFamily.TABLE2_HIGH_NOWE: ['specs1', 'specs2', 'adl', 'ols-oracle', WALD_PS],
    DgpFamily.TABLE3_Y_I0: ['specs1', 'specs2', 'adl', 'adl-adf', 'ols-oracle'],
    DgpFamily.TABLE3_Y_I1: ['specs1', 'specs2', 'adl', 'adl-adf', 'ols-oracle'],
    DgpFamily.NONSPARSE_VECM: ['specs1', 'specs2', 'adl', 'ols-oracle', WALD],
    DgpFamily.FACTOR_MODEL: ['specs1', 'specs1-ols', 'specs2', 'adl'],
}


def baseline_for(spec):
    return EstimatorKind.OLS_ORACLE if spec.has_truth else EstimatorKind.ADL


def resolve_estimators(spec, estimators=None):
    """Requested estimators in a stable order, with the RMSNE baseline always present."""
    names = list(estimators or DEFAULT_ESTIMATORS[spec.family])
    valid = EstimatorKind.values + [WALD, WALD_PS]
    unknown = [name for name in names if name not in valid]
    if unknown:
        raise InputError('Unknown estimators', estimators=unknown, valid=valid)
    if not spec.has_truth and EstimatorKind.OLS_ORACLE in names:
        raise InputError('The factor model has no oracle support')
    baseline = baseline_for(spec)
    if baseline not in names:
        names.append(baseline)
    if WALD_PS in names and EstimatorKind.SPECS1 not in names:
        names.append(EstimatorKind.SPECS1)
    return [str(name) for name in dict.fromkeys(names)]


def replicate(spec, estimators, seed, p=1, det='constant_and_trend', grid_spec=None, weight_spec=None,
              solver_config=None, wald_seed=0):
    """Simulate T observations, fit on the first T - 1 and nowcast the last one."""
    panel, truth = generate(spec, seed, p=p)
    window = panel.rows(0, panel.T - 1)
    actual = panel.values[-1, 0]
    outcome = {'seed': seed, 'errors': {}, 'has_levels': {}, 'pcs': {}, 'pics': {}, 'rejects': {}}
    solutions = {}
    for name in estimators:
        if name in (WALD, WALD_PS):
            continue
        design, solution = fit_estimator(
            name, window, p, det, grid_spec=grid_spec, weight_spec=weight_spec, config=solver_config, truth=truth,
        )
        solutions[name] = solution
        level, _ = nowcast_one(design, solution, panel)
        outcome['errors'][name] = float(actual - level)
        if name in SELECTING:
            outcome['has_levels'][name] = solution.has_levels
        if truth is not None and name != EstimatorKind.ADL_ADF:
            outcome['pcs'][name], outcome['pics'][name] = selection_metrics(solution, truth)
    if WALD in estimators or WALD_PS in estimators:
        design = build_cecm_design(window, p, det)
        if WALD in estimators:
            outcome['rejects'][WALD] = wald_test(design, seed=wald_seed).reject
        if WALD_PS in estimators:
            subset = solutions[EstimatorKind.SPECS1].active
            outcome['rejects'][WALD_PS] = wald_test(design, subset=subset, seed=wald_seed).reject
    return outcome


def _replicate_task(task):
    replication, seed, spec, estimators, options = task
    try:
        return replicate(spec, estimators, seed, **options)
    except SpecsError as exc:
        return {'seed': seed, 'replication': replication, 'failed': True, 'error': str(exc)}


def _mean(values):
    values = [value for value in values if value is not None]
    return float(np.mean(values)) if values else None


def aggregate(spec, estimators, outcomes, base_seed):
    failures = [outcome for outcome in outcomes if outcome.get('failed')]
    succeeded = [outcome for outcome in outcomes if not outcome.get('failed')]
    for failure in failures:
        logger.warning('Replication %d (seed %d) excluded: %s',
                       failure['replication'], failure['seed'], failure['error'])
    if not succeeded:
        raise NumericalError('Every replication failed', n_reps=len(outcomes), first_error=failures[0]['error'])

    baseline = baseline_for(spec)
    nowcasters = [name for name in estimators if name not in (WALD, WALD_PS)]
    msne = {name: float(np.mean([o['errors'][name] ** 2 for o in succeeded])) for name in nowcasters}
    base = msne[baseline]
    rmsne = {name: float(np.sqrt(value / base)) if base > 0 else None for name, value in msne.items()}

    power = {name: _mean([o['has_levels'][name] for o in succeeded])
             for name in nowcasters if name in SELECTING}
    for name in (WALD, WALD_PS):
        if name in estimators:
            power[name] = _mean([o['rejects'][name] for o in succeeded])

    pcs, pics = {}, {}
    if spec.has_truth:
        for name in nowcasters:
            if name != EstimatorKind.ADL_ADF:
                pcs[name] = _mean([o['pcs'][name] for o in succeeded])
                pics[name] = _mean([o['pics'][name] for o in succeeded])

    metadata = {'estimators': estimators}
    if spec.family == DgpFamily.FACTOR_MODEL:
        metadata['factor_dynamics'] = 'A1 = a1 I and B1 = b1 I (diagonal default)'
    return MetricsReport(
        family=str(spec.family),
        a=spec.a,
        T=spec.T,
        n_reps=len(outcomes),
        seed=base_seed,
        baseline=str(baseline),
        pseudo_power=power,
        pcs=pcs,
        pics=pics,
        rmsne=rmsne,
        n_failed=len(failures),
        seeds=[outcome['seed'] for outcome in outcomes],
        failures=[{k: failure[k] for k in ('replication', 'seed', 'error')} for failure in failures],
        metadata=metadata,
    )


def run_monte_carlo(spec, estimators=None, n_reps=100, base_seed=0, jobs=1, p=1, det='constant_and_trend',
                    grid_spec=None, weight_spec=None, solver_config=None):
    """Replication r uses seed base_seed + r; the report does not depend on ``jobs``."""
    if not isinstance(spec, DgpSpec):
        raise InputError('Monte Carlo needs a DgpSpec')
    if n_reps < 1:
        raise InputError('n_reps must be at least 1', n_reps=n_reps)
    estimators = resolve_estimators(spec, estimators)
    options = {
        'p': p,
        'det': DeterministicSpec.parse(det),
        'grid_spec': grid_spec or GridSpec.from_settings(),
        'weight_spec': weight_spec or WeightSpec.from_settings(),
        'solver_config': solver_config or SolverConfig.from_settings(),
        'wald_seed': base_seed,
    }
    tasks = [(r, base_seed + r, spec, estimators, options) for r in range(n_reps)]
    logger.info('Running %d replications of %s (a=%g, T=%d) with %s',
                n_reps, spec.family, spec.a, spec.T, ', '.join(estimators))
    outcomes = ordered_map(_replicate_task, tasks, jobs=jobs)
    report = aggregate(spec, estimators, outcomes, base_seed)
    logger.info('Finished %s: %d of %d replications succeeded', spec.family, report.n_succeeded, n_reps)
    return report
