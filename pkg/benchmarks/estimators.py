"""Comparator estimators and a single entry point that fits any of them on a panel."""
import logging
from dataclasses import replace

import numpy as np

from core.exceptions import InputError
from core.linalg import qr_least_squares
from design.construction import build_cecm_design, recover_theta
from design.models import DeterministicSpec, TimeSeriesPanel
from solver.grid import grid_from_spec
from solver.models import GridSpec, PenaltyGrid, SolverConfig, SpecsSolution, WeightSpec
from solver.proximal import specs_fit, specs_path
from tuning.selection import bic_select, tscv_select, window_weights

from .models import EstimatorKind, TuningRule
from .statistics import adf_test, is_degenerate

logger = logging.getLogger(__name__)


def ols_fit(design, subset=None):
    """QR least squares of dy_proj on V_proj[:, subset]; zeros outside the subset."""
    K = design.n_coefficients
    subset = np.arange(K) if subset is None else np.unique(np.asarray(subset, dtype=int))
    if subset.size and (subset.min() < 0 or subset.max() >= K):
        raise InputError('Subset index out of range', coefficients=K)
    if subset.size + design.d >= design.T_eff:
        raise InputError(
            'OLS needs more observations than parameters',
            columns=subset.size, d=design.d, T_eff=design.T_eff,
        )
    gamma = np.zeros(K)
    if subset.size:
        gamma[subset] = qr_least_squares(design.V_proj[:, subset], design.dy_proj, what='OLS regressors')
    return gamma


def ols_solution(design, subset=None, estimator=EstimatorKind.OLS):
    gamma = ols_fit(design, subset)
    residual = design.dy_proj - design.V_proj @ gamma
    return SpecsSolution(
        gamma=gamma,
        N=design.N,
        lambda_I=0.0,
        lambda_G=0.0,
        objective=float(residual @ residual),
        iterations=0,
        converged=True,
        theta=recover_theta(design, gamma),
        metadata={'estimator': str(estimator)},
    )


def adl_grid(grid):
    """The individual-penalty part of a grid: lambda_G is always zero for ADL fits."""
    if isinstance(grid, PenaltyGrid):
        return PenaltyGrid(lambda_I=grid.lambda_I, lambda_G=[0.0])
    return (grid or GridSpec.from_settings()).individual_only()


def adl_fit(design, weights, grid=None, config=None):
    """SPECS with every lagged level pinned at zero and no group penalty, BIC-selected."""
    config = config or SolverConfig.from_settings()
    weights = weights.with_excluded(np.arange(design.N))
    grid = adl_grid(grid)
    if isinstance(grid, GridSpec):
        grid = grid_from_spec(design, weights, grid, config.standardize)
    selected = bic_select(specs_path(design, weights, grid, config), design)
    return replace(selected, metadata={**selected.metadata, 'estimator': str(EstimatorKind.ADL)})


def adf_decisions(panel, det='constant', max_lags=None):
    """Per-series (differenced, statistic) from an ADF test in target-first order."""
    panel = panel.target_first()
    differenced, statistics = [], []
    for column, label in zip(panel.values.T, panel.labels):
        if is_degenerate(column):
            logger.warning('Series %s is degenerate; differencing it without an ADF test', label)
            differenced.append(True)
            statistics.append(None)
            continue
        result = adf_test(column, max_lags=max_lags, det=det)
        differenced.append(not result.reject_unit_root)
        statistics.append(result.statistic)
    return differenced, statistics


def adf_transform(panel, differenced):
    """Panel whose first differences are u_t: dz_t for differenced series, z_t otherwise.

    The ADL regression of the CECM design on this panel is the ADL on the mixed
    levels/differences data; its lagged-level block is never used.
    """
    panel = panel.target_first()
    Z = panel.values
    keep = ~np.asarray(differenced, dtype=bool)
    u = np.diff(Z, axis=0)
    u[:, keep] = Z[1:, keep]
    values = np.vstack([np.zeros((1, panel.N)), np.cumsum(u, axis=0)])
    return TimeSeriesPanel(values=values, labels=panel.labels, index=panel.index)


def adl_adf_fit(panel, p, det, weight_spec=None, grid_spec=None, config=None, adf_det='constant',
                tune=TuningRule.BIC, tscv=None, jobs=1, penalties=None):
    """ADF pre-test every series, then fit the penalized ADL on the transformed panel.

    ``metadata`` records the per-series decisions so that a nowcast can rebuild the
    same transformation on later data.
    """
    differenced, statistics = adf_decisions(panel, adf_det)
    transformed = adf_transform(panel, differenced)
    _, solution = fit_penalized(
        transformed, p, det, adl_grid(grid_spec), weight_spec, config,
        tune=tune, tscv=tscv, jobs=jobs, exclude_levels=True, penalties=penalties,
    )
    metadata = {
        'estimator': str(EstimatorKind.ADL_ADF),
        'differenced': differenced,
        'adf_statistics': statistics,
    }
    logger.debug('ADF pre-test differenced %d of %d series', sum(differenced), len(differenced))
    return replace(solution, metadata=metadata)


def fit_penalized(panel, p, det, grid_spec, weight_spec=None, config=None, tune=TuningRule.BIC,
                  tscv=None, jobs=1, exclude_levels=False, penalties=None):
    """Tuned SPECS fit on a panel; ``penalties`` freezes the (lambda_I, lambda_G) pair."""
    config = config or SolverConfig.from_settings()
    weight_spec = weight_spec or WeightSpec.from_settings()
    design = build_cecm_design(panel, p, det)
    weights = window_weights(design, weight_spec, exclude_levels)
    if penalties is not None:
        lambda_I, lambda_G = penalties
        return design, specs_fit(design, weights, lambda_I, lambda_G, config)
    if tune == TuningRule.TSCV:
        result = tscv_select(
            panel, p, det, grid_spec=grid_spec, solver_config=config, tscv=tscv,
            weight_spec=weight_spec, jobs=jobs, exclude_levels=exclude_levels,
        )
        solution = specs_fit(design, weights, result.lambda_I, result.lambda_G, config)
        return design, replace(solution, criterion=result.mspe, grid_position=result.grid_position)
    if tune != TuningRule.BIC:
        raise InputError('Unknown tuning rule', tune=tune, valid=TuningRule.values)
    grid = grid_spec
    if isinstance(grid, GridSpec):
        grid = grid_from_spec(design, weights, grid, config.standardize)
    return design, bic_select(specs_path(design, weights, grid, config), design)


def fit_estimator(kind, panel, p, det, grid_spec=None, weight_spec=None, config=None, tune=TuningRule.BIC,
                  tscv=None, jobs=1, penalties=None, truth=None):
    """Fit one named estimator on a panel and return (design, solution).

    SPECS1 and ADL use the individual-penalty column of the grid, SPECS2 the whole
    grid. The OLS oracle needs ``truth`` (an ImpliedSingleEq) for its support.
    """
    det = DeterministicSpec.parse(det)
    grid_spec = grid_spec or GridSpec.from_settings()
    if kind not in EstimatorKind.values:
        raise InputError('Unknown estimator', estimator=kind, valid=EstimatorKind.values)

    if kind in (EstimatorKind.OLS, EstimatorKind.OLS_ORACLE):
        design = build_cecm_design(panel, p, det)
        subset = None
        if kind == EstimatorKind.OLS_ORACLE:
            if truth is None:
                raise InputError('The OLS oracle needs the true coefficients')
            subset = truth.support
        return design, ols_solution(design, subset, estimator=kind)

    if kind == EstimatorKind.ADL_ADF:
        solution = adl_adf_fit(
            panel, p, det, weight_spec, grid_spec, config, tune=tune, tscv=tscv, jobs=jobs, penalties=penalties,
        )
        design = build_cecm_design(adf_transform(panel, solution.metadata['differenced']), p, det)
        return design, solution

    if kind == EstimatorKind.SPECS1_OLS:
        design, selected = fit_estimator(
            EstimatorKind.SPECS1, panel, p, det, grid_spec, weight_spec, config, tune=tune, tscv=tscv, jobs=jobs,
            penalties=penalties,
        )
        refit = ols_solution(design, selected.active, estimator=kind)
        # penalties stay those of the selecting fit so frozen tuning reuses them
        return design, replace(
            refit, lambda_I=selected.lambda_I, lambda_G=selected.lambda_G, grid_position=selected.grid_position,
            metadata={**selected.metadata, 'estimator': str(kind)},
        )

    exclude_levels = kind == EstimatorKind.ADL
    grid = grid_spec if kind == EstimatorKind.SPECS2 else adl_grid(grid_spec)
    design, solution = fit_penalized(
        panel, p, det, grid, weight_spec, config, tune=tune, tscv=tscv, jobs=jobs,
        exclude_levels=exclude_levels, penalties=penalties,
    )
    return design, replace(solution, metadata={**solution.metadata, 'estimator': str(kind)})
