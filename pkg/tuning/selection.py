"""Penalty selection by information criterion or by time-series cross-validation."""
import logging
from dataclasses import replace

import numpy as np

from core.exceptions import InputError, SpecsError
from core.parallel import ordered_map
from design.construction import build_cecm_design, next_regressors, predict_difference
from design.models import DeterministicSpec
from solver.grid import grid_from_spec
from solver.initialization import initial_weights
from solver.models import GridSpec, PenaltyGrid, SolverConfig, WeightSpec
from solver.proximal import specs_path

from .models import TscvConfig, TscvResult

logger = logging.getLogger(__name__)


def bic_score(solution, design):
    """ln(RSS/T_eff) + ln(T_eff) * df / T_eff on the projected fit; df counts nonzero coefficients."""
    T = design.T_eff
    residual = design.dy_proj - design.V_proj @ solution.gamma
    rss = float(residual @ residual)
    if rss <= 0:
        return -np.inf
    return float(np.log(rss / T) + np.log(T) * solution.df / T)


def bic_select(path, design):
    """Lowest BIC on the path; ties go to the larger lambda_I, then the larger lambda_G."""
    if not path:
        raise InputError('Cannot select from an empty path')
    scored = [(bic_score(solution, design), solution) for solution in path]
    score, best = min(scored, key=lambda item: (item[0], -item[1].lambda_I, -item[1].lambda_G))
    logger.debug('BIC selected lambda_I=%g lambda_G=%g (df=%d)', best.lambda_I, best.lambda_G, best.df)
    return replace(best, criterion=score)


def window_weights(design, weight_spec, exclude_levels=False):
    weights = initial_weights(design, weight_spec)
    if exclude_levels:
        weights = weights.with_excluded(np.arange(design.N))
    return weights


def fit_window(panel, p, det, grid, solver_config, weight_spec, exclude_levels=False):
    """Path fitted on one window, with weights and (for a GridSpec) the grid rebuilt on it."""
    design = build_cecm_design(panel, p, det)
    weights = window_weights(design, weight_spec, exclude_levels)
    if isinstance(grid, GridSpec):
        grid = grid_from_spec(design, weights, grid, solver_config.standardize)
    return design, grid, specs_path(design, weights, grid, solver_config)


def _split_errors(task):
    panel, split, start, p, det, grid, solver_config, weight_spec, exclude_levels = task
    window = panel.rows(start, split)
    try:
        design, fitted_grid, path = fit_window(window, p, det, grid, solver_config, weight_spec, exclude_levels)
    except SpecsError as exc:
        raise exc.with_context(split=split)
    regressors = next_regressors(panel.rows(start, split + 1), p)
    realized = panel.values[split, 0] - panel.values[split - 1, 0]
    errors = np.empty(fitted_grid.shape)
    for solution in path:
        forecast = predict_difference(design, solution.gamma, solution.theta, regressors)
        errors[solution.grid_position] = realized - forecast
    return errors


def tscv_select(panel, p, det, grid_spec=None, solver_config=None, tscv=None, weight_spec=None, jobs=1,
                exclude_levels=False):
    """Pick the penalty pair with the smallest mean squared one-step nowcast error.

    ``grid_spec`` is either a GridSpec (grid rebuilt inside every window, candidates
    are grid positions mapped back to the full-sample grid) or a fixed PenaltyGrid.
    ``exclude_levels`` pins the lagged levels at zero in every window (ADL fits).
    """
    det = DeterministicSpec.parse(det)
    grid_spec = grid_spec or GridSpec.from_settings()
    solver_config = solver_config or SolverConfig.from_settings()
    tscv = tscv or TscvConfig()
    weight_spec = weight_spec or WeightSpec.from_settings()
    panel = panel.target_first()

    T = panel.T
    initial = tscv.initial_window(T)
    n_parameters = panel.N * (p + 2) - 1 + det.n_columns
    if initial < n_parameters + 5 or initial >= T:
        raise InputError(
            'Initial cross-validation window is too small',
            window=initial, required=n_parameters + 5, T=T,
        )

    tasks = []
    for split in range(initial, T):
        start, stop = tscv.window(split, T)
        tasks.append((panel, stop, start, p, det, grid_spec, solver_config, weight_spec, exclude_levels))
    errors = np.stack(ordered_map(_split_errors, tasks, jobs=jobs))
    scores = np.mean(errors ** 2, axis=0)

    # rows are lambda_G ascending, columns lambda_I descending
    n_G, n_I = scores.shape
    candidates = [(scores[i_G, i_I], i_I, -i_G) for i_G in range(n_G) for i_I in range(n_I)]
    mspe, i_I, neg_i_G = min(candidates)
    position = (-neg_i_G, i_I)

    if isinstance(grid_spec, PenaltyGrid):
        grid = grid_spec
    else:
        design = build_cecm_design(panel, p, det)
        weights = window_weights(design, weight_spec, exclude_levels)
        grid = grid_from_spec(design, weights, grid_spec, solver_config.standardize)
    result = TscvResult(
        lambda_I=float(grid.lambda_I[position[1]]),
        lambda_G=float(grid.lambda_G[position[0]]),
        mspe=float(mspe),
        grid_position=position,
        n_splits=len(tasks),
        scores=scores,
        errors=errors,
    )
    logger.info('TSCV over %d splits selected lambda_I=%g lambda_G=%g (MSPE %g)',
                result.n_splits, result.lambda_I, result.lambda_G, result.mspe)
    return result
