import numpy as np

from benchmarks.estimators import adf_transform
from benchmarks.models import EstimatorKind
from core.exceptions import InputError
from design.construction import next_regressors, predict_difference


def selection_metrics(solution, truth):
    """(PCS, PICS) over the whole coefficient vector; None where the denominator is empty."""
    selected = solution.gamma != 0
    relevant = np.abs(truth.gamma) >= 1e-12
    if selected.shape != relevant.shape:
        raise InputError('Solution and truth have different lengths', solution=selected.size, truth=relevant.size)
    n_relevant = int(relevant.sum())
    n_irrelevant = relevant.size - n_relevant
    pcs = float(np.sum(selected & relevant) / n_relevant) if n_relevant else None
    pics = float(np.sum(selected & ~relevant) / n_irrelevant) if n_irrelevant else None
    return pcs, pics


def pseudo_power(solutions):
    """Share of fits that keep at least one lagged level."""
    if not solutions:
        raise InputError('pseudo_power needs at least one solution')
    return float(np.mean([solution.has_levels for solution in solutions]))


def nowcast_one(design, solution, panel):
    """(level, difference) nowcast of y_T from a fit on observations up to T - 1.

    ``panel`` must hold exactly one more observation than the data behind ``design``
    so that dx_T is available.
    """
    panel = panel.target_first()
    expected = design.T_eff + design.p + 2
    if panel.T != expected:
        raise InputError('Panel must extend the fitted sample by one observation', T=panel.T, expected=expected)
    previous = panel.values[-2, 0]
    if solution.metadata.get('estimator') == EstimatorKind.ADL_ADF:
        differenced = solution.metadata['differenced']
        transformed = adf_transform(panel, differenced)
        forecast = predict_difference(design, solution.gamma, solution.theta, next_regressors(transformed, design.p))
        if differenced[0]:
            return previous + forecast, forecast
        return forecast, forecast - previous
    forecast = predict_difference(design, solution.gamma, solution.theta, next_regressors(panel, design.p))
    return previous + forecast, forecast
