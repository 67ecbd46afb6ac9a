"""Ridge initializer and the adaptive weights built from it."""
import logging

import numpy as np
import scipy.linalg as sla

from core.exceptions import InputError, RankDeficiencyError

from .models import AdaptiveWeights, WeightSpec

logger = logging.getLogger(__name__)

# Cholesky pivots below this ratio (squared) mean the Gram matrix is numerically singular
GRAM_RCOND = 1e-14


def ridge_fit(design, lambda_R):
    """(V'MV + lambda_R I)^{-1} V'M dy through a Cholesky solve."""
    if lambda_R < 0:
        raise InputError('Ridge penalty must be non-negative', lambda_R=lambda_R)
    V, dy = design.V_proj, design.dy_proj
    K = V.shape[1]
    if lambda_R == 0 and K > design.T_eff - design.d:
        raise RankDeficiencyError(
            'Unpenalized initializer needs more observations than regressors',
            regressors=K, T_eff=design.T_eff, d=design.d,
        )
    gram = V.T @ V + lambda_R * np.eye(K)
    try:
        factor = sla.cho_factor(gram)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError('Ridge system is singular', lambda_R=lambda_R) from None
    pivots = np.abs(np.diag(factor[0])) ** 2
    if pivots.min() <= GRAM_RCOND * pivots.max():
        raise RankDeficiencyError('Ridge system is numerically singular', lambda_R=lambda_R)
    return sla.cho_solve(factor, V.T @ dy)


def resolve_ridge_penalty(design, lambda_ridge='auto'):
    """Numeric ridge penalty; ``auto`` means OLS when the design is at most half full."""
    if lambda_ridge != 'auto':
        return float(lambda_ridge)
    if design.n_parameters <= design.T_eff / 2:
        return 0.0
    return 1e-3 * float(np.sum(design.V_proj ** 2)) / design.n_coefficients


def compute_weights(init, k_delta, k_pi, N):
    """omega_i = |init_i|^{-k} with k_delta on the first N entries, k_pi after; zeros map to +inf."""
    if k_delta <= 0 or k_pi <= 0:
        raise InputError('Weight exponents must be positive', k_delta=k_delta, k_pi=k_pi)
    init = np.abs(np.asarray(init, dtype=float))
    exponents = np.full(init.shape, float(k_pi))
    exponents[:N] = k_delta
    with np.errstate(divide='ignore'):
        omega = np.where(init == 0, np.inf, init ** -exponents)
    return AdaptiveWeights(omega=omega, k_delta=k_delta, k_pi=k_pi)


def initial_weights(design, weight_spec=None):
    weight_spec = weight_spec or WeightSpec.from_settings()
    lambda_R = resolve_ridge_penalty(design, weight_spec.lambda_ridge)
    init = ridge_fit(design, lambda_R)
    logger.debug('Ridge initializer lambda_R=%g, %d exact zeros', lambda_R, int(np.sum(init == 0)))
    return compute_weights(init, weight_spec.k_delta, weight_spec.k_pi, design.N)
