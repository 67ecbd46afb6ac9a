import numpy as np

from core.exceptions import InputError

from .models import PenaltyGrid


def column_scale(design, standardize=False):
    """Column norms used to standardize V_proj (ones when standardization is off)."""
    K = design.n_coefficients
    if not standardize:
        return np.ones(K)
    norms = np.linalg.norm(design.V_proj, axis=0)
    return np.where(norms > 0, norms, 1.0)


def lambda_max_I(design, weights, standardize=False):
    """Smallest lambda_I at which the zero vector is optimal with lambda_G = 0."""
    free = weights.free
    if not np.any(free):
        raise InputError('All weights are infinite; nothing can enter the model')
    scores = np.abs(design.V_proj.T @ design.dy_proj) / column_scale(design, standardize)
    return float(2 * np.max(scores[free] / weights.omega[free]))


def build_grid(design, weights, n_I=100, n_G=10, eps_ratio=1e-4, standardize=False):
    """Log-spaced lambda_I from lambda_max_I down to eps_ratio * lambda_max_I, and
    lambda_G = {0} plus n_G - 1 log-spaced values from 1e-3 g to g with
    g = 2 ||Z' dy_proj||_2 over the level block.
    """
    if n_I < 2:
        raise InputError('Grid needs at least two lambda_I values', n_I=n_I)
    if n_G < 1:
        raise InputError('Grid needs at least one lambda_G value', n_G=n_G)
    top = lambda_max_I(design, weights, standardize)
    if top <= 0:
        raise InputError('Response is orthogonal to every free regressor')
    lambda_I = np.geomspace(top, eps_ratio * top, n_I)
    lambda_I[0] = top
    scale = column_scale(design, standardize)[design.levels]
    g = 2 * float(np.linalg.norm(design.V_proj[:, design.levels].T @ design.dy_proj / scale))
    if n_G == 1 or g == 0:
        lambda_G = np.zeros(1)
    else:
        lambda_G = np.concatenate([[0.0], np.geomspace(1e-3 * g, g, n_G - 1)])
    return PenaltyGrid(lambda_I=lambda_I, lambda_G=lambda_G)


def grid_from_spec(design, weights, grid_spec, standardize=False):
    return build_grid(design, weights, grid_spec.n_I, grid_spec.n_G, grid_spec.eps_ratio, standardize)
