"""Assemble the single-equation error-correction regression from level data."""
import logging
from dataclasses import replace

import numpy as np

from core.exceptions import InputError
from core.linalg import qr_least_squares, residualize

from .models import CecmDesign, DeterministicSpec

logger = logging.getLogger(__name__)


def regressor_labels(labels, p):
    N = len(labels)
    names = [f'L.{label}' for label in labels]
    names += [f'D.{label}' for label in labels[1:]]
    for j in range(1, p + 1):
        names += [f'L{j}D.{label}' for label in labels]
    assert len(names) == N * (p + 2) - 1
    return names


def lagged_block(Z, p, n_rows):
    """Rows ``t = 0 .. n_rows-1`` of [z_{t+p}, dx_{t+p+1}, dz_{t+p}, ..., dz_{t+1}]."""
    dZ = np.diff(Z, axis=0)
    blocks = [Z[p:p + n_rows], dZ[p:p + n_rows, 1:]]
    for j in range(1, p + 1):
        blocks.append(dZ[p - j:p - j + n_rows])
    return np.hstack(blocks)


def build_cecm_design(panel, p, det):
    """Build (dy, V, D) from a panel and return the design with projected copies.

    Row ``t`` of the design explains dy_{t+p+1}; the trend column carries t + p so
    that it lines up with the (t - 1) convention of the conditional model.
    """
    panel = panel.target_first()
    return assemble_design(panel.values, p, det, panel.labels)


def assemble_design(Z, p, det, labels=None):
    """Same as build_cecm_design on a bare T x N level matrix (N = 1 allowed)."""
    det = DeterministicSpec.parse(det)
    if p < 0:
        raise InputError('Lag order must be non-negative', p=p)
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise InputError('Levels contain non-finite values')
    T, N = Z.shape
    d = det.n_columns
    if T <= p + 1 + d:
        raise InputError('Not enough observations for the requested design', T=T, p=p, d=d)
    n_rows = T - p - 1
    labels = labels or [f'z{i}' for i in range(N)]
    design = CecmDesign(
        dy=Z[p + 1:, 0] - Z[p:-1, 0],
        V=lagged_block(Z, p, n_rows),
        D=det.matrix(n_rows, trend_start=p),
        p=p,
        N=N,
        det=det,
        column_labels=regressor_labels(labels, p),
        row_offset=p + 1,
    )
    logger.debug('Built CECM design T_eff=%d N=%d M=%d d=%d', n_rows, N, design.M, d)
    return project_out(design)


def project_out(design):
    """Annihilate the deterministic block from the response and the regressors.

    Always projects the raw ``dy``/``V``, so applying it twice changes nothing.
    """
    return replace(
        design,
        dy_proj=residualize(design.D, design.dy),
        V_proj=residualize(design.D, design.V),
    )


def recover_theta(design, gamma):
    """Deterministic coefficients given the stochastic ones: (D'D)^{-1} D'(dy - V gamma)."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (design.n_coefficients,):
        raise InputError(
            'Coefficient vector has the wrong length',
            expected=design.n_coefficients, got=gamma.shape[0] if gamma.ndim else 0,
        )
    if design.d == 0:
        return np.zeros(0)
    return qr_least_squares(design.D, design.dy - design.V @ gamma, what='deterministic block')


def next_regressors(panel, p):
    """Regressor row for the last panel observation, [z_{T-1}, dx_T, dz_{T-1}, ..., dz_{T-p}]."""
    panel = panel.target_first()
    Z = panel.values
    if Z.shape[0] < p + 2:
        raise InputError('Not enough history for the nowcast regressors', T=Z.shape[0], p=p)
    return lagged_block(Z[-(p + 2):], p, 1)[0]


def deterministic_row(design):
    """Deterministic regressors for the observation right after the design's last row."""
    return design.det.matrix(1, trend_start=design.T_eff + design.p)[0]


def predict_difference(design, gamma, theta, regressors):
    """One-step fitted dy for a regressor row that follows the design sample."""
    return float(np.asarray(regressors) @ gamma + deterministic_row(design) @ theta)
