"""Rotation of the retained regressors into stationary and stochastic-trend parts,
and the scaled sample covariance built from it. Used as test oracles.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from core.exceptions import InputError, RankDeficiencyError
from core.linalg import numerical_rank, orthonormal_complement


def l1_normalized_complement(B_basis):
    B_perp = orthonormal_complement(B_basis)
    if B_perp.shape[1] == 0:
        return B_perp
    return B_perp / np.abs(B_perp).sum(axis=0)


def q_transform(design, S_delta, S_pi, B_basis):
    """Return [Z_S B, W_S, Z_S B_perp] on the projected design.

    ``B_basis`` spans the cointegrating space of the retained levels
    (|S_delta| x r). Columns of B_perp have unit l1 norm.
    """
    S_delta = np.asarray(S_delta, dtype=int)
    S_pi = np.asarray(S_pi, dtype=int)
    B_basis = np.asarray(B_basis, dtype=float)
    if B_basis.ndim == 1:
        B_basis = B_basis[:, None]
    if B_basis.shape[0] != len(S_delta):
        raise InputError('Basis needs one row per retained level', rows=B_basis.shape[0], levels=len(S_delta))
    if design.V_proj is None:
        raise InputError('Design has not been projected')
    if np.any(S_delta >= design.N) or np.any(S_pi >= design.M):
        raise InputError('Index set out of range', N=design.N, M=design.M)
    r = B_basis.shape[1]
    if r > 0:
        R = sla.qr(B_basis, mode='r')[0]
        if numerical_rank(R) < r:
            raise RankDeficiencyError('Cointegrating basis is rank deficient', columns=r)
    Z = design.V_proj[:, design.levels][:, S_delta]
    W = design.V_proj[:, design.differences][:, S_pi]
    B_perp = l1_normalized_complement(B_basis)
    return np.hstack([Z @ B_basis, W, Z @ B_perp])


@dataclass(frozen=True)
class ScaledCovariance:
    matrix: np.ndarray
    s_pi: int
    s_delta: int

    @property
    def sigma_11(self):
        return self.matrix[:self.s_pi, :self.s_pi]

    @property
    def sigma_12(self):
        return self.matrix[:self.s_pi, self.s_pi:]

    @property
    def sigma_22(self):
        return self.matrix[self.s_pi:, self.s_pi:]

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix).min())


def scaled_covariance(rotated, s_delta, s_pi, T):
    """S_T^{-1} (rotated' rotated) S_T^{-1} with S_T = diag(sqrt(T) I_{s_pi}, T/sqrt(s_delta) I_{s_delta}).

    The first ``s_pi`` columns of ``rotated`` are the stationary ones, the last
    ``s_delta`` the integrated ones. ``rotated`` must already be projected.
    """
    rotated = np.asarray(rotated, dtype=float)
    if rotated.ndim != 2 or rotated.shape[1] != s_pi + s_delta:
        raise InputError(
            'Rotated matrix does not match the block sizes',
            columns=rotated.shape[-1], s_pi=s_pi, s_delta=s_delta,
        )
    scale = np.concatenate([
        np.full(s_pi, np.sqrt(T)),
        np.full(s_delta, T / np.sqrt(s_delta) if s_delta else 1.0),
    ])
    scaled = rotated / scale
    return ScaledCovariance(matrix=scaled.T @ scaled, s_pi=s_pi, s_delta=s_delta)
