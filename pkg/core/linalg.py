"""Dense least-squares helpers shared by the design, tuning and benchmark apps.

Everything goes through pivoted QR; explicit inverses are never formed.
"""
import numpy as np
import scipy.linalg as sla

from .exceptions import RankDeficiencyError

# R's lm.fit rule: a column is dropped when |R_ii| <= 1e-7 * max |R_jj|
RANK_RTOL = 1e-7


def numerical_rank(R):
    diag = np.abs(np.diag(R))
    if diag.size == 0:
        return 0
    return int(np.sum(diag > RANK_RTOL * diag.max()))


def qr_least_squares(X, y, what='regressor matrix'):
    """Least squares coefficients of ``y`` on the columns of ``X``.

    Raises RankDeficiencyError when ``X`` does not have full column rank.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n_cols = X.shape[1]
    if n_cols == 0:
        return np.zeros((0,) + y.shape[1:])
    if n_cols > X.shape[0]:
        raise RankDeficiencyError(
            f'{what} has more columns than rows', rows=X.shape[0], columns=n_cols
        )
    Q, R, P = sla.qr(X, mode='economic', pivoting=True)
    rank = numerical_rank(R)
    if rank < n_cols:
        raise RankDeficiencyError(f'{what} is rank deficient', rank=rank, columns=n_cols)
    coef = np.empty((n_cols,) + y.shape[1:])
    coef[P] = sla.solve_triangular(R, Q.T @ y)
    return coef


def residualize(D, X, what='deterministic block'):
    """Return ``X - D (D'D)^{-1} D'X`` (works for vectors and matrices).

    An empty ``D`` leaves ``X`` untouched.
    """
    X = np.asarray(X, dtype=float)
    if D is None or D.shape[1] == 0:
        return X.copy()
    Q, R = sla.qr(D, mode='economic')
    if numerical_rank(R) < D.shape[1]:
        raise RankDeficiencyError(f'{what} is rank deficient', columns=D.shape[1])
    return X - Q @ (Q.T @ X)


def orthonormal_complement(B):
    """Orthonormal basis of the orthogonal complement of the column space of ``B``."""
    B = np.asarray(B, dtype=float)
    if B.shape[1] == 0:
        return np.eye(B.shape[0])
    return sla.null_space(B.T)
