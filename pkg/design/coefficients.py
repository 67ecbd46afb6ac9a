import numpy as np
import scipy.linalg as sla

from core.exceptions import InputError

from .models import ImpliedSingleEq


def implied_single_equation(vecm, p):
    """Single-equation coefficients implied by a VECM for the first series.

    pi0 = Sigma_22^{-1} sigma_21, delta = B A'(1, -pi0')', pi_j = Phi_j'(1, -pi0')'.
    With z_t = mu + tau t + zeta_t the constant is -delta'mu + c'(I - sum Phi_j) tau
    and the coefficient on (t - 1) is -delta'tau.
    """
    N = vecm.N
    if len(vecm.Phi) > p:
        raise InputError('VECM has more lags than the single equation', vecm_lags=len(vecm.Phi), p=p)
    Sigma = vecm.Sigma_eps
    try:
        pi0 = sla.cho_solve(sla.cho_factor(Sigma[1:, 1:]), Sigma[1:, 0])
    except np.linalg.LinAlgError:
        raise InputError('Sigma_22 is singular') from None
    c = np.concatenate([[1.0], -pi0])
    delta = vecm.Pi.T @ c
    Phi = list(vecm.Phi) + [np.zeros((N, N))] * (p - len(vecm.Phi))
    pi = np.concatenate([pi0] + [phi.T @ c for phi in Phi])
    tau_star = (np.eye(N) - sum(Phi, np.zeros((N, N)))) @ vecm.tau
    mu0 = float(-delta @ vecm.mu + c @ tau_star)
    tau0 = float(-delta @ vecm.tau)
    return ImpliedSingleEq(pi0=pi0, delta=delta, pi=pi, mu0=mu0, tau0=tau0)
