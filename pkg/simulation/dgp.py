"""Data-generating processes of the simulation studies."""
import logging

import numpy as np
import scipy.linalg as sla

from core.exceptions import ExplosiveProcessError, InputError, NumericalError
from design.coefficients import implied_single_equation
from design.models import TimeSeriesPanel, VecmParams

from .models import DgpFamily, Persistence

logger = logging.getLogger(__name__)

TOEPLITZ_RHO = 0.8
SHORT_RUN = 0.4
EXPLOSIVE_TOLERANCE = 1e-6
CHANG_RETRIES = 20

# (1, -1, -1, -1, -1)
IOTA_TILDE = np.array([1.0, -1.0, -1.0, -1.0, -1.0])


def toeplitz_covariance(N, rho=TOEPLITZ_RHO):
    return sla.toeplitz(rho ** np.arange(N))


def polar_factor(U):
    """H = U (U'U)^{-1/2}, an orthogonal matrix when U is square and nonsingular."""
    values, vectors = np.linalg.eigh(U.T @ U)
    if values.min() <= 1e-10 * values.max():
        raise NumericalError('U is numerically rank deficient', smallest=float(values.min()))
    return U @ (vectors * values ** -0.5) @ vectors.T


def chang_covariance(N, seed=None):
    """Sigma = H diag(lambda) H' with H the polar factor of a uniform U and eigenvalues
    0.01, Uniform(0.1, 1) ..., 1.
    """
    if N < 2:
        raise InputError('Covariance needs N >= 2', N=N)
    rng = np.random.default_rng(seed)
    for _ in range(CHANG_RETRIES):
        try:
            H = polar_factor(rng.uniform(size=(N, N)))
            break
        except NumericalError:
            logger.debug('Redrawing U for an N=%d covariance', N)
    else:
        raise NumericalError('Could not draw a well-conditioned U', N=N, attempts=CHANG_RETRIES)
    eigenvalues = np.concatenate([[0.01], rng.uniform(0.1, 1.0, size=N - 2), [1.0]])
    Sigma = (H * eigenvalues) @ H.T
    return (Sigma + Sigma.T) / 2


def block_cointegration(n_blocks):
    """I_k kron iota_tilde: k disjoint five-variable cointegrating relations."""
    return np.kron(np.eye(n_blocks), IOTA_TILDE[:, None])


def _b_star(spec):
    variant = spec.extra.get('b_star', 'kron')
    if variant == 'kron':
        return np.kron(np.ones((3, 3)), IOTA_TILDE[:, None])
    if variant == 'block':
        return block_cointegration(3)
    raise InputError('b_star must be kron or block', b_star=variant)


def _persistence_draw(spec, rng, size=None):
    if spec.persistence == Persistence.HIGH:
        return rng.uniform(0.0, 0.2, size=size)
    return np.ones(size) if size is not None else 1.0


def _sparse_design(spec, high, weakly_exogenous):
    N = 50 if high else 10
    n_relations = 1 if weakly_exogenous else (3 if high else 2)
    B = np.zeros((N, n_relations))
    B[:5 * n_relations] = block_cointegration(n_relations)
    if weakly_exogenous:
        A = np.zeros((N, 1))
        A[0, 0] = spec.a
    else:
        A = spec.a * B
    return A, B, toeplitz_covariance(N)


def _mixed_order_design(spec, rng, y_integrated):
    B_star = _b_star(spec)
    N = 50
    if y_integrated:
        n_stationary = 25
        A = np.zeros((N, 3 + n_stationary))
        B = np.zeros((N, 3 + n_stationary))
        A[:15, :3] = spec.a * B_star
        B[:15, :3] = B_star
        offset = 25
    else:
        n_stationary = 24
        A = np.zeros((N, 4 + n_stationary))
        B = np.zeros((N, 4 + n_stationary))
        A[0, 0] = 1.0
        B[0, 0] = -_persistence_draw(spec, rng)
        A[1:16, 1:4] = spec.a * B_star
        B[1:16, 1:4] = B_star
        offset = 26
    rows = np.arange(offset, N)
    columns = np.arange(A.shape[1] - n_stationary, A.shape[1])
    A[rows, columns] = 1.0
    B[rows, columns] = -_persistence_draw(spec, rng, size=n_stationary)
    return A, B, toeplitz_covariance(N)


def vecm_params(spec, rng):
    """VECM parameters of a family; random parts (persistence, Chang Sigma) come from ``rng``."""
    family = spec.family
    if family in (DgpFamily.TABLE2_LOW_WE, DgpFamily.TABLE2_LOW_NOWE,
                  DgpFamily.TABLE2_HIGH_WE, DgpFamily.TABLE2_HIGH_NOWE):
        high = family in (DgpFamily.TABLE2_HIGH_WE, DgpFamily.TABLE2_HIGH_NOWE)
        weakly_exogenous = family in (DgpFamily.TABLE2_LOW_WE, DgpFamily.TABLE2_HIGH_WE)
        A, B, Sigma = _sparse_design(spec, high, weakly_exogenous)
    elif family in (DgpFamily.TABLE3_Y_I0, DgpFamily.TABLE3_Y_I1):
        A, B, Sigma = _mixed_order_design(spec, rng, y_integrated=family == DgpFamily.TABLE3_Y_I1)
    elif family == DgpFamily.NONSPARSE_VECM:
        B = block_cointegration(3)
        A = spec.a * B
        Sigma = chang_covariance(15, rng)
    else:
        raise InputError('Family is not a VECM', family=family)
    N = Sigma.shape[0]
    return VecmParams(A=A, B=B, Phi=[SHORT_RUN * np.eye(N)], Sigma_eps=Sigma)


def companion_matrix(vecm):
    """Companion form of the levels VAR implied by the VECM."""
    N = vecm.N
    Phi = vecm.Phi
    p = len(Phi)
    levels = [np.eye(N) + vecm.Pi + (Phi[0] if p else 0)]
    for j in range(1, p):
        levels.append(Phi[j] - Phi[j - 1])
    if p:
        levels.append(-Phi[-1])
    order = len(levels)
    companion = np.zeros((N * order, N * order))
    companion[:N] = np.hstack(levels)
    companion[N:, :-N] = np.eye(N * (order - 1))
    return companion


def check_stability(vecm):
    radius = float(np.max(np.abs(np.linalg.eigvals(companion_matrix(vecm)))))
    if radius > 1 + EXPLOSIVE_TOLERANCE:
        raise ExplosiveProcessError('Simulated VECM is explosive', spectral_radius=radius)
    return radius


def simulate_vecm(vecm, T, rng, burn_in=200):
    """Levels z_s = mu + tau s + zeta_s, zeta from the VECM recursion started at zero."""
    N = vecm.N
    Phi = vecm.Phi
    p = len(Phi)
    total = burn_in + T
    chol = np.linalg.cholesky(vecm.Sigma_eps)
    eps = rng.standard_normal((total, N)) @ chol.T
    zeta = np.zeros((total + p + 1, N))
    dzeta = np.zeros((total + p + 1, N))
    for t in range(p + 1, total + p + 1):
        step = vecm.Pi @ zeta[t - 1] + eps[t - p - 1]
        for j in range(p):
            step += Phi[j] @ dzeta[t - 1 - j]
        dzeta[t] = step
        zeta[t] = zeta[t - 1] + step
    zeta = zeta[-T:]
    return vecm.mu + np.outer(np.arange(T), vecm.tau) + zeta


def gen_vecm(spec, seed, p=1):
    """Simulated panel and the true single-equation coefficients for a VECM family."""
    rng = np.random.default_rng(seed)
    vecm = vecm_params(spec, rng)
    radius = check_stability(vecm)
    logger.debug('%s companion spectral radius %.6f', spec.family, radius)
    values = simulate_vecm(vecm, spec.T, rng, burn_in=spec.burn_in)
    if not np.all(np.isfinite(values)):
        raise NumericalError('Simulated levels are not finite', family=spec.family)
    truth = implied_single_equation(vecm, max(p, len(vecm.Phi)))
    return TimeSeriesPanel(values=values), truth


def _arma_noise(innovations, ar, ma):
    """x_t = ar x_{t-1} + e_t + ma e_{t-1} with elementwise or matrix coefficients."""
    x = np.zeros_like(innovations)
    previous_x = np.zeros(innovations.shape[1:])
    previous_e = np.zeros(innovations.shape[1:])
    for t, e in enumerate(innovations):
        x[t] = ar @ previous_x + e + ma @ previous_e
        previous_x, previous_e = x[t], e
    return x


def gen_factor(spec, seed):
    """z_t = lambda f_t + omega_t with an ARIMA factor and AR(1) idiosyncratic parts."""
    if spec.family != DgpFamily.FACTOR_MODEL:
        raise InputError('gen_factor needs the factor_model family', family=spec.family)
    rng = np.random.default_rng(seed)
    extra = spec.extra
    N = int(extra.get('N', 50))
    dynamics = str(extra.get('dynamics', False)).lower() in ('1', 'true', 'yes', 'on')
    default = 0.4 if dynamics else 0.0
    phi = float(extra.get('phi', 1.0))
    alpha2 = float(extra.get('alpha2', default))
    beta2 = float(extra.get('beta2', default))
    A1 = float(extra.get('a1', default)) * np.eye(N)
    B1 = float(extra.get('b1', default)) * np.eye(N)

    loadings = rng.uniform(0.5, 1.5, size=N)
    theta = rng.uniform(0.2, 0.8, size=N)
    Sigma = chang_covariance(N, rng)
    total = spec.burn_in + spec.T

    eps1 = rng.standard_normal((total, N)) @ np.linalg.cholesky(Sigma).T
    eps2 = rng.standard_normal((total, 1))
    v = _arma_noise(eps1, A1, B1)
    zeta = _arma_noise(eps2, np.array([[alpha2]]), np.array([[beta2]]))[:, 0]
    omega = np.zeros((total, N))
    factor = np.zeros(total)
    for t in range(total):
        omega[t] = (theta * omega[t - 1] if t else 0.0) + v[t]
        factor[t] = (phi * factor[t - 1] if t else 0.0) + zeta[t]
    values = np.outer(factor, loadings) + omega
    return TimeSeriesPanel(values=values[-spec.T:])


def generate(spec, seed, p=1):
    """(panel, truth) for any family; truth is None for the factor model."""
    if spec.family == DgpFamily.FACTOR_MODEL:
        return gen_factor(spec, seed), None
    return gen_vecm(spec, seed, p=p)
