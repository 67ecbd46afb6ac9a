"""Accelerated proximal gradient for

    ||dy_proj - V_proj gamma||^2 + lambda_I sum_i omega_i |gamma_i| + lambda_G ||delta||_2

where delta is the lagged-level block (the first N coefficients).

Each fit iterates on a working set: the nonzero coordinates of the start plus the
zero coordinates whose gradient violates the stationarity conditions. Coordinates
outside it are checked against those conditions after every inner solve and
enter the set when they fail them, so the reported solution is a solution of the
full problem.
"""
import logging

import numpy as np

from core.exceptions import InputError, NumericalError, SpecsError
from design.construction import recover_theta

from .grid import column_scale
from .models import SolverConfig, SpecsSolution

logger = logging.getLogger(__name__)

# |v| within this relative distance of its threshold maps to an exact zero
TIE_RTOL = 1e-12


def soft_threshold(v, threshold):
    magnitude = np.abs(v)
    return np.where(magnitude <= threshold * (1 + TIE_RTOL), 0.0, np.sign(v) * (magnitude - threshold))


def sparse_group_prox(v, thresholds, group_threshold, levels):
    """Soft-threshold every coordinate, then shrink the ``levels`` entries as a group."""
    u = soft_threshold(v, thresholds)
    norm = np.linalg.norm(u[levels])
    if norm > 0:
        if norm <= group_threshold * (1 + TIE_RTOL):
            u[levels] = 0.0
        else:
            u[levels] *= 1.0 - group_threshold / norm
    return u


def largest_eigenvalue(gram, iterations=50, tolerance=1e-6):
    """Power iteration from a fixed start vector."""
    K = gram.shape[0]
    if K == 0:
        return 0.0
    x = np.full(K, 1.0 / np.sqrt(K))
    estimate = 0.0
    for _ in range(iterations):
        y = gram @ x
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        x = y / norm
        previous, estimate = estimate, float(x @ gram @ x)
        if abs(estimate - previous) <= tolerance * abs(estimate):
            break
    return estimate


class PenalizedProblem:
    """Gram-form data for one design and weight vector, shared by every grid point."""

    def __init__(self, design, weights, config=None):
        if not design.is_projected:
            raise InputError('Design must be projected before fitting')
        if weights.omega.shape != (design.n_coefficients,):
            raise InputError(
                'Weight vector does not match the design',
                weights=weights.omega.shape[0], coefficients=design.n_coefficients,
            )
        self.design = design
        self.weights = weights
        self.config = config or SolverConfig.from_settings()
        self.N = design.N
        self.scale = column_scale(design, self.config.standardize)
        self.V = design.V_proj / self.scale
        self.dy = design.dy_proj
        self.gram = self.V.T @ self.V
        self.c = self.V.T @ self.dy
        self.yy = float(self.dy @ self.dy)
        self.free = weights.free
        self.omega = np.where(self.free, weights.omega, 0.0)
        self.level_mask = np.arange(design.n_coefficients) < self.N
        self.kkt_scale = 2 * float(np.max(np.abs(self.c))) if self.c.size else 0.0
        self._lipschitz = {}

    def rss(self, gamma):
        residual = self.dy - self.V @ gamma
        return float(residual @ residual)

    def penalty(self, gamma, lambda_I, lambda_G):
        return lambda_I * float(self.omega @ np.abs(gamma)) + lambda_G * float(np.linalg.norm(gamma[:self.N]))

    def objective(self, gamma, lambda_I, lambda_G):
        return self.rss(gamma) + self.penalty(gamma, lambda_I, lambda_G)

    def prox(self, v, step, lambda_I, lambda_G):
        u = sparse_group_prox(v, step * lambda_I * self.omega, step * lambda_G, self.level_mask)
        u[~self.free] = 0.0
        return u

    def gradient(self, gamma):
        return 2 * (self.gram @ gamma - self.c)

    def kkt_residual(self, gamma, lambda_I, lambda_G):
        """Largest violation of the stationarity conditions at ``gamma``."""
        g = -self.gradient(gamma)
        lam = lambda_I * self.omega
        free = self.free
        active = (gamma != 0) & free
        inactive = (gamma == 0) & free
        violation = np.zeros_like(gamma)
        violation[inactive] = np.maximum(np.abs(g[inactive]) - lam[inactive], 0.0)
        violation[active] = np.abs(g[active] - lam[active] * np.sign(gamma[active]))

        delta = gamma[:self.N]
        delta_norm = np.linalg.norm(delta)
        if delta_norm > 0:
            level_active = active[:self.N]
            group = lambda_G * delta[level_active] / delta_norm
            violation[:self.N][level_active] = np.abs(
                g[:self.N][level_active] - lam[:self.N][level_active] * np.sign(delta[level_active]) - group
            )
            block = 0.0
        else:
            shrunk = soft_threshold(g[:self.N], lam[:self.N])
            shrunk[~free[:self.N]] = 0.0
            block = max(float(np.linalg.norm(shrunk)) - lambda_G, 0.0)
            violation[:self.N] = 0.0
        return float(max(violation.max(initial=0.0), block))

    def entering(self, gamma, lambda_I, lambda_G, margin):
        """Zero coordinates whose gradient says they belong in the model."""
        g = np.abs(self.gradient(gamma))
        lam = lambda_I * self.omega
        violating = self.free & (gamma == 0) & (g > lam + margin)
        if not np.any(gamma[:self.N]):
            shrunk = soft_threshold(g[:self.N], lam[:self.N])
            shrunk[~self.free[:self.N]] = 0.0
            if np.linalg.norm(shrunk) <= lambda_G + margin:
                violating[:self.N] = False
            else:
                violating[:self.N] = shrunk != 0
        return violating

    def lipschitz(self, idx):
        key = idx.tobytes()
        if key not in self._lipschitz:
            eigenvalue = largest_eigenvalue(
                self.gram[np.ix_(idx, idx)], self.config.power_iterations, self.config.power_tolerance
            )
            self._lipschitz[key] = 2 * eigenvalue if eigenvalue > 0 else 1.0
        return self._lipschitz[key]

    def accelerated(self, idx, x, lambda_I, lambda_G, budget):
        """FISTA on the coordinates ``idx`` with every other coordinate held at zero.

        Stops when the objective decreases by less than ``tolerance`` relative to its
        value. Returns (x, iterations used, stopped on the decrease rule).
        """
        config = self.config
        G = self.gram[np.ix_(idx, idx)]
        c = self.c[idx]
        thresholds = lambda_I * self.omega[idx]
        levels = self.level_mask[idx]
        lipschitz = self.lipschitz(idx)

        def value(z, Gz):
            return (self.yy - 2 * float(c @ z) + float(z @ Gz)
                    + float(thresholds @ np.abs(z)) + lambda_G * float(np.linalg.norm(z[levels])))

        Gx = G @ x
        f_x = value(x, Gx)
        y, Gy, t = x, Gx, 1.0
        slack = 1e-12 * max(1.0, abs(f_x))
        for iteration in range(1, budget + 1):
            step = 1.0 / lipschitz
            x_new = sparse_group_prox(y - 2 * step * (Gy - c), step * thresholds, step * lambda_G, levels)
            if not np.all(np.isfinite(x_new)):
                raise NumericalError('Non-finite iterate', iteration=iteration)
            Gx_new = G @ x_new
            f_new = value(x_new, Gx_new)
            if f_new > f_x + slack:
                if config.acceleration and t > 1.0:
                    y, Gy, t = x, Gx, 1.0
                else:
                    lipschitz *= 2
                continue

            decrease = (f_x - f_new) / max(abs(f_x), np.finfo(float).tiny)
            if config.acceleration:
                # gradient-based adaptive restart
                if float((y - x_new) @ (x_new - x)) > 0:
                    t = 1.0
                t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                beta = (t - 1.0) / t_new
                y = x_new + beta * (x_new - x)
                Gy = Gx_new + beta * (Gx_new - Gx)
                t = t_new
            else:
                y, Gy = x_new, Gx_new
            x, Gx, f_x = x_new, Gx_new, f_new
            slack = 1e-12 * max(1.0, abs(f_x))
            if decrease < config.tolerance:
                return x, iteration, True
        return x, budget, False

    def solve(self, lambda_I, lambda_G, start=None):
        config = self.config
        K = self.gram.shape[0]
        x = np.zeros(K) if start is None else np.array(start, dtype=float) * self.scale
        x[~self.free] = 0.0
        margin = config.kkt_tolerance * self.kkt_scale

        kkt = self.kkt_residual(x, lambda_I, lambda_G)
        converged = kkt <= margin
        working = (x != 0) | self.entering(x, lambda_I, lambda_G, margin)
        iterations = 0
        while not converged and iterations < config.max_iterations:
            idx = np.flatnonzero(working)
            sub, used, _ = self.accelerated(idx, x[idx], lambda_I, lambda_G, config.max_iterations - iterations)
            iterations += used
            x = np.zeros(K)
            x[idx] = sub
            kkt = self.kkt_residual(x, lambda_I, lambda_G)
            converged = kkt <= margin
            working |= self.entering(x, lambda_I, lambda_G, margin)

        if not converged:
            logger.warning(
                'Solver stopped after %d iterations without converging '
                '(lambda_I=%g, lambda_G=%g, kkt=%g)', iterations, lambda_I, lambda_G, kkt,
            )
        return x / self.scale, self.objective(x, lambda_I, lambda_G), iterations, converged, kkt

    def fit(self, lambda_I, lambda_G, start=None, grid_position=None):
        if not (np.isfinite(lambda_I) and np.isfinite(lambda_G)) or lambda_I < 0 or lambda_G < 0:
            raise InputError('Penalties must be finite and non-negative', lambda_I=lambda_I, lambda_G=lambda_G)
        gamma, objective, iterations, converged, kkt = self.solve(lambda_I, lambda_G, start)
        return SpecsSolution(
            gamma=gamma,
            N=self.N,
            lambda_I=float(lambda_I),
            lambda_G=float(lambda_G),
            objective=objective,
            iterations=iterations,
            converged=converged,
            kkt_residual=kkt,
            theta=recover_theta(self.design, gamma),
            grid_position=grid_position,
        )


def specs_fit(design, weights, lambda_I, lambda_G, config=None, warm_start=None):
    """Minimize the sparse-group objective at one penalty pair.

    With ``config.standardize`` the problem is solved on unit-norm columns and
    ``objective``/``kkt_residual`` refer to that scaled problem.
    """
    return PenalizedProblem(design, weights, config).fit(lambda_I, lambda_G, start=warm_start)


def specs_path(design, weights, grid, config=None):
    """Solutions over the whole grid: outer loop lambda_G, inner loop lambda_I descending.

    Each lambda_I step starts from its predecessor's solution when warm starts are on.
    """
    problem = PenalizedProblem(design, weights, config)
    path = []
    start = None
    for i_G, i_I, lambda_I, lambda_G in grid.pairs():
        if i_I == 0 or not problem.config.warm_start:
            start = None
        try:
            solution = problem.fit(lambda_I, lambda_G, start=start, grid_position=(i_G, i_I))
        except SpecsError as exc:
            raise exc.with_context(lambda_I=lambda_I, lambda_G=lambda_G, grid_position=(i_G, i_I))
        path.append(solution)
        start = solution.gamma
    n_failed = sum(not solution.converged for solution in path)
    logger.info('Solved path of %d points (%d not converged)', len(path), n_failed)
    return path
