"""Value types for the penalized error-correction solver."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from django.conf import settings

from core.exceptions import InputError


@dataclass(frozen=True)
class AdaptiveWeights:
    """Per-coefficient l1 multipliers; +inf marks a coefficient pinned at zero."""
    omega: np.ndarray
    k_delta: float = 2.0
    k_pi: float = 1.0

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float)
        if omega.ndim != 1 or np.any(np.isnan(omega)) or np.any(omega < 0):
            raise InputError('Weights must be a vector of non-negative values')
        omega.setflags(write=False)
        object.__setattr__(self, 'omega', omega)

    @property
    def excluded(self):
        return np.flatnonzero(np.isinf(self.omega))

    @property
    def free(self):
        return np.isfinite(self.omega)

    def with_excluded(self, indices):
        omega = self.omega.copy()
        omega[np.asarray(indices, dtype=int)] = np.inf
        return AdaptiveWeights(omega=omega, k_delta=self.k_delta, k_pi=self.k_pi)

    def scaled(self, factor):
        return AdaptiveWeights(omega=self.omega * factor, k_delta=self.k_delta, k_pi=self.k_pi)


@dataclass(frozen=True)
class WeightSpec:
    """How adaptive weights are built: ridge initializer plus exponents."""
    k_delta: float = 2.0
    k_pi: float = 1.0
    lambda_ridge: object = 'auto'

    def __post_init__(self):
        if self.k_delta <= 0 or self.k_pi <= 0:
            raise InputError('Weight exponents must be positive', k_delta=self.k_delta, k_pi=self.k_pi)
        if self.lambda_ridge != 'auto' and float(self.lambda_ridge) < 0:
            raise InputError('Ridge penalty must be non-negative', lambda_ridge=self.lambda_ridge)

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            'k_delta': settings.SPECS_K_DELTA,
            'k_pi': settings.SPECS_K_PI,
            'lambda_ridge': settings.SPECS_LAMBDA_RIDGE,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        if values['lambda_ridge'] != 'auto':
            values['lambda_ridge'] = float(values['lambda_ridge'])
        return cls(**values)


@dataclass(frozen=True)
class PenaltyGrid:
    lambda_I: np.ndarray
    lambda_G: np.ndarray

    def __post_init__(self):
        lambda_I = np.atleast_1d(np.asarray(self.lambda_I, dtype=float))
        lambda_G = np.atleast_1d(np.asarray(self.lambda_G, dtype=float))
        if lambda_I.size == 0 or lambda_G.size == 0:
            raise InputError('Penalty grid is empty')
        if not (np.all(np.isfinite(lambda_I)) and np.all(np.isfinite(lambda_G))):
            raise InputError('Penalty grid values must be finite')
        if np.any(lambda_I < 0) or np.any(lambda_G < 0):
            raise InputError('Penalty grid values must be non-negative')
        if np.any(np.diff(lambda_I) >= 0):
            raise InputError('lambda_I must be strictly decreasing')
        if np.any(np.diff(lambda_G) <= 0):
            raise InputError('lambda_G must be strictly increasing')
        object.__setattr__(self, 'lambda_I', lambda_I)
        object.__setattr__(self, 'lambda_G', lambda_G)

    @property
    def shape(self):
        return (self.lambda_G.size, self.lambda_I.size)

    def pairs(self):
        """(i_G, i_I, lambda_I, lambda_G) in path order: outer lambda_G, inner lambda_I."""
        for i_G, lambda_G in enumerate(self.lambda_G):
            for i_I, lambda_I in enumerate(self.lambda_I):
                yield i_G, i_I, float(lambda_I), float(lambda_G)


@dataclass(frozen=True)
class GridSpec:
    """Recipe for a data-driven grid; rebuilt whenever the design changes."""
    n_I: int = 100
    n_G: int = 10
    eps_ratio: float = 1e-4

    def __post_init__(self):
        if self.n_I < 2 or self.n_G < 1:
            raise InputError('Grid needs n_I >= 2 and n_G >= 1', n_I=self.n_I, n_G=self.n_G)
        if not 0 < self.eps_ratio < 1:
            raise InputError('eps_ratio must lie in (0, 1)', eps_ratio=self.eps_ratio)

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            'n_I': settings.SPECS_N_LAMBDA_I,
            'n_G': settings.SPECS_N_LAMBDA_G,
            'eps_ratio': settings.SPECS_EPS_RATIO,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def individual_only(self):
        return GridSpec(n_I=self.n_I, n_G=1, eps_ratio=self.eps_ratio)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 10000
    tolerance: float = 1e-8
    kkt_tolerance: float = 1e-7
    power_iterations: int = 50
    power_tolerance: float = 1e-6
    acceleration: bool = True
    warm_start: bool = True
    standardize: bool = False

    def __post_init__(self):
        if self.tolerance <= 0 or self.kkt_tolerance <= 0:
            raise InputError('Tolerances must be positive', tolerance=self.tolerance)
        if self.max_iterations < 1:
            raise InputError('max_iterations must be positive', max_iterations=self.max_iterations)

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            'max_iterations': settings.SPECS_MAX_ITERATIONS,
            'tolerance': settings.SPECS_TOLERANCE,
            'kkt_tolerance': settings.SPECS_KKT_TOLERANCE,
            'power_iterations': settings.SPECS_POWER_ITERATIONS,
            'power_tolerance': settings.SPECS_POWER_TOLERANCE,
            'acceleration': settings.SPECS_ACCELERATION,
            'standardize': settings.SPECS_STANDARDIZE,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass(frozen=True)
class SpecsSolution:
    """One fitted point of the penalty grid.

    ``criterion`` holds the selection score once a selector has looked at it and
    ``metadata`` carries estimator-specific notes (ADF decisions and the like).
    """
    gamma: np.ndarray
    N: int
    lambda_I: float
    lambda_G: float
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float = 0.0
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grid_position: Optional[tuple] = None
    criterion: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    @property
    def delta(self):
        return self.gamma[:self.N]

    @property
    def pi(self):
        return self.gamma[self.N:]

    @property
    def active_delta(self):
        return np.flatnonzero(self.delta)

    @property
    def active_pi(self):
        return np.flatnonzero(self.pi)

    @property
    def active(self):
        return np.flatnonzero(self.gamma)

    @property
    def df(self):
        return int(np.count_nonzero(self.gamma))

    @property
    def has_levels(self):
        return bool(np.any(self.delta != 0))
