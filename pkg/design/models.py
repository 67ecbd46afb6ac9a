"""Value types for panels, CECM designs and VECM parameter sets.

Nothing here is stored in the database; these are immutable dataclasses that
flow between the apps.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from core.exceptions import InputError

# Entries below this magnitude count as exact zeros in implied coefficients
ZERO_THRESHOLD = 1e-12


class DeterministicKind(models.TextChoices):
    NONE = 'none', _('No deterministic terms')
    CONSTANT = 'constant', _('Constant')
    CONSTANT_AND_TREND = 'constant_and_trend', _('Constant and linear trend')


DETERMINISTIC_ALIASES = {
    'none': DeterministicKind.NONE,
    'n': DeterministicKind.NONE,
    'const': DeterministicKind.CONSTANT,
    'constant': DeterministicKind.CONSTANT,
    'c': DeterministicKind.CONSTANT,
    'trend': DeterministicKind.CONSTANT_AND_TREND,
    'constant_and_trend': DeterministicKind.CONSTANT_AND_TREND,
    'ct': DeterministicKind.CONSTANT_AND_TREND,
}


@dataclass(frozen=True)
class DeterministicSpec:
    kind: str = DeterministicKind.CONSTANT

    def __post_init__(self):
        if self.kind not in DeterministicKind.values:
            raise InputError('Unknown deterministic kind', kind=self.kind)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(DETERMINISTIC_ALIASES[str(value).lower()])
        except KeyError:
            raise InputError(
                'Unknown deterministic kind', kind=value, valid=sorted(DETERMINISTIC_ALIASES)
            ) from None

    @property
    def n_columns(self):
        return {
            DeterministicKind.NONE: 0,
            DeterministicKind.CONSTANT: 1,
            DeterministicKind.CONSTANT_AND_TREND: 2,
        }[DeterministicKind(self.kind)]

    @property
    def adf_regression(self):
        """statsmodels ``adfuller`` regression code for this kind."""
        return {0: 'n', 1: 'c', 2: 'ct'}[self.n_columns]

    def matrix(self, n_rows, trend_start=0):
        """Deterministic block; the trend column runs trend_start, trend_start + 1, ..."""
        columns = []
        if self.n_columns >= 1:
            columns.append(np.ones(n_rows))
        if self.n_columns == 2:
            columns.append(np.arange(n_rows, dtype=float) + trend_start)
        if not columns:
            return np.zeros((n_rows, 0))
        return np.column_stack(columns)

    def labels(self):
        return ['const', 'trend'][:self.n_columns]


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Levels z_t = (y_t, x_t') stored as a T x N matrix."""
    values: np.ndarray
    target_index: int = 0
    labels: Optional[list] = None
    index: Optional[list] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise InputError('Panel values must be a matrix', ndim=values.ndim)
        T, N = values.shape
        if T < 2 or N < 2:
            raise InputError('Panel needs at least 2 rows and 2 series', rows=T, columns=N)
        if not np.all(np.isfinite(values)):
            row, column = np.argwhere(~np.isfinite(values))[0]
            raise InputError('Panel contains a non-finite value', row=int(row), column=int(column))
        if not 0 <= self.target_index < N:
            raise InputError('Target index out of range', target_index=self.target_index, columns=N)
        labels = list(self.labels) if self.labels is not None else [f'z{i}' for i in range(N)]
        if len(labels) != N:
            raise InputError('One label per series is required', labels=len(labels), columns=N)
        if self.index is not None and len(self.index) != T:
            raise InputError('Row index length does not match the panel', index=len(self.index), rows=T)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'labels', labels)

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def N(self):
        return self.values.shape[1]

    @property
    def target_label(self):
        return self.labels[self.target_index]

    def target_first(self):
        """Same panel with the target moved to column 0 (other columns keep their order)."""
        if self.target_index == 0:
            return self
        order = [self.target_index] + [i for i in range(self.N) if i != self.target_index]
        return TimeSeriesPanel(
            values=self.values[:, order],
            target_index=0,
            labels=[self.labels[i] for i in order],
            index=self.index,
        )

    def rows(self, start, stop):
        return TimeSeriesPanel(
            values=self.values[start:stop],
            target_index=self.target_index,
            labels=self.labels,
            index=None if self.index is None else list(self.index[start:stop]),
        )


@dataclass(frozen=True)
class CecmDesign:
    """Conditional error-correction design.

    Columns of ``V`` are ordered [z_{t-1} (N), dx_t (N-1), dz_{t-1}, ..., dz_{t-p}].
    ``row_offset`` is the panel row of the first response observation.
    """
    dy: np.ndarray
    V: np.ndarray
    D: np.ndarray
    p: int
    N: int
    det: DeterministicSpec
    dy_proj: Optional[np.ndarray] = None
    V_proj: Optional[np.ndarray] = None
    column_labels: list = field(default_factory=list)
    row_offset: int = 0

    @property
    def M(self):
        return self.N * (self.p + 1) - 1

    @property
    def T_eff(self):
        return self.dy.shape[0]

    @property
    def d(self):
        return self.D.shape[1]

    @property
    def n_coefficients(self):
        return self.N + self.M

    @property
    def n_parameters(self):
        return self.N + self.M + self.d

    @property
    def is_projected(self):
        return self.dy_proj is not None and self.V_proj is not None

    @property
    def levels(self):
        return slice(0, self.N)

    @property
    def differences(self):
        return slice(self.N, self.N + self.M)


@dataclass(frozen=True)
class VecmParams:
    """Parameters of dz_t = A B'(z_{t-1} - mu - tau (t-1)) + sum_j Phi_j dz_{t-j} + eps_t."""
    A: np.ndarray
    B: np.ndarray
    Phi: list
    Sigma_eps: np.ndarray
    mu: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        Sigma = np.asarray(self.Sigma_eps, dtype=float)
        N = Sigma.shape[0]
        if Sigma.shape != (N, N):
            raise InputError('Sigma_eps must be square', shape=Sigma.shape)
        if A.shape[0] != N or B.shape[0] != N:
            raise InputError('A and B must have N rows', N=N, A=A.shape, B=B.shape)
        if A.shape[1] != B.shape[1]:
            raise InputError('A and B must have equal column counts', A=A.shape, B=B.shape)
        if not np.allclose(Sigma, Sigma.T, atol=1e-12):
            raise InputError('Sigma_eps must be symmetric')
        if np.linalg.eigvalsh(Sigma).min() <= 0:
            raise InputError('Sigma_eps must be positive definite')
        Phi = [np.asarray(phi, dtype=float) for phi in self.Phi]
        for j, phi in enumerate(Phi, start=1):
            if phi.shape != (N, N):
                raise InputError('Lag matrices must be N x N', lag=j, shape=phi.shape)
        mu = np.zeros(N) if self.mu is None else np.asarray(self.mu, dtype=float)
        tau = np.zeros(N) if self.tau is None else np.asarray(self.tau, dtype=float)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'B', B)
        object.__setattr__(self, 'Phi', Phi)
        object.__setattr__(self, 'Sigma_eps', Sigma)
        object.__setattr__(self, 'mu', mu)
        object.__setattr__(self, 'tau', tau)

    @property
    def N(self):
        return self.Sigma_eps.shape[0]

    @property
    def rank(self):
        return self.A.shape[1]

    @property
    def Pi(self):
        return self.A @ self.B.T


@dataclass(frozen=True)
class ImpliedSingleEq:
    pi0: np.ndarray
    delta: np.ndarray
    pi: np.ndarray
    mu0: float = 0.0
    tau0: float = 0.0

    @property
    def gamma(self):
        return np.concatenate([self.delta, self.pi])

    @property
    def S_delta(self):
        return np.flatnonzero(np.abs(self.delta) >= ZERO_THRESHOLD)

    @property
    def S_pi(self):
        return np.flatnonzero(np.abs(self.pi) >= ZERO_THRESHOLD)

    @property
    def support(self):
        return np.flatnonzero(np.abs(self.gamma) >= ZERO_THRESHOLD)
