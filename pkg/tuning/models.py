from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from core.exceptions import InputError


class WindowScheme(models.TextChoices):
    EXPANDING = 'expanding', _('Expanding window')
    ROLLING = 'rolling', _('Rolling window')


@dataclass(frozen=True)
class TscvConfig:
    """Time-series cross-validation: fit on a window, nowcast the next observation."""
    initial_fraction: float = 2 / 3
    scheme: str = WindowScheme.EXPANDING
    loss: str = 'squared'

    def __post_init__(self):
        if not 0 < self.initial_fraction < 1:
            raise InputError('initial_fraction must lie in (0, 1)', initial_fraction=self.initial_fraction)
        if self.scheme not in WindowScheme.values:
            raise InputError('Unknown window scheme', scheme=self.scheme, valid=WindowScheme.values)
        if self.loss != 'squared':
            raise InputError('Only squared error loss is supported', loss=self.loss)

    def initial_window(self, T):
        return int(np.floor(self.initial_fraction * T))

    def window(self, split, T):
        """Rows [start, split) used to predict row ``split``."""
        if self.scheme == WindowScheme.ROLLING:
            return split - self.initial_window(T), split
        return 0, split


@dataclass(frozen=True)
class TscvResult:
    lambda_I: float
    lambda_G: float
    mspe: float
    grid_position: tuple
    n_splits: int
    scores: np.ndarray = field(repr=False, default=None)
    errors: Optional[np.ndarray] = field(repr=False, default=None)

    @property
    def pair(self):
        return self.lambda_I, self.lambda_G
