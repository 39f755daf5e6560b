"""Uniform space-time grids in 1 + 2 dimensions and fields sampled on them."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from ..errors import ParameterDomainError

__all__ = ["SpaceTimeGrid", "SpaceTimeField"]

MIN_POINTS = 8


@dataclass(frozen=True)
class SpaceTimeGrid:
    """``n_t`` times ``t_start + i T/n_t`` and an ``n_x`` x ``n_x`` square of side
    ``L`` centred at the origin, periodic in all three axes."""

    n_t: int
    n_x: int
    T_len: float
    L_len: float
    t_start: float = 0.0

    def __post_init__(self):
        if self.n_t < MIN_POINTS or self.n_x < MIN_POINTS:
            raise ParameterDomainError(f"grids need at least {MIN_POINTS} points per axis")
        if not (self.T_len > 0 and self.L_len > 0):
            raise ParameterDomainError("grid extents must be positive")

    @property
    def dt(self):
        return self.T_len / self.n_t

    @property
    def dx(self):
        return self.L_len / self.n_x

    @property
    def shape(self):
        return (self.n_t, self.n_x, self.n_x)

    @property
    def t(self):
        return self.t_start + self.dt * np.arange(self.n_t)

    @property
    def x(self):
        return -0.5 * self.L_len + self.dx * np.arange(self.n_x)

    @property
    def omega(self):
        """Angular frequencies dual to t (numpy FFT ordering)."""
        return 2 * math.pi * np.fft.fftfreq(self.n_t, self.dt)

    @property
    def k(self):
        return 2 * math.pi * np.fft.fftfreq(self.n_x, self.dx)

    @property
    def cell_volume(self):
        return self.dt * self.dx * self.dx


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Real samples phi(t, x, y) on a :class:`SpaceTimeGrid`."""

    values: np.ndarray
    grid: SpaceTimeGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ParameterDomainError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterDomainError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def random(cls, grid, rng):
        return cls(rng.standard_normal(grid.shape), grid)

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.shape), grid)

    def l2_norm(self):
        """Riemann-sum L^2 norm over the box."""
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.cell_volume))

    def spectrum(self):
        return np.fft.fftn(self.values)

    def dual_l2_norm(self):
        """L^2 norm from the discrete transform (equal to :meth:`l2_norm`)."""
        s = self.spectrum()
        return float(np.sqrt(np.sum(np.abs(s) ** 2) / s.size * self.grid.cell_volume))

    def with_values(self, values):
        return SpaceTimeField(values, self.grid)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)
