"""Radial pair interactions described through their Fourier transform."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ParameterDomainError

__all__ = ["PotentialFamily", "InteractionPotential"]


class PotentialFamily(str, Enum):
    GAUSSIAN = "Gaussian"
    TABULATED = "TabulatedRadialFourier"


@dataclass(frozen=True, eq=False)
class InteractionPotential:
    """Pair potential w known through its radial Fourier transform.

    The transform convention is ``w_hat(k) = (2 pi)^(-d/2) int w(x) e^{-ik.x} dx``.

    Use :meth:`gaussian`, :meth:`tabulated` or :meth:`from_callable` rather
    than the raw constructor.
    """

    family: PotentialFamily
    what_hat: Callable[[np.ndarray], np.ndarray]
    dimension: int = 2
    w_l1_norm: Optional[float] = None
    label: str = ""
    params: tuple = field(default=())
    # (sup over k of w_hat, sup of (w_hat)_-, sup |w_hat|) when known exactly
    _exact_norms: Optional[tuple] = None

    # -- constructors --------------------------------------------------------
    @classmethod
    def gaussian(cls, amplitude, width, dimension=2):
        """w_hat(k) = amplitude * exp(-width^2 k^2 / 2).

        ``width = 0`` gives a constant transform (a contact interaction);
        it violates decay at infinity and is accepted only as a test probe.
        """
        amplitude, width = float(amplitude), float(width)
        if width < 0 or not math.isfinite(amplitude):
            raise ParameterDomainError("gaussian potential needs finite amplitude and width >= 0")

        def what(k, a=amplitude, s=width):
            k = np.asarray(k, dtype=float)
            return a * np.exp(-0.5 * (s * k) ** 2)

        l1 = abs(amplitude) * (2 * math.pi) ** (dimension / 2) if width > 0 else None
        pos = max(amplitude, 0.0)
        neg = max(-amplitude, 0.0)
        return cls(PotentialFamily.GAUSSIAN, what, dimension, l1,
                   f"gaussian(amplitude={amplitude!r}, width={width!r})",
                   (amplitude, width), (pos, neg, abs(amplitude)))

    @classmethod
    def tabulated(cls, k, values, dimension=2, w_l1_norm=None):
        """Monotone-cubic interpolation of sampled w_hat; zero beyond the table."""
        k = np.asarray(k, dtype=float)
        values = np.asarray(values, dtype=float)
        if k.ndim != 1 or k.shape != values.shape or k.size < 2:
            raise ParameterDomainError("table needs matching 1-D k and value arrays")
        if np.any(np.diff(k) <= 0) or k[0] < 0:
            raise ParameterDomainError("table k values must be >= 0 and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ParameterDomainError("table values must be finite")
        interp = PchipInterpolator(k, values, extrapolate=False)
        k0, v0 = float(k[0]), float(values[0])

        def what(q):
            q = np.asarray(q, dtype=float)
            out = np.nan_to_num(interp(q), nan=0.0)
            return np.where(q < k0, v0, out)

        norms = (max(float(values.max()), 0.0), max(float(-values.min()), 0.0),
                 float(np.abs(values).max()))
        return cls(PotentialFamily.TABULATED, what, dimension, w_l1_norm,
                   f"tabulated({k.size} points)", (tuple(k), tuple(values)), norms)

    @classmethod
    def from_callable(cls, func, dimension=2, label="callable", w_l1_norm=None):
        """Wrap a vectorised ``k -> w_hat(k)``; norms are estimated by sampling."""
        return cls(PotentialFamily.TABULATED, func, dimension, w_l1_norm, label)

    # -- evaluation ----------------------------------------------------------
    def __call__(self, k):
        return self.what_hat(np.asarray(k, dtype=float))

    def _sampled_norms(self):
        k = np.concatenate([[0.0], np.logspace(-6, 3, 4001)])
        v = np.asarray(self(k), dtype=float)
        return max(float(v.max()), 0.0), max(float(-v.min()), 0.0), float(np.abs(v).max())

    def _norms(self):
        return self._exact_norms if self._exact_norms is not None else self._sampled_norms()

    @property
    def what_zero_plus(self):
        """w_hat(0)_+."""
        return max(float(self(np.array([0.0]))[0]), 0.0)

    @property
    def neg_part_sup(self):
        """sup_k (w_hat)_-(k)."""
        return self._norms()[1]

    @property
    def sup_norm(self):
        """sup_k |w_hat(k)|."""
        return self._norms()[2]

    def weighted_sup_norm(self):
        """sup_k (1 + |k|^(1/2)) |w_hat(k)|, sampled on a log grid."""
        k = np.concatenate([[0.0], np.logspace(-6, 4, 8001)])
        return float(np.max((1 + np.sqrt(k)) * np.abs(self(k))))

    def decays_at_infinity(self, k_far=1e4, tol=1e-8):
        return bool(abs(float(self(np.array([k_far]))[0])) <= tol * max(self.sup_norm, 1e-300))

    @property
    def is_zero(self):
        return self.sup_norm == 0.0

    def __repr__(self):
        return f"InteractionPotential({self.label}, d={self.dimension})"
