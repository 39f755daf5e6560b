"""The linear-response operator L1 as a discrete space-time Fourier multiplier.

On a periodic grid, L1 multiplies the discrete transform of a field by
K(omega, k) = w_hat(|k|) m_f(omega, |k|).  The symbol is symmetrised over the
lattice reflection (omega, k) -> (-omega, -k) so real fields stay real; this
only changes the Nyquist planes, which are their own reflections.

At k = 0, m_f(omega, 0) = 0 for omega != 0 (its time kernel contains
sin(t k^2)).  The origin itself, where m_f has no limit, is given the static
value lim_{k -> 0} m_f(0, k) = (1/2) int_0^inf r gcheck(r) dr.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from ..distributions import Family
from ..errors import AccuracyError, NearSingularError, PreconditionError, ResolutionError
from ..lindhard import FrequencyMomentumPoint, m2_fermi_raw, m_general_grid, static_limit
from .fields import SpaceTimeField, SpaceTimeGrid

__all__ = [
    "LatticeSymbol",
    "lattice_symbol",
    "apply_L1",
    "invert_one_plus_L1",
    "linearized_response",
    "check_box",
    "MARGIN_THRESHOLD",
    "POINT_TOL",
]

MARGIN_THRESHOLD = 1e-6
POINT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LatticeSymbol:
    """K on the dual lattice of a grid, in numpy FFT ordering."""

    K: np.ndarray
    grid: SpaceTimeGrid
    max_est_error: float

    @property
    def one_plus(self):
        return 1.0 + self.K

    def margin(self):
        """min |1 + K| over the lattice and the (omega, |k|) where it occurs."""
        a = np.abs(self.one_plus)
        i = np.unravel_index(int(np.argmin(a)), a.shape)
        omega = self.grid.omega[i[0]]
        kmag = math.hypot(self.grid.k[i[1]], self.grid.k[i[2]])
        return float(a[i]), FrequencyMomentumPoint(float(omega), kmag)

    def sup(self):
        return float(np.abs(self.K).max())


def _lindhard_on(dist, omega, kmag):
    if dist.family is Family.FERMI_ZERO_T:
        return m2_fermi_raw(dist.mu, omega, kmag), np.zeros(omega.shape)
    return m_general_grid(dist, omega, kmag)


@lru_cache(maxsize=16)
def _symbol_cached(dist, pot, grid):
    if dist.dimension != 2:
        raise PreconditionError("the space-time multiplier is implemented for d = 2")
    omega = grid.omega
    k = grid.k
    kmag = np.hypot(k[:, None], k[None, :])
    # m_f depends on (|omega|, |k|) up to conjugation: evaluate unique pairs once
    kq, kinv = np.unique(np.round(kmag, 12), return_inverse=True)
    wq, winv = np.unique(np.abs(omega), return_inverse=True)
    W, Kq = np.meshgrid(wq, kq, indexing="ij")
    m = np.zeros(W.shape, dtype=complex)
    err = np.zeros(W.shape)
    pos = Kq > 0
    if pos.any():
        vals, errs = _lindhard_on(dist, W[pos], Kq[pos])
        m[pos], err[pos] = vals, errs
    bad = err > POINT_TOL
    if bad.any():
        pts = ", ".join(f"(omega={w:g}, k={k:g})" for w, k in zip(W[bad][:5], Kq[bad][:5]))
        more = f" and {int(bad.sum()) - 5} more" if bad.sum() > 5 else ""
        raise AccuracyError(f"Lindhard error estimate above {POINT_TOL:g} at {pts}{more}",
                            achieved=float(err.max()))
    origin = (W == 0) & (Kq == 0)
    if origin.any():
        m[origin] = static_limit(dist)
    what = np.asarray(pot(kq), dtype=float)
    table = m * what[None, :]
    K = table[winv][:, kinv.reshape(kmag.shape)]
    neg = omega < 0
    K[neg] = np.conj(K[neg])
    # lattice reflection (i, j, l) -> (-i, -j, -l)
    refl = np.conj(np.roll(np.flip(K, axis=(0, 1, 2)), 1, axis=(0, 1, 2)))
    K = 0.5 * (K + refl)
    K.setflags(write=False)
    return LatticeSymbol(K, grid, float(err.max(initial=0.0) * np.abs(what).max(initial=0.0)))


def lattice_symbol(dist, pot, grid):
    """w_hat m_f on the dual lattice of ``grid`` (cached per dist, pot, grid)."""
    return _symbol_cached(dist, pot, grid)


def _transform(field):
    return np.fft.fftn(field.values)


def _back(spec, grid):
    out = np.fft.ifftn(spec)
    return SpaceTimeField(out.real, grid)


def apply_L1(phi, dist, pot):
    """L1(phi): multiply the discrete transform by w_hat(|k|) m_f(omega, |k|)."""
    sym = lattice_symbol(dist, pot, phi.grid)
    return _back(sym.K * _transform(phi), phi.grid)


def invert_one_plus_L1(rhs, dist, pot, *, threshold=MARGIN_THRESHOLD):
    """Solve (1 + L1) rho = rhs by division in the discrete dual."""
    sym = lattice_symbol(dist, pot, rhs.grid)
    margin, where = sym.margin()
    if margin <= threshold:
        raise NearSingularError(f"lattice margin {margin:.3g} <= {threshold:g} at {where}",
                                margin=margin, argmin=where)
    return _back(_transform(rhs) / sym.one_plus, rhs.grid)


def check_box(q0, grid, factor=4.0):
    """Raise unless the box is ``factor`` times wider than the Gaussian spread
    at the last time and every centre stays inside."""
    if not q0.is_gaussian:
        return
    t_end = max(abs(grid.t[0]), abs(grid.t[-1]))
    for orb in q0.orbitals:
        width = math.sqrt(2 * orb.variance(t_end))
        reach = max(np.abs(orb.centre_at(t)).max() for t in (grid.t[0], grid.t[-1]))
        if factor * width > grid.L_len or reach + 2 * width > 0.5 * grid.L_len:
            raise ResolutionError(
                f"box side {grid.L_len:g} too small for an orbital of spread {width:.3g} "
                f"reaching {reach:.3g} by t = {t_end:g}")


def linearized_response(q0, dist, pot, grid):
    """rho solving rho + L1 rho = rho_free, with rho_free the free density of Q0."""
    from .perturbation import free_density

    check_box(q0, grid)
    return invert_one_plus_L1(free_density(q0, grid), dist, pot)
