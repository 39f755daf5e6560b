"""Hartree evolution of a density matrix on a truncated momentum lattice.

The torus of side L carries the plane waves e_k(x) = L^{-1} e^{ik.x} with
k = 2 pi n / L and n in {-M, ..., M}^2.  The one-body density matrix is a
dense Hermitian matrix in this basis, and the self-consistent potential is
projected back onto the same modes (a Galerkin truncation).

The equation is integrated for Q = gamma - gamma_f in the interaction picture
of the kinetic part, Q_I(t) = e^{-itDelta} Q(t) e^{itDelta}.  The kinetic
operator is diagonal, so the change of picture is an elementwise phase and
the explicit RK4 step size is limited only by the potential.

Torus runs are qualitative: there is no dispersion to infinity, so they show
short-time relaxation trends and conservation laws, not scattering.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import linalg

from ..distributions import eval_f
from ..errors import IntegrationError, ParameterDomainError, PreconditionError
from .perturbation import FinitePerturbation, GaussianOrbital

__all__ = [
    "MomentumLattice",
    "LatticeState",
    "Trajectory",
    "lattice_hartree_evolve",
    "reversal_error",
    "potential_norm_estimate",
    "write_trajectory_csv",
    "TRAJECTORY_CSV_HEADER",
    "QUALITATIVE_NOTE",
]

TRAJECTORY_CSV_HEADER = ("t", "sup_density_dev", "trace_Q", "schatten2_Q", "spec_drift")
QUALITATIVE_NOTE = ("qualitative torus run: conservation laws are checked, "
                    "relaxation trends are evidence only")
TRACE_DRIFT_LIMIT = 1e-6


@dataclass(frozen=True)
class MomentumLattice:
    """Modes 2 pi n / L with n in {-M, ..., M}^2, flattened row-major."""

    M: int
    L_len: float

    def __post_init__(self):
        if self.M < 1 or not self.L_len > 0:
            raise ParameterDomainError("lattice needs M >= 1 and L > 0")

    @property
    def side(self):
        return 2 * self.M + 1

    @property
    def size(self):
        return self.side ** 2

    @property
    def n(self):
        """Integer labels, shape (size, 2)."""
        r = np.arange(-self.M, self.M + 1)
        a, b = np.meshgrid(r, r, indexing="ij")
        return np.stack([a.ravel(), b.ravel()], axis=1)

    @property
    def k(self):
        return (2 * math.pi / self.L_len) * self.n

    @property
    def energies(self):
        return np.sum(self.k ** 2, axis=1)

    @property
    def k_max(self):
        return 2 * math.pi * self.M / self.L_len


def _gaussian_coefficients(orb: GaussianOrbital, lat: MomentumLattice):
    """<e_k, u> for a Gaussian orbital, neglecting its mass outside the box."""
    s2 = orb.sigma ** 2
    dk = lat.k - np.asarray(orb.momentum)[None, :]
    c = np.asarray(orb.center)
    amp = 2 * math.pi * s2 / math.sqrt(math.pi * s2) / lat.L_len
    return amp * np.exp(-0.5 * s2 * np.sum(dk ** 2, axis=1) - 1j * (dk @ c))


@dataclass(frozen=True, eq=False)
class LatticeState:
    """gamma = diag(f(|k|^2)) + Q on a momentum lattice."""

    lattice: MomentumLattice
    gamma_f_diag: np.ndarray
    Q: np.ndarray
    potential: object

    def __post_init__(self):
        n = self.lattice.size
        if self.Q.shape != (n, n) or self.gamma_f_diag.shape != (n,):
            raise ParameterDomainError("state arrays do not match the lattice")
        scale = max(float(np.abs(self.Q).max(initial=0.0)), 1.0)
        if not np.allclose(self.Q, self.Q.conj().T, atol=1e-13 * scale, rtol=0):
            raise ParameterDomainError("Q must be Hermitian")

    @classmethod
    def build(cls, dist, pot, *, M=16, L_len=16 * math.pi, q0: FinitePerturbation | None = None):
        """Stationary state of ``dist`` plus the lattice projection of ``q0``."""
        if dist.dimension != 2:
            raise PreconditionError("lattice evolution is implemented for d = 2")
        lat = MomentumLattice(M, L_len)
        fdiag = np.asarray(eval_f(dist, lat.energies), dtype=float)
        Q = np.zeros((lat.size, lat.size), dtype=complex)
        if q0 is not None and q0.rank:
            if not q0.is_gaussian:
                raise PreconditionError("lattice projection needs Gaussian orbitals")
            for orb, lam in zip(q0.orbitals, q0.weights):
                a = _gaussian_coefficients(orb, lat)
                Q += lam * np.outer(a, a.conj())
        Q = 0.5 * (Q + Q.conj().T)
        return cls(lat, fdiag, Q, pot)

    @property
    def gamma(self):
        return self.Q + np.diag(self.gamma_f_diag)

    def with_Q(self, Q):
        return LatticeState(self.lattice, self.gamma_f_diag, Q, self.potential)

    def density_deviation(self, n_grid=None):
        """rho_gamma - rho_{gamma_f} on an n_grid x n_grid grid centred at 0."""
        return _Propagator(self).density(self.Q, n_grid)


class _Propagator:
    """Right-hand side of the interaction-picture equation and observables."""

    def __init__(self, state: LatticeState):
        lat = state.lattice
        self.lat = lat
        self.E = lat.energies
        self.fdiag = state.gamma_f_diag
        n = lat.n
        side_q = 4 * lat.M + 1
        self.side_q = side_q
        d = n[:, None, :] - n[None, :, :] + 2 * lat.M
        self.diff_index = (d[..., 0] * side_q + d[..., 1]).ravel()
        q = (2 * math.pi / lat.L_len) * (np.stack(np.meshgrid(
            np.arange(side_q) - 2 * lat.M, np.arange(side_q) - 2 * lat.M, indexing="ij"), -1))
        # w * e^{iq.x} = 2 pi w_hat(q) e^{iq.x} in d = 2
        self.w_on_q = 2 * math.pi * np.asarray(state.potential(np.hypot(q[..., 0], q[..., 1])), float).ravel()
        self.df = self.fdiag[None, :] - self.fdiag[:, None]   # f_b - f_a

    def phase(self, t):
        e = np.exp(1j * t * self.E)
        return np.outer(e, e.conj())

    def density_coefficients(self, Q):
        """c_q with rho_Q(x) = sum_q c_q e^{iq.x}, on the (4M+1)^2 difference grid."""
        flat = Q.ravel()
        size = self.side_q ** 2
        c = (np.bincount(self.diff_index, weights=flat.real, minlength=size)
             + 1j * np.bincount(self.diff_index, weights=flat.imag, minlength=size))
        return c / self.lat.L_len ** 2

    def potential_matrix(self, Q):
        v = self.w_on_q * self.density_coefficients(Q)
        return v[self.diff_index].reshape(Q.shape)

    def rhs(self, t, QI):
        P = self.phase(t)
        V_I = P * self.potential_matrix(QI * P.conj())
        A = V_I @ QI
        # i dQ_I/dt = [V_I, gamma_f] + [V_I, Q_I]; both operands Hermitian
        return -1j * (V_I * self.df + (A - A.conj().T))

    def density(self, Q, n_grid=None):
        """rho_Q at x_j = -L/2 + j L / n_grid (both axes)."""
        side = self.side_q
        n_grid = n_grid or 2 * side
        if n_grid < side:
            raise ParameterDomainError(f"density grid needs at least {side} points per axis")
        labels = np.arange(side) - 2 * self.lat.M
        # shift the origin of the sampling grid to -L/2
        sign = np.where(labels % 2 == 0, 1.0, -1.0)
        c = self.density_coefficients(Q).reshape(side, side) * np.outer(sign, sign)
        pad = np.zeros((n_grid, n_grid), dtype=complex)
        idx = labels % n_grid
        pad[np.ix_(idx, idx)] = c
        return (np.fft.ifft2(pad) * n_grid * n_grid).real

    def sup_density(self, Q, n_grid=None):
        return float(np.abs(self.density(Q, n_grid)).max())


@dataclass
class Trajectory:
    """Sampled observables of a lattice run; ``final`` is the state at the horizon."""

    t: np.ndarray
    sup_density_dev: np.ndarray
    trace_Q: np.ndarray
    schatten2_Q: np.ndarray
    spec_drift: np.ndarray
    final: LatticeState
    note: str = QUALITATIVE_NOTE
    meta: dict = field(default_factory=dict)

    @property
    def trace_drift(self):
        return float(np.abs(self.trace_Q - self.trace_Q[0]).max())

    @property
    def max_spec_drift(self):
        return float(self.spec_drift.max())

    def rows(self):
        return zip(self.t, self.sup_density_dev, self.trace_Q, self.schatten2_Q, self.spec_drift)


def _rk4(prop, t, y, h):
    k1 = prop.rhs(t, y)
    k2 = prop.rhs(t + h / 2, y + (h / 2) * k1)
    k3 = prop.rhs(t + h / 2, y + (h / 2) * k2)
    k4 = prop.rhs(t + h, y + h * k3)
    out = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return 0.5 * (out + out.conj().T)


def potential_norm_estimate(state):
    """Upper bound on the operator norm of w * rho_Q restricted to the lattice."""
    prop = _Propagator(state)
    c = prop.density_coefficients(state.Q)
    return float(np.sum(np.abs(prop.w_on_q * c)))


def lattice_hartree_evolve(state: LatticeState, horizon: float, dt: float, *,
                           sample_every: float | None = None, t0: float = 0.0):
    """Integrate i dgamma/dt = [-Delta + w * rho_{gamma - gamma_f}, gamma] up to ``horizon``.

    ``dt`` may be negative to run backwards.  Observables are recorded at
    multiples of ``sample_every`` (default: every unit of time, at least ten
    samples).  Spectral drift compares sorted eigenvalues of gamma with t = 0.

    Raises
    ------
    PreconditionError
        If ``|dt|`` times the potential norm estimate is 0.5 or more.
    IntegrationError
        If Tr Q drifts by more than 1e-6.
    """
    if dt == 0 or not math.isfinite(dt) or not horizon >= 0:
        raise ParameterDomainError("need a nonzero finite dt and horizon >= 0")
    n_steps = int(round(horizon / abs(dt)))
    if not math.isclose(n_steps * abs(dt), horizon, rel_tol=1e-9, abs_tol=1e-12):
        raise ParameterDomainError("horizon must be a multiple of |dt|")
    vnorm = potential_norm_estimate(state)
    if abs(dt) * vnorm >= 0.5:
        raise PreconditionError(f"dt * |w * rho| = {abs(dt) * vnorm:.3g} >= 0.5; use a smaller step")
    prop = _Propagator(state)
    if sample_every is None:
        sample_every = min(1.0, horizon / 10) if horizon > 0 else 1.0
    stride = max(1, int(round(sample_every / abs(dt))))

    spec0 = linalg.eigvalsh(state.gamma)
    QI = state.Q * prop.phase(t0)
    ts, dens, tr, s2, drift = [], [], [], [], []

    def record(step, QI):
        t = t0 + step * dt
        Q = QI * prop.phase(t).conj()
        ts.append(t)
        dens.append(prop.sup_density(Q))
        tr.append(float(np.trace(QI).real))
        s2.append(float(np.linalg.norm(QI)))
        ev = linalg.eigvalsh(QI + np.diag(prop.fdiag))
        drift.append(float(np.abs(ev - spec0).max()))
        if abs(tr[-1] - tr[0]) > TRACE_DRIFT_LIMIT:
            raise IntegrationError(
                f"trace of Q drifted by {abs(tr[-1] - tr[0]):.3g} by t = {t:g}; reduce dt")

    record(0, QI)
    for step in range(1, n_steps + 1):
        QI = _rk4(prop, t0 + (step - 1) * dt, QI, dt)
        if step % stride == 0 or step == n_steps:
            record(step, QI)
    t_end = t0 + n_steps * dt
    final = state.with_Q(QI * prop.phase(t_end).conj())
    return Trajectory(np.array(ts), np.array(dens), np.array(tr), np.array(s2), np.array(drift),
                      final, meta={"dt": dt, "horizon": horizon, "modes": state.lattice.size,
                                   "box_length": state.lattice.L_len, "t_start": t0})


def reversal_error(state: LatticeState, horizon: float, dt: float):
    """Frobenius distance between gamma(0) and the state run forward then back."""
    fwd = lattice_hartree_evolve(state, horizon, dt)
    back = lattice_hartree_evolve(fwd.final, horizon, -dt, t0=horizon)
    return float(np.linalg.norm(back.final.Q - state.Q)), fwd, back


def write_trajectory_csv(traj: Trajectory, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_CSV_HEADER)
        for row in traj.rows():
            w.writerow([repr(float(v)) for v in row])
