import math

import numpy as np
import pytest

from gasresponse import InteractionPotential
from gasresponse.distributions import MomentumDistribution as MD
from gasresponse.dynamics import (
    FinitePerturbation,
    LatticeState,
    MomentumLattice,
    TRAJECTORY_CSV_HEADER,
    lattice_hartree_evolve,
    potential_norm_estimate,
    reversal_error,
    write_trajectory_csv,
)
from gasresponse.errors import ParameterDomainError, PreconditionError

DIST = MD.fermi_dirac(1.0, 1.0)
POT = InteractionPotential.gaussian(1.0, 1.0)
ZERO_POT = InteractionPotential.from_callable(lambda k: np.zeros_like(np.asarray(k, dtype=float)), label="zero")
Q0 = FinitePerturbation.gaussians([(0, 0, 1.5, 0.5, 0, 0.3), (2, -1, 1.0, 0, 0.5, -0.2)])


def test_lattice_labels():
    lat = MomentumLattice(2, 2 * math.pi)
    assert lat.size == 25
    assert lat.k_max == pytest.approx(2.0)
    assert sorted(lat.energies)[-1] == pytest.approx(8.0)


def test_projection_is_hermitian_and_near_unit_norm():
    state = LatticeState.build(DIST, POT, M=8, L_len=8 * math.pi, q0=Q0)
    assert np.allclose(state.Q, state.Q.conj().T)
    # each Gaussian keeps almost all its norm inside the lattice
    one = LatticeState.build(DIST, POT, M=12, L_len=8 * math.pi,
                             q0=FinitePerturbation.gaussians([(0, 0, 1.5, 0, 0, 1.0)]))
    assert np.trace(one.Q).real == pytest.approx(1.0, abs=1e-6)


def test_vacuum_perturbation_stays_zero():
    state = LatticeState.build(DIST, POT, M=4, L_len=4 * math.pi)
    traj = lattice_hartree_evolve(state, 1.0, 0.25)
    assert np.abs(traj.final.Q).max() == 0.0
    assert traj.sup_density_dev.max() <= 1e-12


def test_free_flow_matches_plane_wave_sum():
    M, L = 4, 6 * math.pi
    state = LatticeState.build(DIST, ZERO_POT, M=M, L_len=L, q0=Q0)
    t_end = 1.5
    traj = lattice_hartree_evolve(state, t_end, 0.5)
    n = 20
    x = -L / 2 + (L / n) * np.arange(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    lat = state.lattice
    # direct sum over the same orbitals, each evolved mode by mode
    from gasresponse.dynamics.lattice import _gaussian_coefficients

    rho = np.zeros((n, n))
    for orb, lam in zip(Q0.orbitals, Q0.weights):
        a = _gaussian_coefficients(orb, lat) * np.exp(-1j * t_end * lat.energies)
        u = sum(c * np.exp(1j * (k[0] * X + k[1] * Y)) for c, k in zip(a, lat.k)) / L
        rho += lam * np.abs(u) ** 2
    np.testing.assert_allclose(traj.final.density_deviation(n), rho, atol=1e-13)


def test_conservation_and_reversal_short_run():
    state = LatticeState.build(DIST, POT, M=5, L_len=8 * math.pi, q0=Q0)
    err, fwd, _ = reversal_error(state, 1.0, 0.125)
    assert err <= 1e-8
    assert fwd.trace_drift <= 1e-12
    assert fwd.max_spec_drift <= 1e-8


def test_step_size_guard():
    state = LatticeState.build(DIST, POT, M=4, L_len=4 * math.pi, q0=Q0.scaled(50.0))
    dt = 1.0 / potential_norm_estimate(state)
    with pytest.raises(PreconditionError):
        lattice_hartree_evolve(state, dt, dt)


def test_horizon_must_be_multiple_of_step():
    state = LatticeState.build(DIST, POT, M=3, L_len=4 * math.pi)
    with pytest.raises(ParameterDomainError):
        lattice_hartree_evolve(state, 1.0, 0.3)


def test_trajectory_csv(tmp_path):
    state = LatticeState.build(DIST, POT, M=3, L_len=4 * math.pi, q0=Q0)
    traj = lattice_hartree_evolve(state, 1.0, 0.25)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_CSV_HEADER)
    assert len(lines) == 1 + len(traj.t)
