import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from gasresponse import lindhard as L
from gasresponse.distributions import MomentumDistribution as MD
from gasresponse.errors import SingularityError


def test_one_dimensional_static_value():
    v = L.m_fermi_1d(1.0, 0.0, 1.0)
    assert v.re == pytest.approx(math.log(9) / (2 * math.sqrt(2 * math.pi)), rel=1e-14)
    assert v.im == 0.0


def test_one_dimensional_absorptive_part():
    v = L.m_fermi_1d(1.0, 2.0, 1.0)
    assert v.im == pytest.approx(-math.sqrt(math.pi) / (2 * math.sqrt(2)), rel=1e-14)


def test_one_dimensional_closed_form_against_oracle():
    dist = MD.fermi_zero_t(1.0, 1)
    for om, k in [(0.0, 1.0), (2.0, 1.0), (0.7, 0.4)]:
        a, b = L.m_fermi_1d(1.0, om, k), L.m_oracle_time(dist, om, k)
        assert abs(a.value - b.value) <= 1e-6


def test_one_dimensional_singular_set_raises():
    # k^2 + 2k sqrt(mu) = omega puts the logarithm on a branch point.
    with pytest.raises(SingularityError):
        L.m_fermi_1d(1.0, 3.0, 1.0)


@given(st.floats(0.05, 1.95))
def test_two_dimensional_static_plateau(k):
    v = L.m_fermi_2d(1.0, 0.0, k)
    assert (v.re, v.im) == (0.5, 0.0)


def test_two_dimensional_real_on_upper_edge():
    for mu, k in [(1.0, 0.5), (2.0, 3.0)]:
        v = L.m_fermi_2d(mu, k * k + 2 * math.sqrt(mu) * k, k)
        assert v.re == pytest.approx(0.5 * (1 - math.sqrt(1 + 2 * math.sqrt(mu) / k)), abs=1e-12)
        assert v.im == 0.0


def test_two_dimensional_against_oracle():
    dist = MD.fermi_zero_t(1.0, 2)
    a, b = L.m_fermi_2d(1.0, 0.3, 0.7), L.m_oracle_time(dist, 0.3, 0.7)
    assert abs(a.value - b.value) <= 1e-6


def test_dimension_reduction_routes():
    a = L.m_fermi_d(2, 1.0, 0.5, 0.9)
    assert abs(a.value - L.m_fermi_2d(1.0, 0.5, 0.9).value) <= 1e-6
    b1 = L.m_fermi_d(3, 1.0, 1.0, 1.0, route="m1")
    b2 = L.m_fermi_d(3, 1.0, 1.0, 1.0, route="m2")
    assert abs(b1.value - b2.value) <= 1e-6


@pytest.mark.parametrize("d", [1, 2, 3])
def test_small_momentum_static_limit(d):
    dist = MD.fermi_zero_t(1.0, d)
    v = L.m_oracle_time(dist, 0.0, 1e-4)
    assert v.re == pytest.approx(L.static_limit(dist), rel=1e-7)
    if d == 3:
        assert L.m_fermi_d(3, 1.0, 0.0, 1e-4).re == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-8)


def test_static_limit_smooth_is_half_occupation_at_origin(fermi_hot):
    assert L.static_limit(fermi_hot) == pytest.approx(0.5 / (math.exp(-0.01) + 1), rel=1e-10)


def test_smooth_low_temperature_recovers_step():
    v = L.m_general(MD.fermi_dirac(1e-3, 1.0, 2), 0.0, 1.0)
    assert v.re == pytest.approx(0.5, abs=1e-3)
    assert v.im == 0.0


def test_general_and_oracle_routes_agree(fermi_hot):
    a, b = L.m_general(fermi_hot, 1.0, 1.0), L.m_oracle_time(fermi_hot, 1.0, 1.0)
    assert abs(a.value - b.value) <= max(a.est_error + b.est_error, 1e-9)


def test_conjugate_symmetry_of_oracle(boltzmann_unit):
    a = L.m_oracle_time(boltzmann_unit, 0.8, 0.6)
    b = L.m_oracle_time(boltzmann_unit, -0.8, 0.6)
    assert a.re == pytest.approx(b.re, abs=1e-10)
    assert a.im == pytest.approx(-b.im, abs=1e-10)


def test_uniform_bound_boltzmann():
    assert L.uniform_bound(MD.boltzmann(2.0, 0.5, 2)) == pytest.approx(math.exp(0.25) / 2, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 30.0), st.floats(0.01, 8.0))
def test_sign_and_bound_properties(omega, k):
    dist = MD.boltzmann(1.0, 0.0, 2)
    # Absorption comes from energies s >= C = ((omega - k^2) / 2k)^2 and is of
    # size e^{-C}; past C ~ 700 it underflows to zero in double precision.
    assume(((omega - k * k) / (2 * k)) ** 2 < 600.0)
    vals, _ = L.m_general_grid(dist, np.array([omega, -omega]), np.array([k, k]))
    assert vals[0].imag < 0
    assert vals[0].imag + vals[1].imag == pytest.approx(0.0, abs=1e-10)
    assert abs(vals[0]) <= L.uniform_bound(dist) + 1e-8


def test_grid_csv_schema(tmp_path):
    om, k = np.array([0.0, 1.0]), np.array([1.0, 2.0])
    vals = np.array([0.5 + 0j, 0.1 - 0.2j])
    path = tmp_path / "g.csv"
    L.write_grid_csv(path, om, k, vals, L.Route.CLOSED_FORM, np.zeros(2))
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(L.GRID_CSV_HEADER) == "omega,kmag,re_m,im_m,route,est_error"
    assert len(lines) == 3


def _boltzmann_absorption(T, mu, d, omega, k):
    """Im m_f for Boltzmann: (Jp(C2) - Jp(C1)) / 2k with Jp explicit for an exponential f'."""
    C1, C2 = ((omega + k * k) / (2 * k)) ** 2, ((omega - k * k) / (2 * k)) ** 2
    amp = 0.5 * math.sqrt(math.pi * T) if d == 2 else 0.5 * math.pi * T / math.sqrt(2 * math.pi)
    return -amp * (np.exp(-(C2 - mu) / T) - np.exp(-(C1 - mu) / T)) / (2 * k)


@pytest.mark.parametrize("d", [2, 3])
def test_boltzmann_absorption_closed_form_against_oracle(d):
    dist = MD.boltzmann(1.3, 0.4, d)
    for omega, k in [(0.7, 0.5), (3.0, 1.2), (1.0, 2.5)]:
        v = L.m_oracle_time(dist, omega, k)
        assert v.im == pytest.approx(_boltzmann_absorption(1.3, 0.4, d, omega, k), abs=1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_absorption_keeps_relative_accuracy_in_the_far_tail(d):
    T, mu = 1.3, 0.4
    rng = np.random.default_rng(d)
    w, k = rng.uniform(0.01, 30, 400), rng.uniform(0.02, 8, 400)
    vals, _ = L.m_general_grid(MD.boltzmann(T, mu, d), w, k)
    exact = _boltzmann_absorption(T, mu, d, w, k)
    seen = np.abs(exact) > 1e-290
    assert np.all(vals.imag[seen] < 0)
    np.testing.assert_allclose(vals.imag[seen], exact[seen], rtol=1e-10, atol=0)
