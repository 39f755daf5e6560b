import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gasresponse import distributions as D
from gasresponse.distributions import MomentumDistribution as MD
from gasresponse.errors import ParameterDomainError, UnsupportedOperationError


def test_profile_values_at_reference_points():
    assert D.eval_f(MD.fermi_zero_t(1.0), 0.5) == 1.0
    assert D.eval_f(MD.fermi_dirac(3.0, 2.0), 2.0) == pytest.approx(0.5, abs=1e-15)
    assert D.eval_f(MD.boltzmann(3.0, 2.0), 2.0) == pytest.approx(1.0, abs=1e-15)


def test_bose_einstein_rejects_nonnegative_mu():
    with pytest.raises(ParameterDomainError):
        MD.bose_einstein(1.0, 0.0)


def test_fermi_dirac_slope_at_origin():
    assert D.eval_f_derivative(MD.fermi_dirac(1.0, 0.0), 0.0) == pytest.approx(-0.25, rel=1e-14)


@given(st.floats(0.0, 30.0), st.floats(0.2, 5.0), st.floats(-2.0, 2.0))
def test_boltzmann_derivative_closed_form(r, T, mu):
    got = D.eval_f_derivative(MD.boltzmann(T, mu), r)
    assert got == pytest.approx(-math.exp(-(r - mu) / T) / T, rel=1e-12)


def test_step_profile_has_no_derivative():
    with pytest.raises(UnsupportedOperationError):
        D.eval_f_derivative(MD.fermi_zero_t(1.0), 0.3)


@pytest.mark.parametrize("dist", [MD.fermi_dirac(2.0, 1.0), MD.boltzmann(1.5, 0.3),
                                  MD.bose_einstein(1.0, -0.5)])
def test_smooth_profiles_decrease(dist):
    r = np.linspace(0.01, 40.0, 400)
    assert np.all(np.asarray(D.eval_f_derivative(dist, r)) < 0)


def test_one_dimensional_step_transform():
    dist = MD.fermi_zero_t(1.0, 1)
    assert D.gcheck(dist, math.pi) == pytest.approx(0.0, abs=1e-12)
    assert D.gcheck(dist, 1e-8) == pytest.approx(math.sqrt(2 / math.pi) * 1.0, rel=1e-10)


def test_boltzmann_transform_is_unit_gaussian():
    dist = MD.boltzmann(2.0, 0.0, 2)
    x = np.linspace(0.0, 6.0, 25)
    np.testing.assert_allclose(D.gcheck(dist, x), np.exp(-x ** 2 / 2), rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize("dist", [MD.fermi_dirac(1.0, 1.0, 2), MD.fermi_dirac(1.0, 1.0, 3),
                                  MD.bose_einstein(1.0, -1.0, 2)])
def test_radial_transform_matches_independent_quadrature(dist):
    """Brute-force Bessel/sine transform from scipy.quad as an independent check."""
    from scipy import integrate, special

    d = dist.dimension
    for x in (0.3, 2.0, 7.0):
        if d == 2:
            def integrand(k):
                return float(D.eval_f(dist, k * k)) * special.j0(k * x) * k
        else:
            def integrand(k):
                return float(D.eval_f(dist, k * k)) * math.sin(k * x) / x * k * math.sqrt(2 / math.pi)
        ref, _ = integrate.quad(integrand, 0.0, 12.0, limit=800, epsabs=1e-14, epsrel=1e-12)
        assert float(D.gcheck(dist, x)) == pytest.approx(ref, rel=1e-8, abs=1e-12)


def test_parseval_for_positive_transform():
    dist = MD.boltzmann(1.3, 0.4, 2)
    norm = D.gcheck_weighted_norm(dist)
    # d = 2: the weighted norm equals the L1 norm of gcheck, i.e. 2 pi g(0).
    assert norm == pytest.approx(2 * math.pi * math.exp(0.4 / 1.3), rel=1e-8)


def test_step_weighted_norm_is_reported_divergent():
    from gasresponse.errors import AccuracyError

    with pytest.raises(AccuracyError):
        D.gcheck_weighted_norm(MD.fermi_zero_t(1.0, 2))


def test_smoothness_condition():
    assert D.check_smoothness_condition(MD.fermi_dirac(100.0, 1.0)).all_passed
    rep = D.check_smoothness_condition(MD.fermi_zero_t(1.0))
    assert rep.passed[0] and not rep.passed[1]
    # The weight 1 + r^0 doubles the bare integral of e^{-r}.
    assert D.check_smoothness_condition(MD.boltzmann(1.0, 0.0)).values[0] == pytest.approx(2.0, rel=1e-9)


def test_tabulated_profile_is_monotone_and_matches_samples(tmp_path):
    r = np.linspace(0, 20, 81)
    f = 1 / (np.exp(r - 1) + 1)
    dist = MD.tabulated(r, f, 2)
    np.testing.assert_allclose(D.eval_f(dist, r), f, atol=1e-15)
    rr = np.linspace(0.05, 19.9, 300)
    assert np.all(np.asarray(D.eval_f_derivative(dist, rr)) <= 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(-1.0, 1.0))
def test_transform_is_finite_and_real(T, mu):
    vals = D.gcheck(MD.boltzmann(T, mu, 2), np.linspace(0, 10, 11))
    assert np.all(np.isfinite(vals))
