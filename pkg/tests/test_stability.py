import math

import numpy as np
import pytest
from scipy import optimize, special

from gasresponse import InteractionPotential
from gasresponse import stability as S
from gasresponse.distributions import MomentumDistribution as MD, gcheck_weighted_norm
from gasresponse.errors import AccuracyError

SMALL_GRID = S.ScanGrid(n_k=24, n_omega=24, n_rays=6, ray_n_k=5)

# Boltzmann(T=2, mu=0): epsilon_g from the Dawson-function closed form below,
# minimised with scipy's bounded Brent search.
EPS_G_BOLTZMANN_T2 = 1.7891334954795188


def _gaussian_cosine_moment(T, mu, a):
    """int_0^inf t A exp(-beta t^2) cos(a t) dt with A = e^{mu/T} T/2, beta = T/4."""
    A, beta = math.exp(mu / T) * T / 2, T / 4
    return A * (1 / (2 * beta) - a / (2 * beta ** 1.5) * special.dawsn(a / (2 * math.sqrt(beta))))


def test_frozen_epsilon_g_constant_reproduces():
    res = optimize.minimize_scalar(lambda a: _gaussian_cosine_moment(2.0, 0.0, a), bounds=(0, 20),
                                   method="bounded", options={"xatol": 1e-12})
    assert -2 * math.pi * res.fun == pytest.approx(EPS_G_BOLTZMANN_T2, abs=1e-12)


@pytest.mark.parametrize("T,mu", [(2.0, 0.0), (1.0, 0.5), (3.0, -1.0)])
def test_epsilon_g_matches_gaussian_closed_form(T, mu):
    res = optimize.minimize_scalar(lambda a: _gaussian_cosine_moment(T, mu, a), bounds=(0, 40),
                                   method="bounded", options={"xatol": 1e-12})
    dist = MD.boltzmann(T, mu)
    eps = S.epsilon_g(dist)
    assert eps == pytest.approx(-2 * math.pi * res.fun, abs=1e-6)
    assert 0 <= eps <= gcheck_weighted_norm(dist)


def test_cosine_moment_matches_closed_form():
    dist = MD.boltzmann(2.0, 0.0)
    a = np.array([0.0, 0.5, 2.0, 7.0])
    np.testing.assert_allclose(S.cosine_moment(dist, a), _gaussian_cosine_moment(2.0, 0.0, a), atol=1e-11)


def test_epsilon_g_refinement_never_lowers_value():
    dist = MD.fermi_dirac(1.0, 1.0)
    vals = [S.epsilon_g_details(dist, refine=r).value for r in range(3)]
    scans = [S.epsilon_g_details(dist, refine=r).scan_min for r in range(3)]
    assert scans[0] >= scans[1] >= scans[2]
    assert all(v >= 0 for v in vals)


def test_epsilon_g_refuses_step_profile():
    with pytest.raises(AccuracyError):
        S.epsilon_g(MD.fermi_zero_t(1.0))


def test_no_interaction_gives_unit_margin(fermi_hot):
    zero = InteractionPotential.from_callable(lambda k: np.zeros_like(np.asarray(k, dtype=float)))
    assert S.stability_margin(fermi_hot, zero, SMALL_GRID).margin == 1.0


def test_margin_respects_analytic_lower_bound(fermi_hot):
    pot = InteractionPotential.gaussian(2.0, 1.0)
    rep = S.stability_margin(fermi_hot, pot, SMALL_GRID)
    assert rep.cond_linear
    lower = 1 - gcheck_weighted_norm(fermi_hot) * pot.sup_norm / (4 * math.pi)
    assert lower > 0
    assert rep.margin >= lower - float(rep.scan["est_error"].max())
    assert rep.imaginary_part_violations() == []


def test_theorem_conditions_boltzmann():
    rep = S.check_theorem_conditions(MD.boltzmann(1.0, 0.0), InteractionPotential.gaussian(1.0, 1.0))
    assert rep.weighted_norm == pytest.approx(2 * math.pi, rel=1e-8)
    assert rep.cond_linear is True
    assert rep.cond_negative_part is True


def test_linear_condition_equals_occupation_criterion():
    # gcheck >= 0 here, so the condition reads f(0) sup|w_hat| < 2.
    dist = MD.boltzmann(1.0, 0.0)
    for amp, expect in [(1.9, True), (2.1, False)]:
        rep = S.check_theorem_conditions(dist, InteractionPotential.gaussian(amp, 1.0))
        assert rep.cond_linear is expect


def test_scan_csv_is_deterministic(boltzmann_unit, gaussian_pot):
    a = S.scan_csv_text(S.stability_margin(boltzmann_unit, gaussian_pot, SMALL_GRID))
    b = S.scan_csv_text(S.stability_margin(boltzmann_unit, gaussian_pot, SMALL_GRID))
    assert a == b
    assert a.splitlines()[0] == ",".join(S.SCAN_CSV_HEADER)


def test_report_text_has_all_keys(boltzmann_unit, gaussian_pot):
    text = S.stability_margin(boltzmann_unit, gaussian_pot, SMALL_GRID).to_text()
    keys = [line.split("=", 1)[0] for line in text.splitlines()]
    assert {"margin", "epsilon_g", "cond_linear", "cond_negative_part", "l2_operator_bound",
            "grid_spec"} <= set(keys)


def test_instability_scan_crosses_for_root_growth():
    pot = InteractionPotential.from_callable(lambda k: np.abs(k) ** 0.25 * np.exp(-np.asarray(k) ** 2))
    scan = S.zero_temp_instability_scan(1.0, pot)
    assert scan.crossed
    lo, hi = scan.bracket
    assert (scan.product[scan.kmag == lo] + 1) * (scan.product[scan.kmag == hi] + 1) <= 0


def test_instability_scan_quiet_cases():
    zero = InteractionPotential.from_callable(lambda k: np.zeros_like(np.asarray(k, dtype=float)))
    assert not S.zero_temp_instability_scan(1.0, zero).crossed
    scan = S.zero_temp_instability_scan(1.0, InteractionPotential.gaussian(1.0, 1.0))
    # the product decays at large k
    assert abs(scan.product[-1]) < 1e-8
