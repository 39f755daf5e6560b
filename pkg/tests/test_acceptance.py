"""Acceptance criteria 1-15.  Each test records one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest
from scipy import optimize, special

from gasresponse import InteractionPotential, cli, lindhard as L
from gasresponse.distributions import MomentumDistribution as MD, gcheck_weighted_norm
from gasresponse.dynamics import (
    FinitePerturbation,
    LatticeState,
    SpaceTimeField,
    SpaceTimeGrid,
    apply_L1,
    invert_one_plus_L1,
    lattice_hartree_evolve,
    lattice_symbol,
    reversal_error,
    strichartz_details,
)
from gasresponse.heatmap import render_heatmap
from gasresponse.second_order import (
    SecondOrderKernel,
    det_hls_check,
    k2_l2l1_norm_direct,
    k2_norm_reduced_bound,
    random_gaussian_triples,
    reduction_identity_sides,
)
from gasresponse.stability import epsilon_g, zero_temp_instability_scan

FD_HOT = MD.fermi_dirac(100.0, 1.0, 2)
GAUSS_POT = InteractionPotential.gaussian(1.0, 1.0)


def _constant_pot(c):
    return InteractionPotential.from_callable(lambda k: np.full(np.shape(k), float(c)), label=f"const {c}")


def _random_perturbation(rng, rank):
    params = [(*rng.uniform(-1, 1, 2), rng.uniform(0.8, 1.5), *rng.uniform(-0.3, 0.3, 2),
               rng.uniform(-0.5, 0.5)) for _ in range(rank)]
    return FinitePerturbation.gaussians(params)


# --- 1 ---------------------------------------------------------------------------------------

def test_c01_closed_form_vs_time_oracle(criterion):
    dist = MD.fermi_zero_t(1.0, 2)
    W, K = np.meshgrid(np.linspace(-10, 10, 20), np.linspace(0.1, 5, 20), indexing="ij")
    w, k = W.ravel(), K.ravel()
    # keep away from the branch set |k^2 +- omega| = 2k
    assert np.minimum(np.abs(np.abs(k * k + w) - 2 * k), np.abs(np.abs(k * k - w) - 2 * k)).min() > 1e-3
    t0 = time.perf_counter()
    closed = np.array([L.m_fermi_2d(1.0, wi, ki).value for wi, ki in zip(w, k)])
    oracle, _ = L.m_oracle_grid(dist, w, k)
    elapsed = time.perf_counter() - t0
    err = float(np.abs(closed - oracle).max())
    ok = err <= 1e-6 and elapsed <= 60
    criterion("1 closed form vs oracle", ok, f"max |diff| = {err:.2e}, {elapsed:.1f} s")
    assert ok


# --- 2, 3, 4 ---------------------------------------------------------------------------------

def test_c02_static_plateau(criterion):
    ks = np.linspace(0.15, 1.95, 10)
    err = max(abs(L.m_fermi_2d(1.0, 0.0, k).value - 0.5) for k in ks)
    ok = err <= 1e-9
    criterion("2 static plateau", ok, f"max |m - 1/2| = {err:.1e}")
    assert ok


def test_c03_curve_formula(criterion):
    rng = np.random.default_rng(3)
    err = 0.0
    for mu, k in zip(rng.uniform(0.2, 4.0, 10), rng.uniform(0.05, 6.0, 10)):
        v = L.m_fermi_2d(mu, k * k + 2 * math.sqrt(mu) * k, k)
        err = max(err, abs(v.value - 0.5 * (1 - math.sqrt(1 + 2 * math.sqrt(mu) / k))))
    ok = err <= 1e-9
    criterion("3 curve formula", ok, f"max |diff| = {err:.1e}")
    assert ok


def test_c04_dimension_reduction(criterion):
    rng = np.random.default_rng(4)
    pts = list(zip(rng.uniform(-5, 5, 10), rng.uniform(0.1, 4, 10)))
    e2 = max(abs(L.m_fermi_d(2, 1.0, w, k).value - L.m_fermi_2d(1.0, w, k).value) for w, k in pts)
    e3 = max(abs(L.m_fermi_d(3, 1.0, w, k, route="m1").value - L.m_fermi_d(3, 1.0, w, k, route="m2").value)
             for w, k in pts)
    ok = e2 <= 1e-6 and e3 <= 1e-6
    criterion("4 dimension reduction", ok, f"d=2 {e2:.1e}, d=3 routes {e3:.1e}")
    assert ok


# --- 5, 6, 7 ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig_grid():
    omega = np.linspace(-20, 20, 10)
    kmag = np.linspace(0.6, 6.0, 10)
    W, K = np.meshgrid(omega, kmag, indexing="ij")
    w, k = W.ravel(), K.ravel()
    gen, gen_err = L.m_general_grid(FD_HOT, w, k)
    orc, orc_err = L.m_oracle_grid(FD_HOT, w, k)
    return omega, kmag, gen, gen_err, orc, orc_err


def test_c05_two_route_agreement(criterion, fig_grid, tmp_path):
    omega, kmag, gen, gen_err, orc, orc_err = fig_grid
    diff = np.abs(gen - orc)
    within = bool(np.all(diff <= gen_err + orc_err + 1e-15))
    worst = float(diff.max())
    pgm, csv_path, _ = render_heatmap(gen.real.reshape(10, 10).T[::-1], tmp_path / "fig.pgm")
    rows = len(csv_path.read_text().splitlines()) - 1
    ok = within and worst <= 1e-5 and rows == 100
    criterion("5 general vs oracle", ok, f"max |diff| = {worst:.1e}, within est_error: {within}, heatmap rows {rows}")
    assert ok


def test_c06a_uniform_bound(criterion, fig_grid):
    _, _, gen, _, _, _ = fig_grid
    bound = gcheck_weighted_norm(FD_HOT) / (4 * math.pi)
    worst = float(np.abs(gen).max())
    ok = worst <= bound + 1e-8
    criterion("6a uniform bound", ok, f"max |m| = {worst:.6f} <= {bound:.6f}")
    assert ok


def _ray_maximum(dist):
    a = np.concatenate([[0.0], np.logspace(-3, 1, 60)])
    k = np.full(a.shape, 1e-4)
    vals, _ = L.m_general_grid(dist, 2 * a * k, k)
    return float(vals.real.max())


@pytest.mark.xfail(strict=True, reason="gcheck of FermiDirac(T=100, mu=1) changes sign, so the "
                                       "limsup reaches only f(0)/2 = 0.922 of the bound")
def test_c06b_limsup_reaches_bound_fermi_dirac(criterion):
    bound = gcheck_weighted_norm(FD_HOT) / (4 * math.pi)
    top = _ray_maximum(FD_HOT)
    ok = top >= 0.95 * bound
    criterion("6b limsup on rays (FermiDirac T=100)", ok, f"max Re m = {top:.5f}, ratio {top / bound:.4f}")
    assert ok


def test_c06b_limsup_reaches_bound_positive_transform(criterion):
    dist = MD.boltzmann(1.0, 0.0, 2)
    bound = gcheck_weighted_norm(dist) / (4 * math.pi)
    top = _ray_maximum(dist)
    ok = top >= 0.95 * bound
    criterion("6b limsup on rays (Boltzmann, gcheck >= 0)", ok, f"ratio {top / bound:.6f}")
    assert ok


def test_c07_antisymmetry_and_sign(criterion, fig_grid):
    omega, kmag, gen, _, orc, _ = fig_grid
    W, K = np.meshgrid(omega, kmag, indexing="ij")
    w, k = W.ravel(), K.ravel()
    flip, _ = L.m_general_grid(FD_HOT, -w, k)
    oflip, _ = L.m_oracle_grid(FD_HOT, -w, k)
    anti = max(float(np.abs(gen.imag + flip.imag).max()), float(np.abs(orc.imag + oflip.imag).max()))
    rng = np.random.default_rng(7)
    dists = [FD_HOT, MD.boltzmann(1.0, 0.0), MD.fermi_dirac(1.0, 1.0), MD.bose_einstein(1.0, -0.5)]
    ws, ks = rng.uniform(0.01, 20, 200), rng.uniform(0.05, 6, 200)
    negative, skipped = True, 0
    for d in dists:
        # Im m is of size exp(-(C - mu)/T) with C = ((omega - k^2) / 2k)^2; points
        # where that underflows double precision carry no sign information
        C = ((ws - ks * ks) / (2 * ks)) ** 2
        keep = (C - max(d.mu, 0.0)) / d.temperature < 600.0
        skipped += int((~keep).sum())
        vals, _ = L.m_general_grid(d, ws[keep], ks[keep])
        negative &= bool(np.all(vals.imag < 0))
    neg_fig = bool(np.all(gen.imag[w > 0] < 0))
    ok = anti <= 1e-10 and negative and neg_fig
    criterion("7 antisymmetry and sign", ok, f"antisymmetry {anti:.1e}, Im m < 0 on all omega > 0 samples: {negative and neg_fig} "
              f"({skipped} of 800 random samples below double-precision range)")
    assert ok


# --- 8 ---------------------------------------------------------------------------------------

def test_c08_epsilon_g_oracle(criterion):
    A, beta = 1.0, 0.5  # Boltzmann(T=2, mu=0): gcheck(t) = exp(-t^2 / 2)

    def moment(a):
        return A * (1 / (2 * beta) - a / (2 * beta ** 1.5) * special.dawsn(a / (2 * math.sqrt(beta))))

    res = optimize.minimize_scalar(moment, bounds=(0, 20), method="bounded", options={"xatol": 1e-12})
    ref = -2 * math.pi * res.fun
    dist = MD.boltzmann(2.0, 0.0)
    eps = epsilon_g(dist)
    norm = gcheck_weighted_norm(dist)
    ok = abs(eps - ref) <= 1e-6 and 0 <= eps <= norm
    criterion("8 epsilon_g oracle", ok, f"eps_g = {eps:.12f}, closed form {ref:.12f}, norm {norm:.6f}")
    assert ok


# --- 9 ---------------------------------------------------------------------------------------

def test_c09a_instability_crossing(criterion):
    pot = InteractionPotential.from_callable(lambda k: np.abs(k) ** 0.25 * np.exp(-np.asarray(k) ** 2))
    scan = zero_temp_instability_scan(1.0, pot)
    ok = scan.crossed and scan.bracket is not None
    criterion("9a crossing for |k|^(1/4) e^(-k^2)", ok, f"bracket {scan.bracket}")
    assert ok


def test_c09b_no_crossing_small_constant(criterion):
    quiet = {c: zero_temp_instability_scan(1.0, _constant_pot(c)).crossed for c in (0.04, 0.01)}
    ok = not any(quiet.values())
    criterion("9b no crossing for constants 0.04, 0.01", ok, f"crossed: {quiet}")
    assert ok


@pytest.mark.xfail(strict=True, reason="c (1 - sqrt(1 + 2/k)) / 2 = -1 at k = 2/((1 + 2/c)^2 - 1), "
                                       "inside [1e-3, 1e2] for every c > 0.0457")
def test_c09b_no_crossing_at_constant_tenth(criterion):
    scan = zero_temp_instability_scan(1.0, _constant_pot(0.1))
    k_star = 2 / ((1 + 2 / 0.1) ** 2 - 1)
    ok = not scan.crossed
    criterion("9b no crossing for constant 0.1", ok, f"bracket {scan.bracket}, predicted k = {k_star:.5f}")
    assert ok


# --- 10, 11 ----------------------------------------------------------------------------------

def test_c10_multiplier_round_trip(criterion):
    grid = SpaceTimeGrid(64, 64, 16.0, 32.0)
    rng = np.random.default_rng(10)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(5):
        phi = SpaceTimeField.random(grid, rng)
        back = invert_one_plus_L1(phi + apply_L1(phi, FD_HOT, GAUSS_POT), FD_HOT, GAUSS_POT)
        worst = max(worst, (back - phi).l2_norm() / phi.l2_norm())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed <= 120
    criterion("10 multiplier round trip", ok, f"max rel L2 error {worst:.1e}, {elapsed:.1f} s")
    assert ok


def test_c11_strichartz_scaling(criterion):
    rng = np.random.default_rng(11)
    q0 = _random_perturbation(rng, 3)
    base = strichartz_details(q0).ratio
    spread = max(abs(strichartz_details(q0.rescaled(lam)).ratio - base) / base
                 for lam in (0.25, 0.5, 1.0, 2.0, 4.0))
    ensemble = [strichartz_details(_random_perturbation(rng, int(rng.integers(1, 4)))).ratio for _ in range(20)]
    finite = all(math.isfinite(r) and r > 0 for r in ensemble)
    ok = spread <= 1e-6 and finite
    criterion("11 Strichartz scaling", ok,
              f"rel spread {spread:.1e}; ensemble ratios in [{min(ensemble):.4f}, {max(ensemble):.4f}]")
    assert ok


# --- 12 --------------------------------------------------------------------------------------

@pytest.mark.slow
def test_c12_lattice_conservation(criterion):
    dist = MD.fermi_dirac(1.0, 1.0)
    q0 = _random_perturbation(np.random.default_rng(12), 3)
    state = LatticeState.build(dist, GAUSS_POT, M=16, q0=q0)
    assert state.lattice.size == 33 ** 2
    err, fwd, _ = reversal_error(state, 10.0, 0.125)
    vac = lattice_hartree_evolve(LatticeState.build(dist, GAUSS_POT, M=16), 10.0, 0.125)
    vac_dev = float(vac.sup_density_dev.max())
    ok = (err <= 1e-6 and fwd.trace_drift <= 1e-8 and fwd.max_spec_drift <= 1e-6 and vac_dev <= 1e-12)
    criterion("12 lattice conservation", ok,
              f"reversal {err:.1e}, trace drift {fwd.trace_drift:.1e}, spectral drift "
              f"{fwd.max_spec_drift:.1e}, vacuum deviation {vac_dev:.1e}")
    assert ok


# --- 13, 14 ----------------------------------------------------------------------------------

def test_c13_second_order_reduction(criterion):
    kern = SecondOrderKernel(MD.boltzmann(1.0, 0.0), GAUSS_POT)
    rng = np.random.default_rng(13)
    ident, slack = 0.0, -math.inf
    n = 0
    while n < 10:
        k, l = rng.normal(size=2), rng.normal(size=2)
        if abs(k[0] * l[1] - k[1] * l[0]) < 0.1:
            continue
        n += 1
        lhs, rhs = reduction_identity_sides(kern, k, l)
        ident = max(ident, abs(lhs - rhs) / rhs)
        direct, bound = k2_l2l1_norm_direct(kern, k, l), k2_norm_reduced_bound(kern, k, l)
        slack = max(slack, direct / bound - 1)
    ok = ident <= 1e-4 and slack <= 1e-6
    criterion("13 second-order reduction", ok, f"identity rel error {ident:.1e}, max direct/bound - 1 = {slack:.3f}")
    assert ok


def test_c14_det_hls(criterion):
    rep = det_hls_check(random_gaussian_triples(100, seed=14))
    finite = all(math.isfinite(r.ratio) for r in rep.rows)
    ok = finite and rep.max_dilation_defect <= 1e-3 and rep.max_delta_seq <= 0.01
    criterion("14 det-HLS", ok, f"max ratio {rep.max_ratio:.4f}, dilation defect {rep.max_dilation_defect:.1e}, "
                                f"slab sequence {rep.max_delta_seq:.1e}")
    assert ok


# --- 15 --------------------------------------------------------------------------------------

def test_c15_cli_determinism(criterion, tmp_path):
    (tmp_path / "fd.cfg").write_text("[distribution]\nfamily = FermiDirac\ntemperature = 100\nmu = 1\n")
    (tmp_path / "bz.cfg").write_text("[distribution]\nfamily = Boltzmann\ntemperature = 1\nmu = 0\n")
    (tmp_path / "pot.cfg").write_text("[potential]\nfamily = Gaussian\namplitude = 1\nwidth = 1\n")
    fd, bz, pot = (str(tmp_path / n) for n in ("fd.cfg", "bz.cfg", "pot.cfg"))
    runs = {
        "lindhard-eval": ["--dist", fd, "--grid", "omega_min=-3,omega_max=3,n_omega=4,k_min=0.5,k_max=2,n_k=3"],
        "stability-check": ["--dist", fd, "--pot", pot, "--grid", "n_k=12,n_omega=12,n_rays=4,ray_n_k=3"],
        "epsilon-g": ["--dist", bz],
        "simulate-linear": ["--dist", fd, "--pot", pot, "--grid", "n_t=8,n_x=16,T=2,L=24"],
        "simulate-lattice": ["--dist", fd, "--pot", pot, "--grid", "M=4,L=12.566370614359172,horizon=1,dt=0.25"],
        "second-order-check": ["--dist", bz, "--pot", pot, "--grid", "n_pairs=2,n_triples=3"],
        "figure1": [],
    }
    same = {}
    for cmd, extra in runs.items():
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cmd}-{rep}"
            assert cli.main([cmd, *extra, "--out", str(out), "--seed", "5"]) == 0
            outs.append(out)
        m1, m2 = ((o / "manifest.json").read_bytes() for o in outs)
        files_equal = all((outs[0] / a["file"]).read_bytes() == (outs[1] / a["file"]).read_bytes()
                          for a in json.loads(m1)["artifacts"])
        same[cmd] = m1 == m2 and files_equal
    ok = all(same.values())
    criterion("15 CLI determinism", ok, ", ".join(f"{c}={'same' if s else 'DIFF'}" for c, s in same.items()))
    assert ok
