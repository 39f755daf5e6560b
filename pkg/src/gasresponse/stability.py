"""Stability conditions for the linearised Hartree response in two dimensions.

The margin ``min |w_hat(k) m_f(omega, k) + 1|`` is scanned on a logarithmic
frequency-momentum grid.  Only omega >= 0 is evaluated: m_f(-omega, k) is the
complex conjugate of m_f(omega, k) and w_hat is real, so |w_hat m_f + 1| is even
in omega.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
import io
import math
from typing import Optional

import numpy as np
from scipy import optimize

from .distributions import (
    Family,
    MomentumDistribution,
    eval_f_derivative,
    gcheck_weighted_norm,
    radial_profile,
    support_radius,
)
from .errors import AccuracyError, ParameterDomainError, PreconditionError
from .lindhard import FrequencyMomentumPoint, m2_fermi_raw, m_general_grid, uniform_bound
from .potentials import InteractionPotential
from .quadrature import composite_nodes

__all__ = [
    "ScanGrid",
    "StabilityReport",
    "EpsilonG",
    "InstabilityScan",
    "cosine_moment",
    "epsilon_g",
    "epsilon_g_details",
    "stability_margin",
    "check_theorem_conditions",
    "zero_temp_instability_scan",
    "write_scan_csv",
    "SCAN_CSV_HEADER",
]

FOUR_PI = 4.0 * math.pi
POINT_TOL = 1e-6
SCAN_CSV_HEADER = ("omega", "kmag", "re_m", "im_m", "w_hat", "abs_one_plus_wm")


def _require_2d(dist):
    if dist.dimension != 2:
        raise PreconditionError(f"stability conditions are stated for d = 2, got d = {dist.dimension}")


# --- epsilon_g ------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _moment_nodes(dist, a_max):
    """Quadrature nodes for int_0^inf t gcheck(t) cos(a t) dt, a <= a_max, and a
    bound on the neglected tail."""
    prof = radial_profile(dist)
    ell = prof.length_scale
    if math.isinf(prof.decay_exponent_a):
        R = support_radius(dist)
        tail = 0.0
    else:
        a = prof.decay_exponent_a
        if not a > 2.0:
            raise AccuracyError("first moment of gcheck diverges "
                                f"(decay exponent {a:.3g} <= 2)", achieved=a)
        R = 1000.0 * ell
        tail = R * R * abs(float(prof.eval(np.array([R]))[0])) / (a - 2.0)
    # 16 Gauss nodes per half period of the fastest cosine
    npan = max(64, int(math.ceil(R * (a_max + 4.0 / ell) / math.pi)))
    x, w = composite_nodes(np.linspace(0.0, R, npan + 1), 16)
    tg = w * x * prof.eval(x)
    tg.setflags(write=False)
    x.setflags(write=False)
    return x, tg, tail


def cosine_moment(dist, a, a_max=None):
    """int_0^inf t gcheck(t) cos(a t) dt for an array of a >= 0."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a_max is None:
        a_max = float(a.max())
    x, tg, _ = _moment_nodes(dist, float(a_max))
    out = np.empty(a.shape)
    for i in range(0, a.size, 64):
        out[i:i + 64] = np.cos(np.multiply.outer(a[i:i + 64], x)) @ tg
    return out


@dataclass(frozen=True)
class EpsilonG:
    """Outcome of the epsilon_g minimisation.

    ``value = max(0, -2 pi * moment_min)`` with ``moment_min`` the smaller of the
    grid minimum and its golden-section refinement.
    """

    value: float
    a_min: float
    moment_min: float
    scan_min: float
    n_scan: int
    est_error: float


def epsilon_g_details(dist, *, refine=0, n_base=64, decades=(-2.0, 2.0)):
    """Minimise a -> int_0^inf t gcheck(t) cos(a t) dt over a >= 0.

    The scan uses ``n_base * 2**refine`` log-spaced intervals in
    ``[10**decades[0], 10**decades[1]] / length_scale`` plus a = 0, so each
    refinement level contains the previous grid and can only lower
    ``scan_min``.
    """
    _require_2d(dist)
    if dist.family is Family.FERMI_ZERO_T:
        raise AccuracyError("the first moment of gcheck diverges for the zero-temperature Fermi sea")
    ell = radial_profile(dist).length_scale
    n = n_base * 2 ** int(refine)
    lo, hi = decades
    a_max = 10.0 ** hi / ell
    grid = np.concatenate([[0.0], np.logspace(lo, hi, n + 1) / ell])
    vals = cosine_moment(dist, grid, a_max)
    i = int(np.argmin(vals))
    scan_min = float(vals[i])
    best_a, best = float(grid[i]), scan_min
    if 0 < i < grid.size - 1:
        def moment(a):
            return float(cosine_moment(dist, [a], a_max)[0])

        res = optimize.minimize_scalar(moment, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                       method="golden", tol=1e-10)
        if res.fun < best and grid[i - 1] <= res.x <= grid[i + 1]:
            best_a, best = float(res.x), float(res.fun)
    _, _, tail = _moment_nodes(dist, a_max)
    value = max(0.0, -2.0 * math.pi * best)
    est = 2.0 * math.pi * (tail + 1e-12 * abs(float(vals[0])))
    return EpsilonG(value, best_a, best, scan_min, int(grid.size), est)


def epsilon_g(dist):
    """Negative-part amplitude -4 pi liminf Re m_f at the space-time origin.

    Computed as ``-2 pi min_{a >= 0} int_0^inf t gcheck(t) cos(a t) dt``, clipped
    at 0 (the a -> infinity limit of the integral is 0).
    """
    return epsilon_g_details(dist).value


# --- margin scan ------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanGrid:
    """Logarithmic (omega, k) scan with omega = 0 and near-origin rays.

    Rays follow omega = a * 2k, the directions along which m_f has its
    different limits at the origin.
    """

    k_min: float = 1e-3
    k_max: float = 1e2
    n_k: int = 200
    omega_min: float = 1e-4
    omega_max: float = 1e4
    n_omega: int = 200
    n_rays: int = 50
    ray_a_min: float = 1e-3
    ray_a_max: float = 1e1
    ray_k_min: float = 1e-4
    ray_k_max: float = 1e-1
    ray_n_k: int = 20

    def __post_init__(self):
        if not (0 < self.k_min < self.k_max and 0 < self.omega_min < self.omega_max):
            raise ParameterDomainError("scan ranges must satisfy 0 < min < max")
        if self.n_k < 1 or self.n_omega < 1 or self.n_rays < 0 or self.ray_n_k < 1:
            raise ParameterDomainError("scan counts must be positive")

    def points(self):
        """(omega, k) arrays in a fixed order: product grid, omega = 0, rays."""
        k = np.logspace(math.log10(self.k_min), math.log10(self.k_max), self.n_k)
        w = np.logspace(math.log10(self.omega_min), math.log10(self.omega_max), self.n_omega)
        K, W = np.meshgrid(k, w, indexing="ij")
        omega = [W.ravel(), np.zeros_like(k)]
        kmag = [K.ravel(), k]
        if self.n_rays:
            a = np.logspace(math.log10(self.ray_a_min), math.log10(self.ray_a_max), self.n_rays)
            kr = np.logspace(math.log10(self.ray_k_min), math.log10(self.ray_k_max), self.ray_n_k)
            A, KR = np.meshgrid(a, kr, indexing="ij")
            omega.append((2 * A * KR).ravel())
            kmag.append(KR.ravel())
        return np.concatenate(omega), np.concatenate(kmag)

    def describe(self):
        return (f"k=log[{self.k_min:g},{self.k_max:g}]x{self.n_k}; "
                f"omega=log[{self.omega_min:g},{self.omega_max:g}]x{self.n_omega} plus omega=0; "
                f"rays omega=2ak, a=log[{self.ray_a_min:g},{self.ray_a_max:g}]x{self.n_rays}, "
                f"k=log[{self.ray_k_min:g},{self.ray_k_max:g}]x{self.ray_n_k}; "
                "omega<0 by conjugate symmetry")


@dataclass(frozen=True, eq=False)
class StabilityReport:
    margin: float
    margin_argmin: Optional[FrequencyMomentumPoint]
    epsilon_g: float
    cond_linear: Optional[bool]
    cond_negative_part: Optional[bool]
    l2_operator_bound: float
    grid_spec: str
    weighted_norm: float = math.nan
    excluded_points: tuple = ()
    scan: Optional[dict] = field(default=None, repr=False)

    def to_text(self):
        """Deterministic key=value rendering."""
        arg = self.margin_argmin
        items = [
            ("margin", repr(float(self.margin))),
            ("margin_argmin_omega", repr(float(arg.omega)) if arg else "none"),
            ("margin_argmin_kmag", repr(float(arg.kmag)) if arg else "none"),
            ("epsilon_g", repr(float(self.epsilon_g))),
            ("cond_linear", _fmt_flag(self.cond_linear)),
            ("cond_negative_part", _fmt_flag(self.cond_negative_part)),
            ("l2_operator_bound", repr(float(self.l2_operator_bound))),
            ("weighted_norm", repr(float(self.weighted_norm))),
            ("excluded_points", str(len(self.excluded_points))),
            ("grid_spec", self.grid_spec),
        ]
        return "".join(f"{k}={v}\n" for k, v in items)

    def imaginary_part_violations(self, tol=1e-10):
        """Scanned points off the axes where Im m_f ~ 0 and Re(w m_f) ~ -1."""
        if self.scan is None:
            return []
        s = self.scan
        off_axis = (s["omega"] != 0) & (s["kmag"] != 0)
        bad = off_axis & (np.abs(s["im_m"]) < tol) & (np.abs(s["w_hat"] * s["re_m"] + 1) < tol)
        return list(zip(s["omega"][bad], s["kmag"][bad]))


def _fmt_flag(v):
    return "none" if v is None else ("true" if v else "false")


def _strictly_decreasing(dist):
    if dist.family in (Family.FERMI_DIRAC, Family.BOSE_EINSTEIN, Family.BOLTZMANN):
        return True
    if dist.family is Family.TABULATED:
        r = np.linspace(dist.table_r[0], dist.table_r[-1], 2001)[1:-1]
        return bool(np.all(eval_f_derivative(dist, r) < 0))
    return False


def check_theorem_conditions(dist, pot):
    """Evaluate the smallness and negative-part conditions without a scan.

    ``margin`` is the analytic lower bound 1 - sup|w_hat| * sup|m_f|, clipped at 0.
    """
    _require_2d(dist)
    norm = gcheck_weighted_norm(dist)
    ub = uniform_bound(dist)
    sup_w = pot.sup_norm
    cond_linear = norm * sup_w < FOUR_PI
    eps = epsilon_g(dist)
    cond_neg = None
    if _strictly_decreasing(dist):
        cond_neg = max(eps * pot.what_zero_plus, norm * pot.neg_part_sup) < FOUR_PI
    bound = sup_w * ub
    return StabilityReport(max(0.0, 1.0 - bound), None, eps, cond_linear, cond_neg, bound,
                           "analytic", norm)


def _lindhard_values(dist, omega, kmag):
    if dist.family is Family.FERMI_ZERO_T:
        vals = m2_fermi_raw(dist.mu, omega, kmag)
        return vals, np.zeros(omega.shape)
    return m_general_grid(dist, omega, kmag)


def stability_margin(dist, pot, grid=None):
    """Scan |w_hat(k) m_f(omega, k) + 1| and report its minimum.

    Points whose Lindhard error estimate exceeds 1e-6 are excluded and listed
    in ``excluded_points``.  Ties in the minimum go to the smallest (k, omega).
    """
    _require_2d(dist)
    grid = grid or ScanGrid()
    omega, kmag = grid.points()
    vals, errs = _lindhard_values(dist, omega, kmag)
    what = np.asarray(pot(kmag), dtype=float)
    absval = np.abs(what * vals + 1.0)
    ok = np.isfinite(absval) & (errs <= POINT_TOL)
    excluded = tuple(zip(omega[~ok].tolist(), kmag[~ok].tolist()))
    idx = np.nonzero(ok)[0]
    order = np.lexsort((omega[idx], kmag[idx], absval[idx]))
    best = idx[order[0]]
    try:
        cond = check_theorem_conditions(dist, pot)
    except AccuracyError:
        # zero-temperature Fermi sea: the weighted norm diverges
        cond = StabilityReport(math.nan, None, math.nan, None, None, math.inf, "", math.inf)
    scan = {
        "omega": omega, "kmag": kmag, "re_m": vals.real, "im_m": vals.imag,
        "w_hat": what, "abs_one_plus_wm": absval, "est_error": errs,
    }
    return StabilityReport(float(absval[best]), FrequencyMomentumPoint(float(omega[best]), float(kmag[best])),
                           cond.epsilon_g, cond.cond_linear, cond.cond_negative_part,
                           cond.l2_operator_bound, grid.describe(), cond.weighted_norm,
                           excluded, scan)


def write_scan_csv(report, path_or_buffer):
    """Full scan table, one row per point, repr-precision floats."""
    if report.scan is None:
        raise ParameterDomainError("report carries no scan")
    own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_CSV_HEADER)
        cols = [report.scan[name] for name in SCAN_CSV_HEADER]
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    finally:
        if own:
            fh.close()


def scan_csv_text(report):
    buf = io.StringIO()
    write_scan_csv(report, buf)
    return buf.getvalue()


# --- zero temperature ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InstabilityScan:
    """w_hat(k) m_2^F(mu, k^2 + 2 sqrt(mu) k, k) along a log-spaced k grid."""

    kmag: np.ndarray
    product: np.ndarray
    crossed: bool
    bracket: Optional[tuple]
    min_product: float


def zero_temp_instability_scan(mu, pot, *, k_min=1e-3, k_max=1e2, n=2001):
    """Look for a crossing of -1 along the curve omega = k^2 + 2 sqrt(mu) k.

    On that curve m_2^F is real and equals (1 - sqrt(1 + 2 sqrt(mu)/k))/2.
    ``bracket`` is the first grid interval over which the product crosses -1.
    """
    if not mu > 0:
        raise ParameterDomainError("mu must be > 0")
    k = np.logspace(math.log10(k_min), math.log10(k_max), int(n))
    m = m2_fermi_raw(mu, k * k + 2 * math.sqrt(mu) * k, k).real
    prod = np.asarray(pot(k), dtype=float) * m
    shifted = prod + 1.0
    hits = np.nonzero(shifted[:-1] * shifted[1:] <= 0)[0]
    bracket = (float(k[hits[0]]), float(k[hits[0] + 1])) if hits.size else None
    return InstabilityScan(k, prod, bool(hits.size), bracket, float(prod.min()))
