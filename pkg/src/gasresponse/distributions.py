"""Momentum distributions f, their radial profiles g(k) = f(|k|^2), and the
radial Fourier inverse of g together with the scalar functionals of it that
the stability conditions need.

Fourier convention: ``gcheck(x) = (2 pi)^(-d/2) * integral g(k) exp(i k.x) dk``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
import math
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize, special
from scipy.interpolate import PchipInterpolator

from .errors import AccuracyError, ParameterDomainError, UnsupportedOperationError
from .quadrature import composite_nodes, gauss_legendre, sphere_area

__all__ = [
    "Family",
    "MomentumDistribution",
    "RadialProfile",
    "SmoothnessReport",
    "eval_f",
    "eval_f_derivative",
    "f_derivative",
    "gcheck",
    "gcheck_weighted_norm",
    "check_smoothness_condition",
    "radial_fourier_inverse",
    "radial_profile",
    "load_table",
    "gcheck_exponential_terms",
    "support_radius",
]

# exp(-TAIL_DECADES) is far below double precision relative to f(0)
TAIL_DECADES = 40.0


class Family(str, Enum):
    FERMI_ZERO_T = "FermiZeroT"
    FERMI_DIRAC = "FermiDirac"
    BOSE_EINSTEIN = "BoseEinstein"
    BOLTZMANN = "Boltzmann"
    TABULATED = "Tabulated"


_SMOOTH = {Family.FERMI_DIRAC, Family.BOSE_EINSTEIN, Family.BOLTZMANN, Family.TABULATED}


@dataclass(frozen=True)
class MomentumDistribution:
    """Occupation profile f of a homogeneous gas, gamma_f = f(-Laplacian).

    Instances are immutable and hashable, so cached per-distribution data
    (radial profiles, Lindhard grids) can be keyed on them directly.
    """

    family: Family
    mu: float = 0.0
    temperature: Optional[float] = None
    dimension: int = 2
    table_r: Optional[tuple] = field(default=None, repr=False)
    table_f: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ParameterDomainError(f"dimension must be an integer >= 1, got {self.dimension}")
        fam = self.family
        if fam is Family.FERMI_ZERO_T:
            if not self.mu > 0:
                raise ParameterDomainError("FermiZeroT requires mu > 0")
        elif fam is Family.TABULATED:
            if self.table_r is None or self.table_f is None:
                raise ParameterDomainError("Tabulated family requires a (r, f) table")
            r = np.asarray(self.table_r, dtype=float)
            f = np.asarray(self.table_f, dtype=float)
            if r.ndim != 1 or r.shape != f.shape or r.size < 2:
                raise ParameterDomainError("table must hold two equal-length columns")
            if np.any(np.diff(r) <= 0):
                raise ParameterDomainError("table r column must be strictly increasing")
            if r[0] < 0 or np.any(f < 0):
                raise ParameterDomainError("table must have r >= 0 and f >= 0")
        else:
            if self.temperature is None or not self.temperature > 0:
                raise ParameterDomainError(f"{fam.value} requires temperature > 0")
            if fam is Family.BOSE_EINSTEIN and not self.mu < 0:
                raise ParameterDomainError("BoseEinstein requires mu < 0")

    # convenience constructors -------------------------------------------------
    @classmethod
    def fermi_zero_t(cls, mu, dimension=2):
        return cls(Family.FERMI_ZERO_T, mu=mu, dimension=dimension)

    @classmethod
    def fermi_dirac(cls, temperature, mu, dimension=2):
        return cls(Family.FERMI_DIRAC, mu=mu, temperature=temperature, dimension=dimension)

    @classmethod
    def bose_einstein(cls, temperature, mu, dimension=2):
        return cls(Family.BOSE_EINSTEIN, mu=mu, temperature=temperature, dimension=dimension)

    @classmethod
    def boltzmann(cls, temperature, mu, dimension=2):
        return cls(Family.BOLTZMANN, mu=mu, temperature=temperature, dimension=dimension)

    @classmethod
    def tabulated(cls, r, f, dimension=2):
        return cls(Family.TABULATED, dimension=dimension,
                   table_r=tuple(float(v) for v in r), table_f=tuple(float(v) for v in f))

    @property
    def is_smooth(self):
        return self.family in _SMOOTH

    @property
    def r_cut(self):
        """Energy beyond which f (and all its derivatives) are negligible."""
        fam = self.family
        if fam is Family.FERMI_ZERO_T:
            return self.mu
        if fam is Family.TABULATED:
            return self.table_r[-1]
        return max(self.mu, 0.0) + TAIL_DECADES * self.temperature

    @property
    def k_scale(self):
        """Characteristic momentum; 1/k_scale sets the length scale of gcheck."""
        fam = self.family
        if fam is Family.FERMI_ZERO_T:
            return math.sqrt(self.mu)
        if fam is Family.TABULATED:
            return math.sqrt(self.table_r[-1])
        return math.sqrt(max(abs(self.mu), self.temperature))

    def with_dimension(self, d):
        return MomentumDistribution(self.family, self.mu, self.temperature, d,
                                    self.table_r, self.table_f)


def load_table(path):
    """Read a two-column ``r,f`` CSV (optional header) into arrays."""
    data = np.genfromtxt(path, delimiter=",", comments="#", names=None, dtype=float)
    if data.ndim == 2 and np.isnan(data[0]).all():
        data = data[1:]
    if data.ndim != 2 or data.shape[1] != 2:
        raise ParameterDomainError(f"{path}: expected two columns r,f")
    return data[:, 0], data[:, 1]


@lru_cache(maxsize=32)
def _pchip(dist):
    return PchipInterpolator(np.asarray(dist.table_r), np.asarray(dist.table_f), extrapolate=False)


def _tabulated_eval(dist, r, order):
    r = np.asarray(r, dtype=float)
    interp = _pchip(dist)
    rr = np.maximum(r, dist.table_r[0])
    out = interp(rr, nu=order) if order else interp(rr)
    out = np.where(r > dist.table_r[-1], 0.0, out)
    if order:
        out = np.where(r < dist.table_r[0], 0.0, out)
    return np.nan_to_num(out)


# d^k f / dx^k = P_k(s) where s is f itself written as a function of
# x = (r - mu)/T; ds/dx = q(s) closes the recursion.
_Q = {
    Family.FERMI_DIRAC: Polynomial([0.0, -1.0, 1.0]),      # -s(1-s)
    Family.BOSE_EINSTEIN: Polynomial([0.0, -1.0, -1.0]),   # -b(1+b)
    Family.BOLTZMANN: Polynomial([0.0, -1.0]),             # -e
}


@lru_cache(maxsize=None)
def _derivative_poly(family, order):
    p = Polynomial([0.0, 1.0])
    for _ in range(order):
        p = p.deriv() * _Q[family]
    return p


def _base_value(dist, r):
    x = (np.asarray(r, dtype=float) - dist.mu) / dist.temperature
    fam = dist.family
    if fam is Family.FERMI_DIRAC:
        return special.expit(-x)
    if fam is Family.BOSE_EINSTEIN:
        return 1.0 / np.expm1(x)
    return np.exp(-x)


def f_derivative(dist, r, order=0):
    """k-th derivative of f at r (k = 0 gives f itself); vectorised."""
    fam = dist.family
    r = np.asarray(r, dtype=float)
    if fam is Family.FERMI_ZERO_T:
        if order:
            raise UnsupportedOperationError(
                "FermiZeroT has only a distributional derivative (a delta at r = mu)")
        return np.where(r <= dist.mu, 1.0, 0.0)
    if fam is Family.TABULATED:
        return _tabulated_eval(dist, r, order)
    s = _base_value(dist, r)
    if order == 0:
        return s
    return _derivative_poly(fam, order)(s) / dist.temperature ** order


def eval_f(dist, r):
    """Occupation f(r) for r >= 0."""
    if np.any(np.asarray(r) < 0):
        raise ParameterDomainError("f is defined for r >= 0 only")
    out = f_derivative(dist, r, 0)
    return float(out) if np.ndim(out) == 0 else out


def eval_f_derivative(dist, r):
    """f'(r); analytic for the thermal families, derivative of the monotone
    cubic interpolant for tabulated data."""
    if not dist.is_smooth:
        raise UnsupportedOperationError(
            f"{dist.family.value} has no pointwise derivative")
    out = f_derivative(dist, r, 1)
    return float(out) if np.ndim(out) == 0 else out


# --- radial Fourier inverse --------------------------------------------------

def _radial_kernel(d, k, r):
    """Integrand kernel K with gcheck(r) = int_0^kmax g(k) K(k, r) dk."""
    if d == 1:
        return math.sqrt(2.0 / math.pi) * np.cos(k * r)
    if d == 2:
        return special.j0(k * r) * k
    if d == 3:
        return math.sqrt(2.0 / math.pi) * k * k * np.sinc(k * r / math.pi)
    nu = d / 2.0 - 1.0
    kr = np.maximum(k * r, 1e-300)
    # r^(1-d/2) J_nu(kr) k^(d/2) written with (kr)^(-nu) J_nu(kr), finite at 0
    return special.jv(nu, kr) * kr ** (-nu) * k ** (d - 1)


def radial_fourier_inverse(g, d, radii, kmax, *, rtol=1e-12, base_panels=32,
                           order=16, max_doublings=8, return_error=False):
    """(2 pi)^(-d/2) int_{|k| <= kmax} g(|k|) e^{ik.x} dk at |x| = radii.

    Composite Gauss-Legendre in k with panels fine enough to follow the kernel
    oscillation at the largest radius; the panel count is doubled until two
    successive results agree to ``rtol`` relative to the L1 size of g.
    ``g`` must be vectorised.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    rmax = float(radii.max()) if radii.size else 0.0
    n = max(base_panels, int(math.ceil(kmax * rmax / math.pi)) + base_panels)

    def run(npan):
        nodes, weights = composite_nodes(np.linspace(0.0, kmax, npan + 1), order)
        gw = g(nodes) * weights
        out = np.empty(radii.shape)
        chunk = max(1, 2_000_000 // nodes.size)
        for i in range(0, radii.size, chunk):
            rr = radii[i:i + chunk, None]
            out[i:i + chunk] = _radial_kernel(d, nodes[None, :], rr) @ gw
        scale = np.abs(gw * _radial_kernel(d, nodes, 0.0)).sum()
        return out, scale

    prev, scale = run(n)
    for _ in range(max_doublings):
        n *= 2
        cur, scale = run(n)
        err = np.abs(cur - prev)
        if err.max() <= rtol * max(scale, 1e-300):
            break
        prev = cur
    else:
        raise AccuracyError("radial Fourier quadrature did not converge",
                            achieved=float(err.max() / max(scale, 1e-300)))
    if return_error:
        return cur, np.maximum(err, 4 * np.finfo(float).eps * scale)
    return cur


# --- closed forms --------------------------------------------------------------

def _fermi_zero_t_gcheck(mu, d, radius):
    r = np.asarray(radius, dtype=float)
    sq = math.sqrt(mu)
    if d == 1:
        return math.sqrt(2.0 / math.pi) * sq * np.sinc(sq * r / math.pi)
    # reduction integral, u = sin(theta) removes the sqrt(1-u^2) endpoint
    rmax = float(np.max(r)) if r.size else 0.0
    order = 64 if sq * rmax <= 40 else int(math.ceil(1.5 * sq * rmax)) + 40
    th, wt = gauss_legendre(0.0, 0.5 * math.pi, order)
    c, s = np.cos(th), np.sin(th)
    pref = 2.0 * sphere_area(d - 2) / (2.0 * math.pi) ** (d / 2.0) * mu ** ((d - 1) / 2.0)
    # sin(sq r c)/r = sq c sinc(...)
    arg = sq * np.multiply.outer(r, c)
    vals = sq * c * np.sinc(arg / math.pi) * s ** (d - 2) * c
    return pref * (vals @ wt)


def _boltzmann_gcheck(dist, radius):
    T, d = dist.temperature, dist.dimension
    r = np.asarray(radius, dtype=float)
    return math.exp(dist.mu / T) * (T / 2.0) ** (d / 2.0) * np.exp(-T * r * r / 4.0)


def g_of_k(dist):
    """Vectorised g(k) = f(k^2)."""
    return lambda k: f_derivative(dist, np.asarray(k) ** 2, 0)


def kmax(dist):
    return math.sqrt(dist.r_cut)


# --- profile ---------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """gcheck as a function of radius, with its certified decay exponent."""

    eval: Callable
    closed_form: bool
    decay_exponent_a: float
    length_scale: float
    dimension: int

    def __call__(self, radius):
        return self.eval(radius)


def _raw_gcheck(dist):
    fam, d = dist.family, dist.dimension
    if fam is Family.FERMI_ZERO_T:
        return (lambda r: _fermi_zero_t_gcheck(dist.mu, d, r)), True
    if fam is Family.BOLTZMANN:
        return (lambda r: _boltzmann_gcheck(dist, r)), True
    g = g_of_k(dist)
    km = kmax(dist)
    return (lambda r: radial_fourier_inverse(g, d, r, km)), False


def _certify_decay(func, length, value0):
    """Fit |gcheck| ~ r^(-a) over the last decade [10 l, 100 l] of radii.

    Returns inf when the envelope sinks to the quadrature floor inside the
    decade (faster than any power).
    """
    radii = length * np.logspace(1.0, 2.0, 400)
    vals = np.abs(func(radii))
    bins = np.array_split(np.arange(radii.size), 10)
    env = np.array([vals[b].max() for b in bins])
    centres = np.array([radii[b].mean() for b in bins])
    floor = 1e-12 * max(abs(value0), 1e-300)
    if env[-1] <= floor:
        return math.inf
    slope = np.polyfit(np.log(centres), np.log(env), 1)[0]
    return float(-slope)


@lru_cache(maxsize=64)
def radial_profile(dist):
    """Cached RadialProfile of a distribution."""
    func, closed = _raw_gcheck(dist)
    length = 1.0 / dist.k_scale
    a = _certify_decay(func, length, float(func(np.array([0.0]))[0]))
    return RadialProfile(func, closed, a, length, dist.dimension)


def gcheck(dist, radius):
    """Radial Fourier inverse of g at the given radius (scalar or array)."""
    r = np.asarray(radius, dtype=float)
    if np.any(r < 0):
        raise ParameterDomainError("gcheck takes radius >= 0")
    out = radial_profile(dist).eval(np.atleast_1d(r))
    return float(out[0]) if r.ndim == 0 else out


@lru_cache(maxsize=64)
def support_radius(dist, rel=1e-15):
    """Radius beyond which |gcheck| stays below ``rel`` times its peak.

    Only meaningful for profiles with superpolynomial decay.
    """
    prof = radial_profile(dist)
    radii = prof.length_scale * np.logspace(-2.0, 2.0, 800)
    vals = np.abs(prof.eval(radii))
    peak = max(vals.max(), abs(float(prof.eval(np.array([0.0]))[0])))
    above = np.nonzero(vals > rel * peak)[0]
    if above.size == 0:
        return float(radii[0])
    return float(radii[min(above[-1] + 1, radii.size - 1)]) * 1.25


def _moment_integral(dist, integrand_of_values, *, panels_per_length=4, order=16):
    """int_0^R h(r, gcheck(r)) dr on the support of a rapidly decaying gcheck,
    with a panel-doubling error estimate."""
    prof = radial_profile(dist)
    R = support_radius(dist)
    n = max(64, int(math.ceil(panels_per_length * R / prof.length_scale)))

    # sign changes of gcheck are kinks of |gcheck|: make them panel edges
    probe = np.linspace(0.0, R, 8 * n + 1)
    pv = prof.eval(probe)
    roots = []
    big = np.maximum(np.abs(pv[:-1]), np.abs(pv[1:])) > 1e-9 * np.abs(pv).max()
    for i in np.nonzero((np.sign(pv[:-1]) * np.sign(pv[1:]) < 0) & big)[0]:
        try:
            roots.append(optimize.brentq(lambda x: float(prof.eval(np.array([x]))[0]),
                                         probe[i], probe[i + 1], xtol=1e-14 * R))
        except ValueError:
            roots.append(0.5 * (probe[i] + probe[i + 1]))

    def run(npan):
        edges = np.union1d(np.linspace(0.0, R, npan + 1), roots)
        x, w = composite_nodes(edges, order)
        return float(np.sum(w * integrand_of_values(x, prof.eval(x))))

    coarse = run(n)
    fine = run(2 * n)
    return fine, abs(fine - coarse)


def gcheck_weighted_norm(dist, with_error=False):
    """int_{R^d} |x|^(2-d) |gcheck(x)| dx = |S^(d-1)| int_0^inf r |gcheck(r)| dr.

    For d = 2 this is the L1 norm of gcheck.
    """
    prof = radial_profile(dist)
    if not prof.decay_exponent_a > 2.0:
        raise AccuracyError(
            "weighted norm diverges: r*gcheck(r) is not absolutely integrable "
            f"(certified decay exponent a = {prof.decay_exponent_a:.3g} <= 2)",
            achieved=math.inf)
    if math.isinf(prof.decay_exponent_a):
        val, err = _moment_integral(dist, lambda r, v: r * np.abs(v))
    else:
        # polynomial tail: integrate to a large radius and add the fitted tail
        a = prof.decay_exponent_a
        R = 1000.0 * prof.length_scale
        x, w = composite_nodes(np.linspace(0.0, R, 20001), 8)
        vals = x * np.abs(prof.eval(x))
        val = float(np.sum(w * vals))
        tail = R * R * float(np.abs(prof.eval(np.array([R])))[0]) / (a - 2.0)
        val += tail
        err = abs(tail)
    area = sphere_area(dist.dimension - 1)
    return (area * val, area * err) if with_error else area * val


# --- smoothness ------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothnessReport:
    values: tuple
    passed: tuple
    notes: tuple

    @property
    def all_passed(self):
        return all(self.passed)


def check_smoothness_condition(dist, *, kmax_order=4, bound=1e12):
    """Estimate int_0^inf (1 + r^(k/2)) |f^(k)(r)| dr for k = 0..4.

    Divergence is reported in-band as a failed entry whose value is the last
    partial sum (or inf for distributional derivatives).
    """
    values, passed, notes = [], [], []
    for k in range(kmax_order + 1):
        if dist.family is Family.FERMI_ZERO_T and k > 0:
            values.append(math.inf)
            passed.append(False)
            notes.append("distributional derivative (delta at r = mu)")
            continue
        pts = []
        if dist.family is Family.TABULATED:
            pts = list(dist.table_r)
        elif dist.mu > 0:
            pts = [dist.mu]

        def integrand(r, k=k):
            return (1.0 + r ** (k / 2.0)) * abs(float(f_derivative(dist, r, k)))

        upper = dist.r_cut
        total, err = 0.0, 0.0
        edges = sorted({0.0, upper, *[p for p in pts if 0 < p < upper]})
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(integrand, a, b, limit=400, epsabs=1e-13, epsrel=1e-10)
            total += v
            err += e
        ok = math.isfinite(total) and total < bound
        values.append(total)
        passed.append(ok)
        note = "" if dist.family is not Family.TABULATED or k < 2 else (
            "piecewise derivative of the cubic interpolant")
        notes.append(note)
    return SmoothnessReport(tuple(values), tuple(passed), tuple(notes))


def gcheck_exponential_terms(dist):
    """Split gcheck(r) = sum_j A_j(r) exp(i p_j r) with non-oscillating A_j.

    Available only where the split is exact and the A_j continue analytically
    into the right half plane (Fermi sea, d = 1, 2, 3); returns None otherwise.
    Used to rotate slowly decaying oscillatory tails into the complex plane.
    """
    if dist.family is not Family.FERMI_ZERO_T or dist.dimension > 3:
        return None
    sq = math.sqrt(dist.mu)
    d = dist.dimension
    if d == 1:
        c = math.sqrt(2.0 / math.pi) / 2j
        return [(lambda r: c / r, sq), (lambda r: -c / r, -sq)]
    if d == 2:
        return [
            (lambda r: sq * special.hankel1e(1, sq * r) / (2.0 * r), sq),
            (lambda r: sq * special.hankel2e(1, sq * r) / (2.0 * r), -sq),
        ]
    c = 4.0 * math.pi / (2.0 * math.pi) ** 1.5
    return [
        (lambda r: c * (0.5j * -1 - 0.5 * sq * r) / r ** 3, sq),
        (lambda r: c * (0.5j - 0.5 * sq * r) / r ** 3, -sq),
    ]
