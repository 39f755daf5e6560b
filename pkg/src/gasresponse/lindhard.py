"""Lindhard function m_f(omega, k) of a homogeneous gas.

Three independent evaluation routes:

* closed forms for the zero-temperature Fermi sea (d = 1, 2) and their
  dimension-reduction integrals (any d >= 2);
* the representation m_f = -int_0^inf m_d^F(s, omega, k) f'(s) ds for smooth f;
* the time-domain oracle m_f = 2 int_0^inf sin(t k^2) gcheck(2 t k) e^{-i omega t} dt.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import math
import warnings

import numpy as np
from scipy import integrate, special

from .distributions import (
    Family,
    MomentumDistribution,
    f_derivative,
    gcheck_exponential_terms,
    gcheck_weighted_norm,
    radial_profile,
    support_radius,
)
from .errors import AccuracyError, ParameterDomainError, SingularityError, UnsupportedOperationError
from .quadrature import composite_nodes, gauss_legendre, sphere_area, wynn_epsilon

__all__ = [
    "Route",
    "LindhardValue",
    "FrequencyMomentumPoint",
    "m1_fermi_raw",
    "m2_fermi_raw",
    "m_fermi_1d",
    "m_fermi_2d",
    "m_fermi_d",
    "m_general",
    "m_general_grid",
    "m_oracle_time",
    "m_oracle_grid",
    "uniform_bound",
    "static_limit",
    "write_grid_csv",
    "GRID_CSV_HEADER",
]

EPS = np.finfo(float).eps
SINGULAR_TOL = 1e-12
GRID_CSV_HEADER = ("omega", "kmag", "re_m", "im_m", "route", "est_error")


class Route(str, Enum):
    CLOSED_FORM = "ClosedForm"
    FPRIME_INTEGRAL = "FPrimeIntegral"
    TIME_QUADRATURE = "TimeQuadrature"


@dataclass(frozen=True)
class LindhardValue:
    re: float
    im: float
    route: Route
    est_error: float

    @property
    def value(self):
        return complex(self.re, self.im)

    def __abs__(self):
        return abs(self.value)


@dataclass(frozen=True)
class FrequencyMomentumPoint:
    omega: float
    kmag: float

    def __post_init__(self):
        if not self.kmag >= 0:
            raise ParameterDomainError("kmag must be >= 0")


def _check_k(kmag):
    if not kmag > 0:
        raise ParameterDomainError(f"kmag must be > 0, got {kmag}")


# --- zero-temperature closed forms -------------------------------------------

def m1_fermi_raw(mu, omega, k):
    """Vectorised 1-D Fermi-sea multiplier; +-inf on the logarithmic set."""
    mu, omega, k = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, omega, k)))
    sq = np.sqrt(mu)
    k2 = k * k
    num = (k2 + 2 * k * sq - omega) * (k2 + 2 * k * sq + omega)
    den = (k2 - 2 * k * sq - omega) * (k2 - 2 * k * sq + omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        re = (np.log(np.abs(num)) - np.log(np.abs(den))) / (2.0 * math.sqrt(2.0 * math.pi) * k)
    ind_plus = (np.abs(omega + k2) <= 2 * sq * k).astype(float)
    ind_minus = (np.abs(omega - k2) <= 2 * sq * k).astype(float)
    im = math.sqrt(math.pi) / (2.0 * math.sqrt(2.0) * k) * (ind_plus - ind_minus)
    return re + 1j * im


def _signed_parts(a, b, scale):
    """(a*b)_+^(1/2) and (a*b)_-^(1/2), with products inside rounding noise
    of ``scale`` treated as zero (the branch point is ill-conditioned)."""
    prod = a * b
    prod = np.where(np.abs(prod) <= 16 * EPS * scale, 0.0, prod)
    return np.sqrt(np.maximum(prod, 0.0)), np.sqrt(np.maximum(-prod, 0.0))


def m2_fermi_raw(mu, omega, k):
    """Vectorised 2-D Fermi-sea multiplier (globally defined, continuous).

    Evaluated for |omega| and conjugated for omega < 0.  With
    P = k^2 + |omega|, Q = k^2 - |omega|, D = 4 mu k^2, A = P^2 - D and
    B = Q^2 - D, the textbook expression 2 - sqrt(A_+)/k^2 - sgn(Q) sqrt(B_+)/k^2
    loses every digit once |omega| >> k^2; it is rewritten through
    P - sqrt(A_+) = D / (P + sqrt(A_+)) and the analogous identity for B.
    """
    mu, omega, k = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, omega, k)))
    w = np.abs(omega)
    k2 = k * k
    two = 2 * np.sqrt(mu) * k
    D = two * two
    P = k2 + w
    Qa = np.abs(k2 - w)
    sgnq = np.sign(k2 - w)
    scale = P * P + D
    # A and B factored so that their zero sets are exact
    ap, am = _signed_parts(P - two, P + two, scale)
    bp, bm = _signed_parts(Qa - two, Qa + two, scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = np.where(ap > 0, D / (P + ap), P)
        db = np.where(bp > 0, D / (Qa + bp), Qa)
        num = da + sgnq * db
        both = (sgnq < 0) & (ap > 0) & (bp > 0)
        num_both = -D * (2 * k2 + 4 * k2 * w / (ap + bp)) / ((P + ap) * (Qa + bp))
        num = np.where(both, num_both, num)
        re = num / (4.0 * k2)
        # the often-quoted 1/(2k^2) prefactor is off by two; both the time-domain
        # integral and the reduction from d = 1 give 1/(4k^2)
        im = np.where((am > 0) & (bm > 0), -w / (am + bm), (am - bm) / (4.0 * k2))
    im = np.where(omega < 0, -im, im)
    return re + 1j * im


def m_fermi_1d(mu, omega, kmag):
    """Closed-form Lindhard function of the 1-D Fermi sea."""
    if not mu > 0:
        raise ParameterDomainError("mu must be > 0")
    _check_k(kmag)
    sq = math.sqrt(mu)
    k2 = kmag * kmag
    scale = (k2 + 2 * kmag * sq) ** 2 + omega * omega
    num = (k2 + 2 * kmag * sq) ** 2 - omega ** 2
    den = (k2 - 2 * kmag * sq) ** 2 - omega ** 2
    if abs(num) < SINGULAR_TOL * scale or abs(den) < SINGULAR_TOL * scale:
        raise SingularityError(
            f"(omega={omega}, k={kmag}) lies on the logarithmic singular set of m_1^F")
    v = complex(m1_fermi_raw(mu, omega, kmag))
    return LindhardValue(v.real, v.imag, Route.CLOSED_FORM, 4 * EPS * abs(v))


def m_fermi_2d(mu, omega, kmag):
    """Closed-form Lindhard function of the 2-D Fermi sea."""
    if not mu > 0:
        raise ParameterDomainError("mu must be > 0")
    _check_k(kmag)
    v = complex(m2_fermi_raw(mu, omega, kmag))
    return LindhardValue(v.real, v.imag, Route.CLOSED_FORM, 8 * EPS * max(abs(v), 1.0))


def _critical_speeds(omega, k):
    """sqrt(s) values where m_1^F / m_2^F have their branch points."""
    return abs(omega + k * k) / (2 * k), abs(omega - k * k) / (2 * k)


def _quad_complex(func, edges, *, epsabs=1e-14, epsrel=1e-12, limit=400):
    total, err = 0j, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        v, e = integrate.quad(func, a, b, complex_func=True, epsabs=epsabs,
                              epsrel=epsrel, limit=limit)
        total += v
        err += _quad_err(e)
    return total, err


def _quad_err(info):
    # complex_func=True returns a (real, imag) pair of error estimates
    if isinstance(info, tuple):
        return float(np.hypot(*info))
    return float(np.hypot(np.real(info), np.imag(info)))


def m_fermi_d(d, mu, omega, kmag, route="m1", *, tol=1e-12):
    """Fermi-sea Lindhard function in dimension d >= 2 by reduction integrals.

    ``route="m1"`` reduces to the 1-D multiplier (valid for d >= 2),
    ``route="m2"`` to the 2-D one (valid for d >= 3).
    """
    if d < 2:
        raise ParameterDomainError("m_fermi_d needs d >= 2; use m_fermi_1d")
    if not mu > 0:
        raise ParameterDomainError("mu must be > 0")
    _check_k(kmag)
    if route == "m1":
        pref = sphere_area(d - 2) * mu ** ((d - 1) / 2) / (2 * math.pi) ** ((d - 1) / 2)
        raw, power = m1_fermi_raw, d - 2
    elif route == "m2":
        if d < 3:
            raise ParameterDomainError("the m2 reduction needs d >= 3")
        pref = sphere_area(d - 3) * mu ** ((d - 2) / 2) / (2 * math.pi) ** ((d - 2) / 2)
        raw, power = m2_fermi_raw, d - 3
    else:
        raise ParameterDomainError(f"unknown route {route!r}")

    # Integrate in the speed c = sqrt(mu (1 - r^2)), where the logarithmic
    # branch points of m_1^F sit exactly at the critical speeds and
    # r^power dr = (c / mu) r^(power - 1) dc.  The factor r^(power - 1) is
    # singular at c = sqrt(mu), so the stretch nearest that end is done in r.
    sq = math.sqrt(mu)

    def in_c(c):
        r = math.sqrt(max(1.0 - c * c / mu, 0.0))
        return complex(raw(c * c, omega, kmag)) * (c / mu) * r ** (power - 1)

    def in_r(r):
        return complex(raw(mu * (1.0 - r * r), omega, kmag)) * r ** power

    cuts = sorted(c for c in _critical_speeds(omega, kmag) if 0.0 < c < sq)
    edges = [0.0, *cuts, sq]
    r_last = 0.5 * math.sqrt(1.0 - edges[-2] ** 2 / mu)
    c_last = sq * math.sqrt(1.0 - r_last * r_last)
    pieces = [(in_c, lo, hi) for lo, hi in zip(edges[:-2], edges[1:-1]) if hi > lo]
    pieces += [(in_c, edges[-2], c_last), (in_r, 0.0, r_last)]
    total, err = 0j, 0.0
    for func, lo, hi in pieces:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, info = integrate.quad(func, lo, hi, complex_func=True, epsabs=tol,
                                     epsrel=tol, limit=500)
        total += v
        err += _quad_err(info)
    val = pref * total
    est = pref * err + 8 * EPS * abs(val)
    if est > 1e-6 * max(1.0, abs(val)):
        raise AccuracyError("reduction quadrature did not converge", achieved=est)
    return LindhardValue(val.real, val.imag, Route.CLOSED_FORM, est)


# --- f'-integral route -----------------------------------------------------------
#
# m_2^F(s) is affine in sqrt(C_j - s)_+ and sqrt(s - C_j)_+ for the two branch
# energies C_1 = c_1^2, C_2 = c_2^2 (c_j from _critical_speeds):
#
#   m_2^F(s) = 1/2 - sgn(P)/(2k) sqrt(C_1 - s)_+ - sgn(Q)/(2k) sqrt(C_2 - s)_+
#              + i/(2k) [sqrt(s - C_1)_+ - sqrt(s - C_2)_+],
#
# P = k^2 + omega, Q = k^2 - omega.  Hence m_f = -int m_2^F h reduces to the
# one-parameter integrals Jm(C) = int h sqrt(C - s)_+ and Jp(C) = int h sqrt(s - C)_+
# plus H0 = int h, with h = f' in d = 2.  In d = 3,
# m_3^F(s) = (2 pi)^(-1/2) int_0^s m_2^F(x) (s - x)^(-1/2) dx, so the same formula
# holds with h(x) = (2 pi)^(-1/2) int_x^inf f'(s) (s - x)^(-1/2) ds; swapping the
# order of integration turns Jm, Jp, H0 into integrals of f' against the
# explicit kernels _K3_MINUS, (pi/2)(s - C)_+ and 2 sqrt(s).  Every integral has a
# single kink at s = C, removed by the substitution s = C -+ u^2.

def _k3_minus(C, s):
    """int_0^min(C,s) sqrt(C - x) (s - x)^(-1/2) dx.

    For s > C this is b * phi(sqrt(C/b)) with b = s - C and
    phi(t) = t sqrt(1 + t^2) - asinh(t) = (2/3) t^3 2F1(1/2, 3/2; 5/2; -t^2);
    the hypergeometric form avoids the cancellation at small t.
    """
    C, s = np.broadcast_arrays(C, s)
    out = np.sqrt(C * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        below = s < C
        gap = np.where(below, C - s, 1.0)
        lower = out + gap * np.arcsinh(np.sqrt(s / gap))
        b = np.where(below, 1.0, s - C)
        t2 = np.where(below, 0.0, C / b)
        t = np.sqrt(t2)
        phi = np.where(t < 1.0,
                       (2.0 / 3.0) * t ** 3 * special.hyp2f1(0.5, 1.5, 2.5, -np.minimum(t2, 1.0)),
                       t * np.sqrt(1 + t2) - np.arcsinh(t))
        upper = np.where(b > 0, b * phi, out)
    return np.where(below, lower, upper)


def _kernel_difference(d, C1, C2, s):
    """kappa(C1, s) - kappa(C2, s) for s <= C2 <= C1, free of cancellation."""
    dC = C1 - C2
    r1, r2 = np.sqrt(C1 - s), np.sqrt(C2 - s)
    if d == 2:
        return dC / (r1 + r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rs = np.sqrt(s)
        sc = np.sqrt(C1) + np.sqrt(C2)
        a1 = np.arcsinh(np.where(r1 > 0, rs / r1, 0.0))
        da = -np.arcsinh(rs * dC / np.where(r1 * r2 > 0, r1 * r2 * sc, 1.0))
        out = rs * dC / sc + dC * a1 + (C2 - s) * da
    return out / math.sqrt(2 * math.pi)


def _fprime_breakpoints(dist):
    """Energies between which f' is smooth on its own scale."""
    smax = dist.r_cut
    pts = [0.0, smax]
    if dist.family is Family.TABULATED:
        pts.extend(dist.table_r)
    else:
        T = dist.temperature
        jmax = int(math.ceil(math.log2(max(smax, T) / T))) + 1
        steps = T * 2.0 ** np.arange(-3, jmax + 1)
        centre = max(dist.mu, 0.0)
        pts.extend(centre + steps)
        pts.extend(centre - steps)
        pts.append(centre)
        if dist.family is Family.BOSE_EINSTEIN:
            # f' ~ -T/(s - mu)^2 near s = 0 when |mu| << T
            pts.extend(abs(dist.mu) * 2.0 ** np.arange(-3, jmax + 1))
    pts = np.clip(np.asarray(pts, dtype=float), 0.0, smax)
    return np.unique(pts)


def _side_nodes(C, sb, smax, order, grading, sign):
    """Gauss-Legendre nodes in u for s = C + sign*u^2 restricted to [0, smax].

    Returns s-nodes, u-nodes and weights (including the 2u Jacobian), each of
    shape (len(C), n_nodes).  Zero-length panels carry zero weight.
    """
    C = C[:, None]
    if sign < 0:
        lo, hi = np.sqrt(np.maximum(C - smax, 0.0)), np.sqrt(C)
        ub = np.sqrt(np.maximum(C - sb[None, :], 0.0))
    else:
        lo, hi = np.zeros_like(C), np.sqrt(np.maximum(smax - C, 0.0))
        ub = np.sqrt(np.maximum(sb[None, :] - C, 0.0))
    extra = [np.zeros_like(C), hi]
    if grading:
        extra.append(hi * 2.0 ** -np.arange(1, grading + 1))
    edges = np.sort(np.clip(np.concatenate([ub, *extra], axis=1), lo, hi), axis=1)
    a, b = edges[:, :-1, None], edges[:, 1:, None]
    x, w = gauss_legendre(0.0, 1.0, order)
    u = (a + (b - a) * x).reshape(len(C), -1)
    wt = ((b - a) * w).reshape(len(C), -1) * 2 * u
    return C + sign * u * u, u, wt


def _branch_integrals(dist, C, order):
    """Jm(C), Jp(C) for an array of branch energies C."""
    d = dist.dimension
    smax = dist.r_cut
    sb = _fprime_breakpoints(dist)
    grading = 16 if d == 3 else 0
    jm = np.zeros(C.shape)
    jp = np.zeros(C.shape)
    for sign in (-1, 1):
        s, u, w = _side_nodes(C, sb, smax, order, grading, sign)
        fp = f_derivative(dist, np.clip(s, 0.0, smax), 1) * w
        if d == 2:
            if sign < 0:
                jm += (fp * u).sum(axis=1)
            else:
                jp += (fp * u).sum(axis=1)
        else:
            jm += (fp * _k3_minus(C[:, None], s)).sum(axis=1)
            if sign > 0:
                jp += 0.5 * math.pi * (fp * u * u).sum(axis=1)
    if d == 3:
        jm /= math.sqrt(2 * math.pi)
        jp /= math.sqrt(2 * math.pi)
    return jm, jp


@lru_cache(maxsize=64)
def _h_total(dist):
    """H0 = int h: -f(0) in d = 2, (2 pi)^(-1/2) int f'(s) 2 sqrt(s) ds in d = 3."""
    if dist.dimension == 2:
        return -float(f_derivative(dist, np.array([0.0]), 0)[0])
    s, u, w = _side_nodes(np.array([0.0]), _fprime_breakpoints(dist), dist.r_cut, 40, 0, 1)
    val = float((f_derivative(dist, s, 1) * w * 2 * u).sum())
    return val / math.sqrt(2 * math.pi)


def _m_general_branch(dist, omega, k, order):
    """Vectorised m_f for d = 2, 3 and the |rule(order) - rule(2 order)| estimate.

    Works with |omega| and conjugates at the end.  When both branch energies
    lie beyond the support of f' (|omega| >> k^2), Jm(C1) - Jm(C2) is integrated
    as one piece with the difference kernel, since each term grows like sqrt(C).
    """
    w = np.abs(omega)
    k2 = k * k
    C1 = ((w + k2) / (2 * k)) ** 2
    C2 = ((w - k2) / (2 * k)) ** 2
    sq = np.sign(k2 - w)
    smax = dist.r_cut
    far = (sq < 0) & (C2 >= smax)
    near = ~far
    h0 = _h_total(dist)
    m = int(near.sum())
    out = []
    for n in (order, 2 * order):
        val = np.empty(w.shape, dtype=complex)
        if m:
            jm, jp = _branch_integrals(dist, np.concatenate([C1[near], C2[near]]), n)
            re = -0.5 * h0 + (jm[:m] + sq[near] * jm[m:]) / (2 * k[near])
            im = -(jp[:m] - jp[m:]) / (2 * k[near])
            val[near] = re + 1j * im
        if far.any():
            x, wt = composite_nodes(_fprime_breakpoints(dist), n)
            fp = f_derivative(dist, x, 1) * wt
            diff = _kernel_difference(dist.dimension, C1[far, None], C2[far, None], x[None, :])
            val[far] = -0.5 * h0 + (diff * fp).sum(axis=1) / (2 * k[far])
        val += 1j * _absorption_tail(dist, C1, C2, k)
        out.append(np.where(omega < 0, np.conj(val), val))
    return out[1], np.abs(out[1] - out[0])


def _absorption_tail(dist, C1, C2, k):
    """Imaginary part carried by energies beyond the cutoff r_cut.

    Past r_cut the exponential families have f'(s) = -(1/T) e^{-(s - mu)/T} up
    to a relative e^{-40}, so the missing piece of Jp(C) is explicit.  With
    D = max(r_cut - C, 0) it is -sqrt(T) Gamma(3/2, D/T) e^{-(C - mu)/T} in
    d = 2 and -(pi/2) (2 pi)^(-1/2) (D + T) e^{-(max(C, r_cut) - mu)/T} in d = 3.
    Adding it keeps Im m_f < 0, with full relative accuracy, wherever it is
    representable.
    """
    if dist.family not in (Family.FERMI_DIRAC, Family.BOSE_EINSTEIN, Family.BOLTZMANN):
        return 0.0
    T, mu, smax = dist.temperature, dist.mu, dist.r_cut

    def jp(C):
        D = np.maximum(smax - C, 0.0)
        x = D / T
        with np.errstate(under="ignore", over="ignore"):
            if dist.dimension == 2:
                # Gamma(3/2, x) e^{x} stays O(sqrt x); far below r_cut the piece is negligible
                near = x <= 600.0
                g = np.where(near, special.gammaincc(1.5, np.where(near, x, 0.0)) * special.gamma(1.5)
                             * np.exp(np.where(near, x, 0.0)), 0.0)
                return -math.sqrt(T) * g * np.exp(-(np.maximum(C, smax) - mu) / T)
            return (-0.5 * math.pi / math.sqrt(2 * math.pi)) * (D + T) * np.exp(-(np.maximum(C, smax) - mu) / T)

    return (jp(C2) - jp(C1)) / (2 * k)


def _m_general_quad_1d(dist, omega, k):
    """Adaptive quadrature of -int m_1^F(s) f'(s) ds split at the log singularities."""
    def integrand(s):
        return -complex(m1_fermi_raw(s, omega, k)) * float(f_derivative(dist, np.array([s]), 1)[0])

    smax = dist.r_cut
    pts = [c * c for c in _critical_speeds(omega, k)] + list(_fprime_breakpoints(dist))
    edges = sorted({0.0, smax, *[p for p in pts if 0.0 < p < smax]})
    total, err = 0j, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            # the returned error estimate is what matters; quadpack's own
            # warnings would only duplicate it
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, info = integrate.quad(integrand, a, b, complex_func=True, epsabs=1e-13,
                                     epsrel=1e-11, limit=800)
        total += v
        err += _quad_err(info)
    return total, err


def m_general_grid(dist, omega, kmag, *, order=20, tol=1e-11, chunk=1024):
    """m_f on arrays of (omega, k) points via the f'-integral.

    Returns ``(values, est_error)`` arrays.  In d = 2, 3 the estimate compares
    rules of two lengths; points missing ``tol`` are redone with a rule four
    times longer.
    """
    if not dist.is_smooth:
        raise ParameterDomainError("m_general needs a smooth distribution (f' exists)")
    if dist.dimension not in (1, 2, 3):
        raise ParameterDomainError("m_general supports d in {1, 2, 3}")
    omega = np.asarray(omega, dtype=float).ravel()
    kmag = np.asarray(kmag, dtype=float).ravel()
    if np.any(kmag <= 0):
        raise ParameterDomainError("kmag must be > 0")
    vals = np.empty(omega.shape, dtype=complex)
    errs = np.empty(omega.shape)
    if dist.dimension == 1:
        for i in range(omega.size):
            vals[i], errs[i] = _m_general_quad_1d(dist, omega[i], kmag[i])
    else:
        for i in range(0, omega.size, chunk):
            sl = slice(i, i + chunk)
            vals[sl], errs[sl] = _m_general_branch(dist, omega[sl], kmag[sl], order)
        bad = np.nonzero(errs > tol * np.maximum(1.0, np.abs(vals)))[0]
        for i in range(0, bad.size, chunk):
            sel = bad[i:i + chunk]
            v2, e2 = _m_general_branch(dist, omega[sel], kmag[sel], 4 * order)
            better = e2 < errs[sel]
            vals[sel[better]], errs[sel[better]] = v2[better], e2[better]
    vals = np.where(omega == 0, vals.real + 0j, vals)
    errs = errs + 16 * EPS * np.maximum(np.abs(vals), 1.0)
    return vals, errs


def m_general(dist, omega, kmag):
    """m_f(omega, k) = -int_0^inf m_d^F(s, omega, k) f'(s) ds."""
    _check_k(kmag)
    if dist.family is Family.FERMI_ZERO_T:
        d = dist.dimension
        if d == 1:
            return m_fermi_1d(dist.mu, omega, kmag)
        if d == 2:
            return m_fermi_2d(dist.mu, omega, kmag)
        return m_fermi_d(d, dist.mu, omega, kmag)
    vals, errs = m_general_grid(dist, [omega], [kmag])
    if errs[0] > 1e-6 * max(1.0, abs(vals[0])):
        raise AccuracyError("f'-integral did not converge", achieved=float(errs[0]))
    return LindhardValue(vals[0].real, vals[0].imag, Route.FPRIME_INTEGRAL, float(errs[0]))


# --- time-domain oracle ------------------------------------------------------------
#
# With r = 2 t k:  m_f(omega, k) = (1/k) int_0^inf sin(k r / 2) gcheck(r) e^{-i omega r/(2k)} dr.

@lru_cache(maxsize=128)
def _profile_nodes(dist, radius, npan, order=16):
    x, w = composite_nodes(np.linspace(0.0, radius, npan + 1), order)
    prof = radial_profile(dist)
    g = prof.eval(x)
    g.setflags(write=False)
    return x, w, g


def _oracle_panel_sum(x, w, g, omega, k):
    """(1/k) sum_j w_j sin(k x_j/2) g_j exp(-i omega x_j/(2k)) for point arrays."""
    phase = np.multiply.outer(omega / (2 * k), x)
    amp = np.sin(np.multiply.outer(k / 2, x)) * (w * g)
    re = (amp * np.cos(phase)).sum(axis=1) / k
    im = -(amp * np.sin(phase)).sum(axis=1) / k
    scale = np.abs(amp).sum(axis=1) / k
    return re + 1j * im, scale


def _oracle_decaying(dist, omega, k):
    prof = radial_profile(dist)
    R = support_radius(dist)
    base = max(32, int(math.ceil(4 * R / prof.length_scale)))
    nu = k / 2 + np.abs(omega) / (2 * k)
    need = np.maximum(base, np.ceil(R * nu / math.pi)).astype(int)
    groups = 2 ** np.ceil(np.log2(need)).astype(int)
    vals = np.empty(omega.shape, dtype=complex)
    errs = np.empty(omega.shape)
    # gcheck quadrature error, propagated through |sin(kr/2)|/k <= r/2
    gerr = 1e-12 * float(np.abs(prof.eval(np.array([0.0])))[0])
    tail = 0.25 * R * R * float(np.abs(prof.eval(np.array([R])))[0]) * prof.length_scale
    for npan in np.unique(groups):
        idx = np.nonzero(groups == npan)[0]
        for i in range(0, idx.size, 256):
            sel = idx[i:i + 256]
            coarse, _ = _oracle_panel_sum(*_profile_nodes(dist, R, int(npan)), omega[sel], k[sel])
            fine, scale = _oracle_panel_sum(*_profile_nodes(dist, R, 2 * int(npan)), omega[sel], k[sel])
            vals[sel] = fine
            errs[sel] = (np.abs(fine - coarse) + 64 * EPS * scale
                         + 0.25 * R * R * gerr + tail)
    return vals, errs


def _oracle_rotated_tail(dist, terms, omega, k, R0):
    """Tail int_R0^inf of the oracle integrand, each exponential piece
    integrated along the ray where it decays."""
    total, err = 0j, 0.0
    for amp, p in terms:
        for sigma in (1.0, -1.0):
            lam = p + sigma * k / 2 - omega / (2 * k)
            coef = sigma / (2j * k)
            direction = 1j if lam >= 0 else -1j

            def integrand(tau, amp=amp, lam=lam, direction=direction):
                return complex(amp(R0 + direction * tau)) * math.exp(-abs(lam) * tau)

            v, info = integrate.quad(integrand, 0.0, np.inf, complex_func=True,
                                     epsabs=1e-15, epsrel=1e-12, limit=1000)
            total += coef * direction * np.exp(1j * lam * R0) * v
            err += abs(coef) * _quad_err(info)
    return total, err


def _oracle_fermi(dist, omega, k):
    terms = gcheck_exponential_terms(dist)
    sq = math.sqrt(dist.mu)
    R0 = 10.0 / sq
    prof = radial_profile(dist)
    vals = np.empty(omega.shape, dtype=complex)
    errs = np.empty(omega.shape)
    for i, (om, kk) in enumerate(zip(omega, k)):
        nu = kk / 2 + abs(om) / (2 * kk) + sq
        npan = int(math.ceil(R0 * nu / math.pi)) + 16
        parts = []
        for n in (npan, 2 * npan):
            x, w = composite_nodes(np.linspace(0.0, R0, n + 1), 16)
            g = prof.eval(x)
            v, scale = _oracle_panel_sum(x, w, g, np.array([om]), np.array([kk]))
            parts.append(v[0])
        tail, terr = _oracle_rotated_tail(dist, terms, om, kk, R0)
        vals[i] = parts[1] + tail
        errs[i] = abs(parts[1] - parts[0]) + terr + 64 * EPS * float(scale[0])
    return vals, errs


def _oracle_wynn(dist, omega, k, *, max_panels=4096, panels_per_block=8):
    """Generic slow-tail route: sums over half-periods of the fastest phase,
    accelerated with Wynn's epsilon algorithm."""
    prof = radial_profile(dist)
    gerr = 1e-12 * float(np.abs(prof.eval(np.array([0.0])))[0])
    vals = np.empty(omega.shape, dtype=complex)
    errs = np.empty(omega.shape)
    for i, (om, kk) in enumerate(zip(omega, k)):
        nu = kk / 2 + abs(om) / (2 * kk) + 1.0 / prof.length_scale
        h = math.pi / nu
        partial, acc = [], 0j
        for start in range(0, max_panels, panels_per_block):
            edges = h * np.arange(start, start + panels_per_block + 1)
            x, w = composite_nodes(edges, 16)
            v, _ = _oracle_panel_sum(x, w, prof.eval(x), np.array([om]), np.array([kk]))
            acc += v[0]
            partial.append(acc)
            if len(partial) >= 12:
                lim, e = wynn_epsilon(partial[-12:])
                if e < 1e-11 * max(1.0, abs(lim)):
                    break
        lim, e = wynn_epsilon(partial[-12:])
        if len(partial) > 12:
            # shifted window: a cheap check on the extrapolation itself
            e = max(e, abs(lim - wynn_epsilon(partial[-13:-1])[0]))
        x_end = h * len(partial) * panels_per_block
        # gcheck is known to ~1e-12 relative; |sin(kr/2)|/k <= min(r/2, 1/k)
        g_part = gerr * min(0.25 * x_end * x_end, x_end / kk)
        vals[i], errs[i] = lim, e + g_part + 64 * EPS * abs(lim)
    return vals, errs


def m_oracle_grid(dist, omega, kmag, method="auto"):
    """Time-quadrature oracle on arrays of points; returns (values, errors)."""
    omega = np.asarray(omega, dtype=float).ravel()
    kmag = np.asarray(kmag, dtype=float).ravel()
    if np.any(kmag <= 0):
        raise ParameterDomainError("kmag must be > 0")
    prof = radial_profile(dist)
    if method == "auto":
        if math.isinf(prof.decay_exponent_a):
            method = "truncate"
        elif gcheck_exponential_terms(dist) is not None:
            method = "rotate"
        else:
            method = "wynn"
    if method == "truncate":
        vals, errs = _oracle_decaying(dist, omega, kmag)
    elif method == "rotate":
        vals, errs = _oracle_fermi(dist, omega, kmag)
    elif method == "wynn":
        if not prof.decay_exponent_a > 1.0:
            raise AccuracyError("time oracle needs gcheck decaying faster than 1/r",
                                achieved=prof.decay_exponent_a)
        vals, errs = _oracle_wynn(dist, omega, kmag)
    else:
        raise ParameterDomainError(f"unknown oracle method {method!r}")
    return vals, errs


def m_oracle_time(dist, omega, kmag, method="auto"):
    """m_f(omega, k) from the time-domain kernel 2 sin(t k^2) gcheck(2 t k)."""
    _check_k(kmag)
    vals, errs = m_oracle_grid(dist, [omega], [kmag], method)
    if errs[0] > 1e-5 * max(1.0, abs(vals[0])):
        raise AccuracyError("time-quadrature oracle did not converge", achieved=float(errs[0]))
    return LindhardValue(vals[0].real, vals[0].imag, Route.TIME_QUADRATURE, float(errs[0]))


# --- bounds ---------------------------------------------------------------------------

def uniform_bound(dist):
    """sup |m_f| <= (2 |S^(d-1)|)^(-1) int |x|^(2-d) |gcheck(x)| dx."""
    d = dist.dimension
    return gcheck_weighted_norm(dist) / (2.0 * sphere_area(d - 1))


def static_limit(dist):
    """lim_{k -> 0} m_f(0, k) = 1/2 int_0^inf r gcheck(r) dr.

    For the Fermi sea the moment integral is only conditionally convergent, so
    the limit of the closed forms is used instead: (2 pi mu)^(-1/2), 1/2 and
    (mu / (2 pi))^(1/2) in d = 1, 2, 3.
    """
    from .distributions import _moment_integral

    if dist.family is Family.FERMI_ZERO_T:
        d, mu = dist.dimension, dist.mu
        if d == 1:
            return 1.0 / math.sqrt(2 * math.pi * mu)
        if d == 2:
            return 0.5
        if d == 3:
            return math.sqrt(mu / (2 * math.pi))
        raise UnsupportedOperationError("static limit of the Fermi sea needs d <= 3")

    val, _ = _moment_integral(dist, lambda r, v: r * v)
    return 0.5 * val


def write_grid_csv(path, omega, kmag, values, route, est_error):
    """Grid-sweep CSV: one row per point, repr-precision floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_CSV_HEADER)
        route = Route(route).value
        for om, kk, v, e in zip(np.ravel(omega), np.ravel(kmag), np.ravel(values), np.ravel(est_error)):
            w.writerow((repr(float(om)), repr(float(kk)), repr(float(v.real)),
                        repr(float(v.imag)), route, repr(float(e))))
