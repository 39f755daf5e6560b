"""The explicit second-order response kernel in two space dimensions.

K2(t, s; k, l) = 1{t >= 0} 1{s >= 0} (4 w_hat(l) w_hat(k - l) / 2 pi)
                 sin(t k.(k - l)) sin(l.(tk + sl)) gcheck(2 |tk + sl|)

for d = 2.  Besides pointwise evaluation this module computes its mixed
L^2_t L^1_s norm by quadrature, the majorant obtained from |sin x| <= 1 and
|sin x| <= |x| followed by the linear change of variables
(t, s) -> (u, v) = (|l| s + t k.l/|l|, t |det(k, l)|/|l|), and a numerical
probe of the trilinear inequality with weight |det(k, l)|^(-1/2).

The norm operations need |gcheck(r)| to decay faster than r^(-3); the zero
temperature Fermi sea (decay r^(-3/2)) is rejected.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
import math
from typing import Sequence

import numpy as np

from .distributions import Family, radial_profile, support_radius
from .errors import AccuracyError, ParameterDomainError, PreconditionError, ResolutionError
from .quadrature import composite_nodes, gauss_legendre

__all__ = [
    "SecondOrderKernel",
    "k2_eval",
    "k2_l2l1_norm_direct",
    "universal_integral",
    "k2_norm_reduced_bound",
    "reduction_identity_sides",
    "ReductionRow",
    "reduction_table",
    "write_reduction_csv",
    "GaussianBump",
    "GaussianTriple",
    "HLSRow",
    "HLSReport",
    "det_hls_value",
    "det_hls_check",
    "random_gaussian_triples",
    "write_det_hls_csv",
    "RhoQ2Report",
    "rho_q2_bound_check",
    "REDUCTION_CSV_HEADER",
    "HLS_CSV_HEADER",
]

REDUCTION_CSV_HEADER = ("kx", "ky", "lx", "ly", "direct_norm", "reduced_bound", "ratio")
HLS_CSV_HEADER = ("sample_id", "ratio", "delta_seq_ratio")
TWO_PI = 2 * math.pi
MIN_DECAY = 3.0


# --- kernel -------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SecondOrderKernel:
    """K2 for a momentum distribution and a pair potential, d = 2."""

    dist: object
    pot: object

    def __post_init__(self):
        if self.dist.dimension != 2:
            raise PreconditionError("the second-order kernel is implemented for d = 2")

    @property
    def dimension(self):
        return 2

    @property
    def decay_exponent(self):
        if self.dist.family is Family.FERMI_ZERO_T:
            return 1.5
        return radial_profile(self.dist).decay_exponent_a

    def require_decay(self):
        a = self.decay_exponent
        if not a > MIN_DECAY:
            raise PreconditionError(
                f"norm operations need |gcheck| to decay faster than r^-3; certified a = {a:.3g}")

    def gcheck_abs(self, radius):
        r = np.asarray(radius, dtype=float)
        return np.abs(radial_profile(self.dist).eval(r.ravel())).reshape(r.shape)

    @property
    def reach(self):
        """Radius rho beyond which |gcheck(2 rho)| is negligible."""
        if math.isinf(self.decay_exponent):
            return 0.5 * support_radius(self.dist)
        return 50.0 * radial_profile(self.dist).length_scale

    def prefactor(self, k, l):
        k, l = np.asarray(k, float), np.asarray(l, float)
        w = self.pot(np.array([np.linalg.norm(l), np.linalg.norm(k - l)]))
        return 4.0 * float(w[0]) * float(w[1]) / TWO_PI


def _vec(x, name):
    v = np.asarray(x, dtype=float)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ParameterDomainError(f"{name} must be a finite 2-vector")
    return v


def _det(k, l):
    return float(k[0] * l[1] - k[1] * l[0])


def k2_eval(kern: SecondOrderKernel, t, s, k, l):
    """K2(t, s; k, l); ``t`` and ``s`` may be arrays of a common shape."""
    k, l = _vec(k, "k"), _vec(l, "l")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    t, s = np.broadcast_arrays(t, s)
    x0 = t * k[0] + s * l[0]
    x1 = t * k[1] + s * l[1]
    val = (kern.prefactor(k, l)
           * np.sin(t * float(k @ (k - l)))
           * np.sin(l[0] * x0 + l[1] * x1)
           * radial_profile(kern.dist).eval(2.0 * np.hypot(x0, x1).ravel()).reshape(t.shape))
    out = np.where((t >= 0) & (s >= 0), val, 0.0)
    return float(out) if out.ndim == 0 else out


# --- mixed norm by quadrature ---------------------------------------------------------------

def _panel_edges(lo, hi, zeros_start, spacing, max_panels=4000):
    """Edges on [lo, hi] that include every point zeros_start + j * spacing."""
    if hi <= lo:
        return np.array([lo, hi])
    if spacing <= 0 or not math.isfinite(spacing):
        inner = np.empty(0)
    else:
        j0 = math.ceil((lo - zeros_start) / spacing)
        j1 = math.floor((hi - zeros_start) / spacing)
        if j1 - j0 > max_panels:
            raise ResolutionError("oscillation too fast for the panel budget")
        inner = zeros_start + spacing * np.arange(j0, j1 + 1)
        inner = inner[(inner > lo) & (inner < hi)]
    edges = np.concatenate([[lo], inner, [hi]])
    # split long panels so each carries at most a fixed share of the range
    out = [edges[0]]
    step = (hi - lo) / 24
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, math.ceil((b - a) / step))
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.asarray(out)


def _inner_s(kern, t, k, l, order, rho):
    """int_0^inf ds |K2(t, s; k, l)| / |prefactor * sin(t k.(k-l))|."""
    ll = float(l @ l)
    nl = math.sqrt(ll)
    kl = float(k @ l)
    # |tk + sl| <= rho  <=>  s in [s_c - h, s_c + h]
    s_c = -t * kl / ll
    v = t * abs(_det(k, l)) / nl
    if v >= rho:
        return 0.0
    h = math.sqrt(rho * rho - v * v) / nl
    lo, hi = max(0.0, s_c - h), s_c + h
    if hi <= lo:
        return 0.0
    # zeros of sin(l.(tk + sl)) = sin(t kl + s ll) in s
    edges = _panel_edges(lo, hi, -t * kl / ll, math.pi / ll)
    x, w = composite_nodes(edges, order)
    r = np.hypot(t * k[0] + x * l[0], t * k[1] + x * l[1])
    return float(np.sum(w * np.abs(np.sin(t * kl + x * ll)) * kern.gcheck_abs(2.0 * r)))


def _direct_norm_sq(kern, k, l, order):
    rho = kern.reach
    nl = math.sqrt(float(l @ l))
    t_max = rho * nl / abs(_det(k, l))
    a = float(k @ (k - l))
    kl = float(k @ l)
    spacing = math.pi / abs(a) if a != 0 else math.inf
    # the inner integral has a second-derivative jump whenever a zero of
    # sin(t k.l + s |l|^2) crosses s = 0, i.e. at t = j pi / |k.l|
    crossing = math.pi / abs(kl) if kl != 0 else math.inf
    edges = np.union1d(_panel_edges(0.0, t_max, 0.0, spacing), _panel_edges(0.0, t_max, 0.0, crossing))
    x, w = composite_nodes(edges, order)
    inner = np.array([_inner_s(kern, ti, k, l, order, rho) for ti in x])
    return float(np.sum(w * (np.sin(a * x) * inner) ** 2))


def k2_l2l1_norm_direct(kern: SecondOrderKernel, k, l, *, rtol=1e-7):
    """(int dt |int ds |K2(t, s; k, l)||^2)^(1/2) by nested Gauss-Legendre.

    Panels are split at every zero of both sine factors and, in t, wherever
    a zero of the inner sine crosses s = 0, so each panel integrand is
    smooth; the estimate at orders 8 and 16 must agree to ``rtol``.
    """
    k, l = _vec(k, "k"), _vec(l, "l")
    kern.require_decay()
    if _det(k, l) == 0.0:
        raise PreconditionError("k and l are collinear: det(k, l) = 0")
    pre = abs(kern.prefactor(k, l))
    if pre == 0.0:
        return 0.0
    lo = _direct_norm_sq(kern, k, l, 8)
    hi = _direct_norm_sq(kern, k, l, 16)
    if abs(hi - lo) > rtol * max(abs(hi), 1e-300):
        raise AccuracyError(f"direct K2 norm unresolved: orders 8/16 differ by {abs(hi - lo) / hi:.2g}",
                            achieved=abs(hi - lo) / hi)
    return pre * math.sqrt(hi)


# --- the universal integral and the majorant -------------------------------------------------

def _h_of_v(kern, v, n_panels=24, order=16):
    """h(v) = int_R du sqrt(u^2 + v^2) |gcheck(2 sqrt(u^2 + v^2))|, v > 0.

    With u = v sinh z the integrand v^2 cosh^2 z |gcheck(2 v cosh z)| is
    smooth in z.
    """
    rho = kern.reach
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.zeros(v.shape)
    x, w = gauss_legendre(0.0, 1.0, order)
    for i, vi in enumerate(v):
        if vi >= rho:
            continue
        zmax = math.acosh(rho / vi)
        edges = np.linspace(0.0, zmax, n_panels + 1)
        z, wz = composite_nodes(edges, order)
        c = np.cosh(z)
        out[i] = 2.0 * float(np.sum(wz * vi * vi * c * c * kern.gcheck_abs(2.0 * vi * c)))
    return out


@lru_cache(maxsize=32)
def _universal_integral_cached(kern_key):
    kern = kern_key
    rho = kern.reach
    # h is even with a logarithmic kink in h'' at 0: grade the panels there
    inner = rho * np.logspace(-8, -1, 15)
    edges = np.concatenate([[0.0], inner, np.linspace(0.1 * rho, rho, 40)[1:]])
    vals = []
    for order in (12, 24):
        v, w = composite_nodes(edges, order)
        vals.append(2.0 * float(np.sum(w * _h_of_v(kern, v) ** 2)))
    tail = 0.0
    a = kern.decay_exponent
    if math.isfinite(a):
        # |gcheck(2r)| <= c r^-a beyond rho: h(v) <~ C v^(2-a), so the tail is O(rho^(5-2a))
        c = float(kern.gcheck_abs(np.array([2.0 * rho]))[0]) * rho ** a
        tail = 2.0 * (2.0 * c / (a - 2.0)) ** 2 * rho ** (5.0 - 2.0 * a) / (2.0 * a - 5.0)
    return vals[1], abs(vals[1] - vals[0]) + tail


def universal_integral(kern: SecondOrderKernel, with_error=False):
    """I = int dv |int du sqrt(u^2 + v^2) |gcheck(2 sqrt(u^2 + v^2))||^2 (cached)."""
    kern.require_decay()
    val, err = _universal_integral_cached(_KernelKey(kern))
    return (val, err) if with_error else val


class _KernelKey:
    """Hashable wrapper: the integral depends on the distribution only."""

    def __init__(self, kern):
        self.kern = kern

    def __hash__(self):
        return hash(self.kern.dist)

    def __eq__(self, other):
        return isinstance(other, _KernelKey) and other.kern.dist == self.kern.dist

    def __getattr__(self, name):
        return getattr(self.kern, name)


def k2_norm_reduced_bound(kern: SecondOrderKernel, k, l):
    """4 |w_hat(l) w_hat(k-l)| / (2 pi) * |l|^(1/2) |det(k, l)|^(-1/2) I^(1/2)."""
    k, l = _vec(k, "k"), _vec(l, "l")
    kern.require_decay()
    d = _det(k, l)
    if d == 0.0:
        raise PreconditionError("k and l are collinear: det(k, l) = 0")
    return (abs(kern.prefactor(k, l)) * math.sqrt(np.linalg.norm(l))
            / math.sqrt(abs(d)) * math.sqrt(universal_integral(kern)))


def reduction_identity_sides(kern: SecondOrderKernel, k, l, *, order=24):
    """Both sides of the change-of-variables identity.

    Returns ``(lhs, rhs)`` with lhs = l^2 int_R dt |int_R ds |tk+sl| |gcheck(2|tk+sl|)||^2
    computed in the original (t, s) variables and rhs = (|l| / |det|) I.
    """
    k, l = _vec(k, "k"), _vec(l, "l")
    kern.require_decay()
    d = _det(k, l)
    if d == 0.0:
        raise PreconditionError("k and l are collinear: det(k, l) = 0")
    rho = kern.reach
    ll = float(l @ l)
    nl = math.sqrt(ll)
    t_max = rho * nl / abs(d)
    # the outer integrand is even in t; grade towards t = 0
    edges = np.concatenate([[0.0], t_max * np.logspace(-8, -1, 15), np.linspace(0.1 * t_max, t_max, 40)[1:]])
    t, wt = composite_nodes(edges, order)
    xs, ws = gauss_legendre(-1.0, 1.0, order)
    n_s = 32
    inner = np.empty(t.shape)
    for i, ti in enumerate(t):
        s_c = -ti * float(k @ l) / ll
        v = ti * abs(d) / nl
        h = math.sqrt(max(rho * rho - v * v, 0.0)) / nl
        # s-panels graded about the closest point s_c, where |tk+sl| has curvature ~ 1/v
        g = np.concatenate([-h * np.logspace(0, -6, 13), [0.0], h * np.logspace(-6, 0, 13)])
        g = np.unique(np.concatenate([g, np.linspace(-h, h, n_s + 1)]))
        s, w = composite_nodes(s_c + g, order)
        r = np.hypot(ti * k[0] + s * l[0], ti * k[1] + s * l[1])
        inner[i] = float(np.sum(w * r * kern.gcheck_abs(2.0 * r)))
    lhs = ll * 2.0 * float(np.sum(wt * inner ** 2))
    rhs = nl / abs(d) * universal_integral(kern)
    return lhs, rhs


@dataclass(frozen=True)
class ReductionRow:
    k: tuple
    l: tuple
    direct_norm: float
    reduced_bound: float

    @property
    def ratio(self):
        return self.direct_norm / self.reduced_bound if self.reduced_bound else 0.0


def reduction_table(kern, pairs):
    """Direct norm, majorant and their ratio for each (k, l) pair."""
    rows = []
    for k, l in pairs:
        rows.append(ReductionRow(tuple(map(float, k)), tuple(map(float, l)),
                                 k2_l2l1_norm_direct(kern, k, l), k2_norm_reduced_bound(kern, k, l)))
    return rows


def write_reduction_csv(rows: Sequence[ReductionRow], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REDUCTION_CSV_HEADER)
        for r in rows:
            w.writerow([repr(v) for v in (*r.k, *r.l, r.direct_norm, r.reduced_bound, r.ratio)])


# --- the |det|^(-1/2) trilinear form ---------------------------------------------------------

@dataclass(frozen=True)
class GaussianBump:
    """amplitude * exp(-|k - center|^2 / (2 width^2)) on R^2."""

    amplitude: float
    center: tuple
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ParameterDomainError("Gaussian width must be > 0")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def l2_norm(self):
        return abs(self.amplitude) * math.sqrt(math.pi) * self.width

    def dilated(self, lam):
        """lam * f(lam k): L^2 norm unchanged."""
        return GaussianBump(self.amplitude * lam, tuple(c / lam for c in self.center), self.width / lam)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        d2 = (k[..., 0] - self.center[0]) ** 2 + (k[..., 1] - self.center[1]) ** 2
        return self.amplitude * np.exp(-0.5 * d2 / self.width ** 2)


@dataclass(frozen=True)
class GaussianTriple:
    f: GaussianBump
    g: GaussianBump
    h: GaussianBump

    def dilated(self, lam):
        return GaussianTriple(self.f.dilated(lam), self.g.dilated(lam), self.h.dilated(lam))

    @property
    def norm_product(self):
        return self.f.l2_norm * self.g.l2_norm * self.h.l2_norm


def _y_integral(P, m, lo, hi, n_panels, order):
    """2 int_lo^hi [e^{-P(y^2-m)^2/2} + e^{-P(y^2+m)^2/2}] dy, vectorised over m, lo, hi."""
    x, w = gauss_legendre(0.0, 1.0, order)
    total = np.zeros(np.broadcast(m, lo, hi).shape)
    span = (hi - lo) / n_panels
    for p in range(n_panels):
        a = lo + p * span
        y = a[..., None] + span[..., None] * x
        mm = m[..., None]
        f = np.exp(-0.5 * P * (y * y - mm) ** 2) + np.exp(-0.5 * P * (y * y + mm) ** 2)
        total += 2.0 * span * np.sum(w * f, axis=-1)
    return total


def det_hls_value(tri: GaussianTriple, deltas=(), *, n_rho=96, n_theta=64, y_panels=32, order=8):
    """int int f(k) g(k-l) h(l) |det(k, l)|^(-1/2) dk dl for a Gaussian triple.

    For each l = r e the variable k = alpha e + beta e_perp gives |det| = r |beta|;
    the alpha integral is Gaussian and done in closed form, and beta = +-y^2
    removes the singular weight.  The outer l integral uses polar
    coordinates with r = rho^2 and the periodic trapezoid rule in angle.

    Returns the full integral followed by, for each delta, the value with the
    slab |det| < delta removed.
    """
    f, g, h = tri.f, tri.g, tri.h
    s2, t2 = f.width ** 2, g.width ** 2
    P = 1.0 / s2 + 1.0 / t2
    a, b, c = np.array(f.center), np.array(g.center), np.array(h.center)
    r_far = float(np.linalg.norm(c) + 10.0 * h.width)
    # l must also bring the alpha-Gaussian into play: r ~ |a - b| within a few widths
    r_far = min(r_far, float(np.linalg.norm(a - b) + 10.0 * math.sqrt(s2 + t2)))
    if r_far <= 0:
        return (0.0,) * (1 + len(deltas))
    rho_nodes, rho_w = composite_nodes(np.linspace(0.0, math.sqrt(r_far), n_rho // order + 1), order)
    theta = TWO_PI * np.arange(n_theta) / n_theta
    R = (rho_nodes ** 2)[:, None]
    e = np.stack([np.cos(theta), np.sin(theta)], -1)
    ep = np.stack([-np.sin(theta), np.cos(theta)], -1)
    a_e, a_p = e @ a, ep @ a
    b_e, b_p = e @ b, ep @ b
    alpha_fac = math.sqrt(TWO_PI * s2 * t2 / (s2 + t2)) * np.exp(
        -0.5 * (a_e[None, :] - R - b_e[None, :]) ** 2 / (s2 + t2))
    beta_fac = np.exp(-0.5 * (a_p - b_p) ** 2 / (s2 + t2))[None, :]
    shape = (R.shape[0], n_theta)
    m = np.broadcast_to(((a_p / s2 + b_p / t2) / P)[None, :], shape)
    lx, ly = R * np.cos(theta)[None, :], R * np.sin(theta)[None, :]
    hv = h(np.stack([lx, ly], -1))
    # measure: r dr dtheta with r = rho^2, times r^(-1/2) from |det|^(-1/2)
    weight = (2.0 * rho_nodes ** 2 * rho_w)[:, None] * (TWO_PI / n_theta)
    base = f.amplitude * g.amplitude * weight * hv * alpha_fac * beta_fac
    y_top = np.sqrt(np.abs(m) + 12.0 / math.sqrt(P))
    zero = np.zeros(shape)
    full = float(np.sum(base * _y_integral(P, m, zero, y_top, y_panels, order)))
    out = [full]
    for d in deltas:
        y_d = np.minimum(np.broadcast_to(np.sqrt(d / np.maximum(R, 1e-300)), shape), y_top)
        cut = _y_integral(P, m, zero, y_d, 8, order)
        out.append(full - float(np.sum(base * cut)))
    return tuple(out)


@dataclass(frozen=True)
class HLSRow:
    sample_id: int
    ratio: float
    ratio_exact: float
    delta_seq_ratio: float
    dilated_ratio: float


@dataclass
class HLSReport:
    rows: list
    deltas: tuple
    cauchy_tol: float

    @property
    def max_ratio(self):
        return max((r.ratio for r in self.rows), default=0.0)

    @property
    def max_dilation_defect(self):
        return max((abs(r.dilated_ratio - r.ratio) / max(abs(r.ratio), 1e-300) for r in self.rows),
                   default=0.0)

    @property
    def max_delta_seq(self):
        return max((r.delta_seq_ratio for r in self.rows), default=0.0)


def _extrapolate(deltas, vals):
    """Fit v(d) = V + c1 d^(1/2) + c2 d^(3/2) through three points."""
    d = np.asarray(deltas)
    A = np.stack([np.ones_like(d), np.sqrt(d), d ** 1.5], -1)
    return float(np.linalg.solve(A, np.asarray(vals))[0])


def _two_point(d1, d2, v1, v2):
    """Remove the d^(1/2) term from two values."""
    q = math.sqrt(d1 / d2)
    return (q * v2 - v1) / (q - 1.0)


def det_hls_check(samples: Sequence[GaussianTriple], *, delta0=1e-2, cauchy_tol=0.01,
                  dilation=2.0):
    """Ratios |T(f, g, h)| / (|f| |g| |h|) with dyadic slab extrapolation.

    ``ratio`` is the three-point extrapolation from the slab-excluded values
    at delta0, delta0/2 and delta0/4.  ``delta_seq_ratio`` is the relative gap
    between the two-point extrapolations from the first and last pair; above
    ``cauchy_tol`` the sequence is not Cauchy and AccuracyError is raised.
    ``dilated_ratio`` repeats the computation for lam f(lam k) and so on.
    """
    deltas = (delta0, delta0 / 2, delta0 / 4)
    rows = []
    for i, tri in enumerate(samples):
        norm = tri.norm_product
        if norm == 0.0:
            rows.append(HLSRow(i, 0.0, 0.0, 0.0, 0.0))
            continue
        full, v1, v2, v3 = det_hls_value(tri, deltas)
        ext = _extrapolate(deltas, (v1, v2, v3))
        e1 = _two_point(deltas[0], deltas[1], v1, v2)
        e2 = _two_point(deltas[1], deltas[2], v2, v3)
        seq = abs(e2 - e1) / max(abs(e2), 1e-300)
        if seq > cauchy_tol:
            raise AccuracyError(f"sample {i}: dyadic slab sequence not Cauchy ({seq:.3g} > {cauchy_tol})",
                                achieved=seq)
        dtri = tri.dilated(dilation)
        dfull, *dv = det_hls_value(dtri, deltas)
        dext = _extrapolate(deltas, dv)
        rows.append(HLSRow(i, abs(ext) / norm, abs(full) / norm, seq, abs(dext) / dtri.norm_product))
    return HLSReport(rows, deltas, cauchy_tol)


def random_gaussian_triples(n, seed=0, *, center_box=2.0, widths=(0.3, 2.0)):
    """Unit-L^2 isotropic Gaussian triples with random centres and widths."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        bumps = []
        for _ in range(3):
            w = float(rng.uniform(*widths))
            ctr = tuple(rng.uniform(-center_box, center_box, 2))
            bumps.append(GaussianBump(1.0 / (math.sqrt(math.pi) * w), ctr, w))
        out.append(GaussianTriple(*bumps))
    return out


def write_det_hls_csv(report: HLSReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HLS_CSV_HEADER)
        for r in report.rows:
            w.writerow([r.sample_id, repr(r.ratio), repr(r.delta_seq_ratio)])


# --- empirical second-order density ----------------------------------------------------------

@dataclass(frozen=True)
class RhoQ2Report:
    ratio: float
    ratio_coarse: float
    relative_change: float
    rho_q2_norm: float
    phi_norm: float
    weighted_w_sup: float
    note: str = "empirical finiteness check; the constant of the estimate is not certified"
    levels: dict = field(default_factory=dict)


def _rho_q2_ratio(kern, phi_vals, dt, dx, L):
    """||rho_Q2||_{L^2} / ||phi||^2 for phi sampled at spacings dt, dx on a box of side L."""
    n_t, n_x, _ = phi_vals.shape
    # continuous spatial transform: (2 pi)^-1 sum_x phi e^{-ik.x} dx^2 on centred samples
    x = -0.5 * L + dx * np.arange(n_x)
    kk = TWO_PI * np.fft.fftfreq(n_x, dx)
    shift = np.exp(-1j * kk * x[0])
    phat = np.fft.fft2(phi_vals, axes=(1, 2)) * (dx * dx / TWO_PI) * shift[None, :, None] * shift[None, None, :]
    idx = np.rint(np.fft.fftfreq(n_x, 1.0 / n_x)).astype(int)      # integer label of each column
    kvec = np.stack(np.meshgrid(kk, kk, indexing="ij"), -1).reshape(-1, 2)
    ivec = np.stack(np.meshgrid(idx, idx, indexing="ij"), -1).reshape(-1, 2)
    flat = phat.reshape(n_t, -1)
    n_modes = flat.shape[1]
    tau = dt * np.arange(n_t)
    n_out = 2 * n_t
    out = np.zeros((n_out, n_modes), dtype=complex)
    # zero-padded histories so that t - tau - sigma may run off the sampled window
    pad = np.zeros((3 * n_t + 1, n_modes + 1), dtype=complex)
    pad[n_t:2 * n_t, :n_modes] = flat
    lab = np.full(2 * n_x + 1, -1)
    lab[idx + n_x] = np.arange(n_x)
    i1 = n_t + np.arange(n_out)[:, None] - np.arange(n_t)[None, :]           # (t, tau)
    i2 = i1[:, :, None] - np.arange(n_t)[None, None, :]                     # (t, tau, sigma)
    i2 = np.clip(i2, 0, 3 * n_t)
    pre = 4.0 / TWO_PI
    lnorm = np.linalg.norm(kvec, axis=1)
    prof = radial_profile(kern.dist).eval
    for a in range(n_modes):
        k = kvec[a]
        m_lab = ivec[a][None, :] - ivec
        ok = np.all(np.abs(m_lab) <= n_x, axis=1)
        cols = np.where(ok, lab[np.clip(m_lab[:, 0] + n_x, 0, 2 * n_x)] * n_x
                        + lab[np.clip(m_lab[:, 1] + n_x, 0, 2 * n_x)], -1)
        valid = ok & (lab[np.clip(m_lab[:, 0] + n_x, 0, 2 * n_x)] >= 0) \
            & (lab[np.clip(m_lab[:, 1] + n_x, 0, 2 * n_x)] >= 0)
        cols = np.where(valid, cols, n_modes)                                # dummy zero column
        km_l = kvec[a][None, :] - kvec
        wfac = pre * kern.pot(lnorm) * kern.pot(np.linalg.norm(km_l, axis=1)) * valid
        if not np.any(wfac):
            continue
        # K(tau, sigma) for every l: shape (l, tau, sigma)
        x0 = tau[None, :, None] * k[0] + tau[None, None, :] * kvec[:, 0, None, None]
        x1 = tau[None, :, None] * k[1] + tau[None, None, :] * kvec[:, 1, None, None]
        kdot = km_l @ k
        K = (wfac[:, None, None] * np.sin(tau[None, :, None] * kdot[:, None, None])
             * np.sin(kvec[:, 0, None, None] * x0 + kvec[:, 1, None, None] * x1)
             * prof(2.0 * np.hypot(x0, x1).ravel()).reshape(x0.shape))
        A = pad[i1][:, :, cols]                                             # (t, tau, l)
        B = pad[i2][:, :, :, :n_modes]                                      # (t, tau, sigma, l)
        out[:, a] = np.einsum("lus,tul,tusl->t", K, A, B)
    out *= dt * dt * (TWO_PI / L) ** 2
    rho_norm = math.sqrt(float(np.sum(np.abs(out) ** 2)) * dt * (TWO_PI / L) ** 2)
    phi_norm = math.sqrt(float(np.sum(phi_vals ** 2)) * dt * dx * dx)
    return rho_norm / phi_norm ** 2, rho_norm, phi_norm


def rho_q2_bound_check(dist, pot, phi, *, max_change=0.2):
    """Empirical ||rho_Q2|| / ||phi||^2 at two resolutions of ``phi``.

    ``phi`` plays rho_Q.  The coarse level keeps every second sample in each
    axis; a relative change above ``max_change`` between the levels raises
    ResolutionError.  This measures finiteness and stability of the ratio
    only.
    """
    kern = SecondOrderKernel(dist, pot)
    kern.require_decay()
    wsup = pot.weighted_sup_norm()
    if not math.isfinite(wsup):
        raise PreconditionError("(1 + |k|^(1/2)) w_hat(k) is not bounded on the sampled grid")
    vals = phi.values
    if not np.any(vals):
        return RhoQ2Report(0.0, 0.0, 0.0, 0.0, 0.0, wsup)
    g = phi.grid
    fine = _rho_q2_ratio(kern, vals, g.dt, g.dx, g.L_len)
    if g.n_t % 2 or g.n_x % 2:
        raise ResolutionError("grid sizes must be even to form the coarse level")
    coarse = _rho_q2_ratio(kern, vals[::2, ::2, ::2], 2 * g.dt, 2 * g.dx, g.L_len)
    change = abs(fine[0] - coarse[0]) / max(abs(fine[0]), 1e-300)
    if change > max_change:
        raise ResolutionError(f"second-order ratio changed by {change:.3g} under refinement")
    return RhoQ2Report(fine[0], coarse[0], change, fine[1], fine[2], wsup,
                       levels={"fine": (g.n_t, g.n_x), "coarse": (g.n_t // 2, g.n_x // 2)})
