"""Small quadrature toolbox: composite Gauss-Legendre rules, sphere areas,
and Wynn's epsilon algorithm for accelerating slowly convergent sums."""

from functools import lru_cache
import math

import numpy as np


def sphere_area(n):
    """Surface area |S^n| of the unit n-sphere in R^(n+1)."""
    if n < 0:
        raise ValueError("sphere dimension must be >= 0")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


@lru_cache(maxsize=64)
def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a, b, order=64):
    """Nodes and weights of an ``order``-point Gauss-Legendre rule on [a, b]."""
    x, w = _gl(order)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def composite_nodes(edges, order=16):
    """Gauss-Legendre nodes/weights on every panel [edges[i], edges[i+1]].

    Returns flat arrays; the caller sums ``weights * f(nodes)``.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = _gl(order)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    nodes = 0.5 * (left + right) + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def sin2_map(a, b, order):
    """Nodes/weights on [a, b] after s = a + (b - a) sin^2(theta).

    Removes square-root endpoint behaviour at both ends, which is what the
    Lindhard integrands have at their branch points.
    """
    th, wt = gauss_legendre(0.0, 0.5 * math.pi, order)
    s = a + (b - a) * np.sin(th) ** 2
    jac = (b - a) * np.sin(2.0 * th)
    return s, wt * jac


def wynn_epsilon(partial_sums):
    """Accelerated limit of a sequence of partial sums.

    Returns ``(limit, error_estimate)``; the error estimate is the distance
    between the last two diagonal estimates.
    """
    s = [complex(v) for v in partial_sums]
    n = len(s)
    if n < 3:
        return s[-1], abs(s[-1] - s[-2]) if n == 2 else float("inf")
    e_prev = [0j] * (n + 1)
    e_curr = list(s)
    estimates = [s[-1]]
    for k in range(1, n):
        e_next = []
        for i in range(len(e_curr) - 1):
            diff = e_curr[i + 1] - e_curr[i]
            if diff == 0:
                e_next.append(complex(1e300))
            else:
                e_next.append(e_prev[i + 1] + 1.0 / diff)
        e_prev, e_curr = e_curr, e_next
        if k % 2 == 0 and e_curr:
            estimates.append(e_curr[-1])
        if len(e_curr) < 2:
            break
    if len(estimates) < 2:
        return estimates[-1], abs(s[-1] - s[-2])
    return estimates[-1], abs(estimates[-1] - estimates[-2])
