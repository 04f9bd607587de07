"""Quadrature rules: composite Gauss-Legendre, polar disk rules, scrambled Sobol."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.stats import qmc


@lru_cache(maxsize=64)
def _leggauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_panels(a, b, panels, order=16):
    """Composite Gauss-Legendre rule on ``[a, b]`` with equal panels."""
    x, w = _leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def panels_for(length, kmax, per_unit=2.0, minimum=2):
    """Panel count resolving oscillation ``exp(i kmax x)`` over ``length``.

    With 16 nodes per panel, ``per_unit=2`` panels per unit length gives the
    32 nodes per unit length floor; oscillation adds one panel per radian·π.
    """
    return max(minimum, int(math.ceil(length * per_unit)), int(math.ceil(length * kmax / math.pi)))


def disk_rule(center, radius, n_r=32, n_theta=64):
    """Polar product rule on a 2D disk: Gauss in r (with Jacobian), trapezoid in θ."""
    x, w = _leggauss(n_r)
    r = 0.5 * radius * (x + 1.0)
    wr = 0.5 * radius * w * r
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    wt = 2.0 * math.pi / n_theta
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([center[0] + rr * np.cos(tt), center[1] + rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    weights = np.repeat(wr * wt, n_theta)
    return pts, weights


def sobol_replicates(dim, n_points, n_rep, seed):
    """``n_rep`` independently scrambled Sobol point sets in ``[0,1)^dim``.

    ``n_points`` is rounded up to a power of two per replicate.
    """
    m = max(1, int(math.ceil(math.log2(max(2, n_points)))))
    children = np.random.SeedSequence(seed).spawn(n_rep)
    return [qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(s)).random_base2(m) for s in children]
