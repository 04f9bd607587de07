"""A smooth bump vanishing on ``W_δ(L)``: finite polynomial decay, zero observed mass.

The bump is the standard mollifier ``A·exp(−1/(1 − |x−c|²/r²))`` placed in
a gap of the ball union.  Its coefficients decay faster than any power of
the eigenvalues, so it belongs to every polynomial class, yet it carries no
mass on ``W_δ(L)``: no positive observability constant exists for those
classes.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import sympy as sp
from scipy import integrate, optimize

from .errors import HypothesisViolation, InconclusiveError, QuadratureError
from .funclass import certify_A, certify_polynomial
from .quadrature import disk_rule
from .spectral import project

MAX_ORDER = 8


@dataclass(frozen=True)
class BumpSpec:
    center: np.ndarray
    radius: float
    amplitude: float = 1.0

    @property
    def d(self):
        return len(self.center)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        q = np.sum((x - self.center) ** 2, axis=1) / self.radius**2
        inside = q < 1.0
        out = np.zeros(len(x))
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - q[inside]))
        return out

    def support_box(self):
        return (list(self.center - self.radius), list(self.center + self.radius))

    def to_dict(self):
        return {"center": [float(c) for c in self.center], "radius": self.radius, "amplitude": self.amplitude}


def _clearance(c, seq, domain):
    """Radius of the largest open ball at ``c`` inside the cube and outside every ``B(z_j, δ)``."""
    c = np.atleast_2d(c)
    wall = domain.L / 2.0 - np.max(np.abs(c), axis=1)
    dist = np.sqrt(((c[:, None, :] - seq.points[None, :, :]) ** 2).sum(-1)).min(axis=1) - seq.delta
    return np.minimum(wall, dist)


def find_gap(seq, domain=None, radius_fraction=0.9, amplitude=1.0):
    """Place a bump in the widest gap of ``Λ_L ∖ W_δ(L)`` that meets the central cell.

    In one dimension the gaps are intervals and the bump sits at the midpoint
    of the longest one (ties go right).  In two dimensions the centre
    maximises the clearance over the central cell.  The radius is
    ``radius_fraction`` times the clearance.
    """
    domain = domain or seq.domain
    if not 0 < radius_fraction <= 1:
        raise ValueError(f"radius_fraction must lie in (0, 1], got {radius_fraction}")
    half_cell = seq.G / 2.0
    if domain.d == 1:
        half = domain.L / 2.0
        balls = sorted((z - seq.delta, z + seq.delta) for z in seq.points[:, 0])
        edges = [-half] + [e for ab in balls for e in ab] + [half]
        best = None
        for a, b in zip(edges[::2], edges[1::2]):
            if b - a <= 0 or b < -half_cell or a > half_cell:
                continue
            if best is None or b - a >= best[1] - best[0] - 1e-15:
                best = (a, b)
        if best is None:
            raise HypothesisViolation("no gap next to the central cell", "δ < G/2")
        center = np.array([0.5 * (best[0] + best[1])])
        clear = 0.5 * (best[1] - best[0])
    else:
        g = np.linspace(-half_cell, half_cell, 201)
        X, Y = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        vals = _clearance(pts, seq, domain)
        order = np.lexsort((pts[:, 1], pts[:, 0], vals))
        start = pts[order[-1]]
        res = optimize.minimize(lambda c: -_clearance(c, seq, domain)[0], start, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14})
        center = res.x if -res.fun >= vals[order[-1]] else start
        clear = float(_clearance(center, seq, domain)[0])
    if not clear > 0:
        raise HypothesisViolation("no gap of positive width for the bump", "δ < G/2")
    return BumpSpec(np.asarray(center, dtype=float), float(radius_fraction * clear), float(amplitude))


@functools.lru_cache(maxsize=None)
def _profile_derivative(d, N, axis):
    s = sp.symbols(f"s0:{d}", real=True)
    q = sum(v**2 for v in s)
    expr = sp.diff(sp.exp(-1 / (1 - q)), s[axis], N)
    return sp.lambdify(s, expr, "numpy")


def _safe(fn, pts):
    q = np.sum(pts**2, axis=1)
    ok = q < 1.0 - 1e-3
    out = np.zeros(len(pts))
    with np.errstate(all="ignore"):
        out[ok] = fn(*pts[ok].T)
    return out


@functools.lru_cache(maxsize=None)
def unit_derivative_norm(d, N, axis=0):
    """``∫_{|s|<1} (∂_axis^N ρ)² ds`` for the unit mollifier ``ρ``."""
    fn = _profile_derivative(d, N, axis)
    if d == 1:
        val, err = integrate.quad(lambda s: _safe(fn, np.array([[s]]))[0] ** 2, -1.0, 1.0,
                                  limit=400, epsabs=0.0, epsrel=1e-12)
        return val
    vals = []
    for n_r, n_t in ((160, 128), (320, 256)):
        pts, w = disk_rule(np.zeros(2), 1.0, n_r, n_t)
        vals.append(float(np.sum(w * _safe(fn, pts) ** 2)))
    if abs(vals[1] - vals[0]) > 1e-9 * abs(vals[1]):
        raise QuadratureError(f"disk quadrature for order {N} did not converge")
    return vals[1]


def derivative_norms(spec, N):
    """``[‖∂_i^N φ‖² for i < d]`` through ``A² r^{d−2N} J_N``; ``N`` even and at most 8."""
    if N % 2 or N < 0:
        raise ValueError(f"N must be a non-negative even integer, got {N}")
    if N > MAX_ORDER:
        raise ValueError(f"derivative orders above {MAX_ORDER} are not supported")
    scale = spec.amplitude**2 * spec.radius ** (spec.d - 2 * N)
    return [scale * unit_derivative_norm(spec.d, N, i) for i in range(spec.d)]


def order_for(kappa):
    """Least even integer strictly above ``kappa``."""
    return 2 * (int(math.floor(kappa / 2.0)) + 1)


@dataclass(frozen=True)
class LemmaReport:
    kappa: float
    N: int
    weighted_sum: float
    bound: float
    bound_stated: float
    tail: float
    derivative_norms: list
    decay_slope: float
    n_modes: int

    @property
    def gap(self):
        return self.bound - self.weighted_sum

    @property
    def holds(self):
        return self.weighted_sum < self.bound

    @property
    def conclusive(self):
        return self.tail <= 0.01 * self.gap

    def to_dict(self):
        return {"kappa": self.kappa, "N": self.N, "weighted_sum": self.weighted_sum, "bound": self.bound,
                "bound_stated": self.bound_stated, "tail": self.tail, "gap": self.gap, "holds": self.holds,
                "conclusive": self.conclusive, "derivative_norms": self.derivative_norms,
                "decay_slope": self.decay_slope, "n_modes": self.n_modes}


def bump_function(spec, system, tol=1e-10):
    """Expansion of the bump in ``system``; the quadrature runs over the bump's box only."""
    return project(system, spec, support=spec.support_box(), tol=tol)


def decay_slope(phi, tail_fraction=1.0 / 3.0, rel_floor=1e-12):
    """Slope of ``log sup_{j≥k}|α_j|`` against ``log E_k`` over the top of the resolved range.

    Coefficients below ``rel_floor·max|α|`` count as unresolved.  The fit
    uses the last ``tail_fraction`` of the resolved ``log E`` interval, where
    super-polynomial decay shows up as a steep slope.
    """
    E = phi.system.E
    a = np.abs(phi.alpha)
    env = np.maximum.accumulate(a[::-1])[::-1]
    keep = (E > 0) & (env > rel_floor * a.max())
    if keep.sum() < 3:
        return math.nan
    logE = np.log(E[keep])
    lo, hi = logE.min(), logE.max()
    sel = logE >= hi - tail_fraction * (hi - lo)
    if sel.sum() < 3:
        sel = np.ones_like(logE, dtype=bool)
    return float(np.polyfit(logE[sel], np.log(env[keep][sel]), 1)[0])


def verify_lemma_polynomial(spec, kappa, system, phi=None):
    """``Σ|E_k|^κ|α_k|²`` against ``C = (π/L)^{2κ}·c_N·(L/π)^{2N}·Σ_i‖∂_i^Nφ‖²``.

    ``c_N = max(N, d^{N−1})``: the factor ``N`` alone does not dominate
    ``|y|^{2N} ≤ d^{N−1} Σ_i y_i^{2N}`` once ``d^{N−1} > N``.  ``bound_stated``
    keeps the plain ``N`` for comparison.  ``tail`` bounds the weighted mass
    of the modes beyond the basis cut-off.
    """
    if system.potential.family != "zero" and not (system.potential.is_constant
                                                  and system.potential.offset == 0.0):
        raise HypothesisViolation("the polynomial-decay lemma assumes V ≡ 0", "V ≡ 0")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    N = order_for(kappa)
    dom = system.domain
    d, L = dom.d, dom.L
    phi = phi if phi is not None else bump_function(spec, system)
    norms = derivative_norms(spec, N)
    pre = (math.pi / L) ** (2 * kappa)
    lift = (L / math.pi) ** (2 * N) * sum(norms)
    bound = pre * max(N, d ** (N - 1)) * lift
    bound_stated = pre * N * lift
    a2 = np.abs(phi.alpha) ** 2
    wsum = float(np.sum(np.abs(system.E) ** kappa * a2))
    # Ψ = I for V ≡ 0, so |α_k|² are the |⟨e_y, φ⟩|²
    y = system.basis.y.astype(float)
    retained = float(np.sum((np.abs(y) ** (2 * N)) * a2[:, None]))
    y_cut = math.sqrt(float((y**2).sum(1).max()))
    tail = pre * y_cut ** (-2.0 * (N - kappa)) * d ** (N - 1) * max(lift - retained, 0.0)
    return LemmaReport(float(kappa), N, wsum, bound, bound_stated, tail, norms, decay_slope(phi), len(system))


@dataclass(frozen=True)
class CorollaryReport:
    spec: BumpSpec
    mass_ratio: float
    D_poly: float
    log_D_B_exponential: float
    lemma: LemmaReport

    @property
    def witnessed(self):
        return self.mass_ratio < 1e-10 and math.isfinite(self.D_poly) and self.lemma.holds

    def to_dict(self):
        return {"bump": self.spec.to_dict(), "mass_ratio": self.mass_ratio, "D_poly": self.D_poly,
                "log_D_B_exponential": self.log_D_B_exponential, "witnessed": self.witnessed,
                "lemma": self.lemma.to_dict()}


def corollary_demo(spec, seq, kappa, system, kappa_exp=49.0):
    """Both witnesses: a finite polynomial certificate and a vanishing mass ratio.

    Also reports the exponential-class certificate at rate ``kappa_exp``,
    which is astronomically large for the same function.
    """
    from .observability import gram, mass_ratio

    phi = bump_function(spec, system)
    ratio = mass_ratio(phi, gram_matrix=gram(system, seq))
    lemma = verify_lemma_polynomial(spec, kappa, system, phi)
    if not lemma.conclusive:
        raise InconclusiveError(f"truncation tail {lemma.tail:.3e} exceeds 1% of the gap {lemma.gap:.3e}; "
                                "raise lambda_max")
    return CorollaryReport(spec, ratio, certify_polynomial(phi, kappa), certify_A(phi, kappa_exp).log_D_B_min,
                           lemma)
