"""The ghost-dimension extension ``F_n`` and its ``H¹`` norms.

``F_n(x, t) = Σ_k α_k ψ_k(x) s_k(t)`` on ``Λ_{RL} × R`` where ``s_k`` is the
solution of ``s'' = E_k s`` with ``s(0) = 0`` and ``s'(0) = 1``.  The
eigenfunctions are continued past the cube by reflection (Dirichlet: odd,
Neumann: even) or periodically; for the trigonometric basis used here the
continuation coincides with the global closed-form expression, which the
folding evaluator below checks independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _trig
from .constants import gamma_of, r_values
from .errors import HypothesisViolation
from .geometry import Region, make_equidistributed
from .quadrature import gauss_panels, panels_for, sobol_replicates

SERIES_CUTOFF = 1e-12


def s_eval(E, t, deriv=0):
    """``s_k(t)`` (or ``s_k'(t)`` for ``deriv=1``); broadcasts ``E`` against ``t``.

    Branches: ``sinh(ωt)/ω`` for ``E > 0``, ``t`` for ``E = 0`` and
    ``sin(ωt)/ω`` for ``E < 0`` with ``ω = √|E|``.  Below ``|E| = 1e-12`` the
    series ``t + E t³/6`` replaces the removable singularity.
    """
    E, t = np.broadcast_arrays(np.asarray(E, dtype=float), np.asarray(t, dtype=float))
    small = np.abs(E) < SERIES_CUTOFF
    w = np.sqrt(np.where(small, 1.0, np.abs(E)))
    if deriv == 0:
        out = np.where(E > 0, np.sinh(w * t) / w, np.sin(w * t) / w)
        return np.where(small, t + E * t**3 / 6.0, out)
    if deriv == 1:
        out = np.where(E > 0, np.cosh(w * t), np.cos(w * t))
        return np.where(small, 1.0 + E * t**2 / 2.0, out)
    raise ValueError("deriv must be 0 or 1")


def _s_scaled(E, t, deriv, h):
    """``s_k(t)·e^{-h}`` (or its derivative) without overflow; shapes ``(npts, n)``."""
    E = np.asarray(E, dtype=float)[None, :]
    t = np.asarray(t, dtype=float)[:, None]
    w = np.sqrt(np.abs(E))
    wt = w * np.abs(t)
    big = (E > 0) & (wt > 600.0)
    base = s_eval(E, np.where(big, 0.0, t), deriv) * math.exp(-h)
    if not big.any():
        return base
    sgn = np.sign(t) if deriv == 0 else 1.0
    ws = np.where(w > 0, w, 1.0)
    tail = 0.5 * sgn * np.exp(wt - h) / (ws if deriv == 0 else 1.0)
    return np.where(big, tail, base)


@dataclass(frozen=True, eq=False)
class GhostFunction:
    """``F_n`` for the first ``n = len(alpha)`` modes of ``system``."""

    system: object
    alpha: np.ndarray

    @classmethod
    def from_function(cls, phi, n=None):
        n = len(phi.alpha) if n is None else n
        return cls(phi.system, np.asarray(phi.alpha[:n], dtype=complex))

    @property
    def n(self):
        return len(self.alpha)

    @property
    def E(self):
        return self.system.E[: self.n]

    @property
    def omega(self):
        return np.sqrt(np.abs(self.E))

    @property
    def skind(self):
        return np.where(np.abs(self.E) < SERIES_CUTOFF, "linear", np.where(self.E > 0, "sinh", "sin"))

    @property
    def v_inf(self):
        b = self.system.bounds
        return 0.0 if b is None else float(b.v_inf)

    def psi(self, x):
        return self.system.psi(x)[:, : self.n]

    def grad_psi(self, x):
        return self.system.grad_psi(x)[:, : self.n, :]

    def phi_n(self, x):
        """``φ_n = Σ_{k<n} α_k ψ_k``."""
        return self.psi(np.atleast_2d(x)) @ self.alpha


def eval_F(gf, x, t):
    """``F_n`` at points ``x`` (``(npts, d)``) and heights ``t`` (``(npts,)`` or scalar)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
    s = s_eval(gf.E[None, :], t[:, None])
    return np.sum(gf.psi(x) * s * gf.alpha[None, :], axis=1)


def eval_gradF(gf, x, t):
    """``∇F_n`` with the ghost derivative last, shape ``(npts, d+1)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
    s = s_eval(gf.E[None, :], t[:, None])
    ds = s_eval(gf.E[None, :], t[:, None], 1)
    gx = np.einsum("pkl,pk,k->pl", gf.grad_psi(x), s, gf.alpha)
    gt = np.sum(gf.psi(x) * ds * gf.alpha[None, :], axis=1)
    return np.concatenate([gx, gt[:, None]], axis=1)


@dataclass(frozen=True, eq=False)
class ExtendedFunction:
    """A function on ``Λ_L`` continued to ``Λ_{RL}`` by folding.

    ``parity='odd'`` flips sign across each reflection (Dirichlet
    eigenfunctions); ``'even'`` reflects symmetrically (potentials and
    Neumann eigenfunctions).  Periodic continuation ignores parity.
    """

    base: object
    domain: object
    bc: str
    R: int
    parity: str = "even"

    def fold(self, x):
        """Map points of ``Λ_{RL}`` into ``Λ_L``; returns ``(folded, sign)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        L, R = self.domain.L, self.R
        u = x + R * L / 2.0
        m = np.clip(np.floor(u / L), 0, R - 1)
        r = u - m * L
        rel = (m - (R - 1) // 2).astype(int)
        if self.bc == "periodic":
            return r - L / 2.0, np.ones(len(x))
        odd = rel % 2 == 1
        local = np.where(odd, L / 2.0 - r, r - L / 2.0)
        sign = np.ones(len(x))
        if self.parity == "odd":
            sign = np.prod(np.where(odd, -1.0, 1.0), axis=1)
        return local, sign

    def __call__(self, x):
        local, sign = self.fold(x)
        vals = np.asarray(self.base(local))
        return vals * (sign if vals.ndim == 1 else sign[:, None])


def extend(f, bc=None, R=None, domain=None, kind="eigenfunction"):
    """Continue ``f`` (a callable on ``Λ_L``) to ``Λ_{RL}``; ``R`` must be odd.

    ``kind='eigenfunction'`` uses the sign rule of the boundary condition;
    ``kind='potential'`` always reflects symmetrically.
    """
    domain = domain if domain is not None else f.system.domain
    bc = bc or domain.bc
    R = r_values(domain.d)[0] if R is None else int(R)
    if R < 1 or R % 2 == 0:
        raise ValueError(f"R must be an odd positive integer, got {R}")
    parity = "odd" if (kind == "eigenfunction" and bc == "dirichlet") else "even"
    return ExtendedFunction(f, domain, bc, R, parity)


def extended_potential(system, R=None):
    pot, dom = system.potential, system.domain
    return extend(lambda x: pot.evaluate(x, dom), dom.bc, R, dom, kind="potential")


# ---------------------------------------------------------------------------
# H¹ norms


@dataclass(frozen=True)
class H1Norm:
    """``‖F_n‖²_{H¹(Ω)} = exp(log_value)`` with an absolute error estimate relative to it."""

    log_value: float
    rel_error: float
    method: str
    flagged: bool = False

    @property
    def value(self):
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf

    @property
    def error(self):
        return self.rel_error * self.value


def _time_terms(E, span):
    """Exponential-polynomial form ``Σ coef·t^m·e^{ct}`` of ``s`` and ``s'`` per mode."""
    s_terms, ds_terms = [], []
    for e in E:
        if abs(e) * span**2 < 1e-3:
            s, ds = [], []
            for j in range(12):
                if j and abs(e) ** j * max(span, 1.0) ** (2 * j) < 1e-18:
                    break
                s.append((e**j / math.factorial(2 * j + 1), 0.0, 2 * j + 1))
                ds.append((e**j / math.factorial(2 * j), 0.0, 2 * j))
        elif e > 0:
            w = math.sqrt(e)
            s = [(0.5 / w, w, 0), (-0.5 / w, -w, 0)]
            ds = [(0.5, w, 0), (0.5, -w, 0)]
        else:
            w = math.sqrt(-e)
            s = [(0.5 / (1j * w), 1j * w, 0), (-0.5 / (1j * w), -1j * w, 0)]
            ds = [(0.5, 1j * w, 0), (0.5, -1j * w, 0)]
        s_terms.append(s)
        ds_terms.append(ds)
    return s_terms, ds_terms


def _pack(terms):
    width = max(len(t) for t in terms)
    coef = np.zeros((len(terms), width), dtype=complex)
    c = np.zeros((len(terms), width), dtype=complex)
    m = np.zeros((len(terms), width), dtype=int)
    for k, row in enumerate(terms):
        for j, (a, b, p) in enumerate(row):
            coef[k, j], c[k, j], m[k, j] = a, b, p
    return coef, c, m


def _product_integrals(terms, a, b, shift):
    """``∫_a^b f_j f_k e^{-shift}`` for the packed term lists (real ``f``)."""
    coef, c, m = _pack(terms)
    n, width = coef.shape
    out = np.zeros((n, n), dtype=complex)
    for i in range(width):
        for j in range(width):
            cc = coef[:, None, i] * coef[None, :, j]
            live = cc != 0
            if not live.any():
                continue
            csum = c[:, None, i] + c[None, :, j]
            msum = m[:, None, i] + m[None, :, j]
            for mv in np.unique(msum[live]):
                sel = live & (msum == mv)
                out[sel] += cc[sel] * _trig.texp_integral(int(mv), csum[sel], a, b, shift)
    return out.real


def time_grams(E, a, b):
    """``(P, Q, shift)`` with ``P_jk = ∫ s_j s_k e^{-shift}`` and ``Q`` the same for ``s'``."""
    span = max(abs(a), abs(b))
    wmax = float(np.sqrt(np.maximum(E, 0.0)).max(initial=0.0))
    shift = 2.0 * wmax * span
    s_terms, ds_terms = _time_terms(E, span)
    return _product_integrals(s_terms, a, b, shift), _product_integrals(ds_terms, a, b, shift), shift


def _space_grams(gf, lo, hi):
    basis, Psi = gf.system.basis, gf.system.Psi[:, : gf.n]
    A = Psi.conj().T @ basis.gram_box(lo, hi) @ Psi
    B = sum(Psi.conj().T @ basis.gram_box(lo, hi, deriv_axis=l) @ Psi for l in range(basis.domain.d))
    return A, B


def _h1_exact(gf, region):
    lo, hi = region.lo, region.hi
    A, B = _space_grams(gf, lo[:-1], hi[:-1])
    P, Q, shift = time_grams(gf.E, lo[-1], hi[-1])
    form = A * (P + Q) + B * P
    val = float(np.vdot(gf.alpha, form @ gf.alpha).real)
    scale = float(np.abs(gf.alpha) @ np.abs(form) @ np.abs(gf.alpha))
    log_val = shift + math.log(val) if val > 0 else -math.inf
    rel = 1e-13 * scale / val if val > 0 else math.inf
    return H1Norm(log_val, rel, "exact")


def _h1_tensor_once(gf, lo, hi, refine):
    """Separable composite Gauss: quadrature Grams in ``x`` and in ``t`` contracted with ``α``."""
    d = gf.system.domain.d
    kmax = gf.system.basis.kmax
    axes = [gauss_panels(lo[l], hi[l], refine * panels_for(hi[l] - lo[l], kmax)) for l in range(d)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=1)
    wx = np.ones(1)
    for a in axes:
        wx = np.multiply.outer(wx, a[1]).ravel()
    psi = gf.psi(x)
    A = psi.conj().T @ (wx[:, None] * psi)
    grad = gf.grad_psi(x)
    B = sum(grad[:, :, l].conj().T @ (wx[:, None] * grad[:, :, l]) for l in range(d))
    a, b = lo[-1], hi[-1]
    wmax = float(gf.omega[gf.E > 0].max(initial=0.0))
    t, wt = gauss_panels(a, b, refine * panels_for(b - a, wmax + 1.0))
    h = wmax * max(abs(a), abs(b))
    S = _s_scaled(gf.E, t, 0, h)
    dS = _s_scaled(gf.E, t, 1, h)
    P = S.T @ (wt[:, None] * S)
    Q = dS.T @ (wt[:, None] * dS)
    form = A * (P + Q) + B * P
    return float(np.vdot(gf.alpha, form @ gf.alpha).real), 2.0 * h


def _h1_tensor(gf, region):
    v1, shift = _h1_tensor_once(gf, region.lo, region.hi, 1)
    v2, _ = _h1_tensor_once(gf, region.lo, region.hi, 2)
    if not v2 > 0:
        return H1Norm(-math.inf, 0.0, "tensor-gauss")
    return H1Norm(shift + math.log(v2), abs(v2 - v1) / v2, "tensor-gauss")


def _integrand(gf, pts):
    x, t = pts[:, :-1], pts[:, -1]
    F = eval_F(gf, x, t)
    g = eval_gradF(gf, x, t)
    return np.abs(F) ** 2 + np.sum(np.abs(g) ** 2, axis=1)


def _h1_qmc(gf, region, n_points, n_rep, seed, chunk=1 << 15):
    pieces = region.pieces()
    per_piece = max(2, n_points // max(1, len(pieces)))
    reps = np.zeros(n_rep)
    for ip, piece in enumerate(pieces):
        lo, hi = piece.bounding_box()
        vol = float(np.prod(hi - lo))
        for r, u in enumerate(sobol_replicates(len(lo), per_piece, n_rep, [int(seed), ip])):
            acc = 0.0
            for s in range(0, len(u), chunk):
                pts = lo + u[s:s + chunk] * (hi - lo)
                inside = piece.contains(pts)
                if inside.any():
                    acc += float(np.sum(_integrand(gf, pts[inside])))
            reps[r] += vol * acc / len(u)
    mean = float(reps.mean())
    err = float(reps.std(ddof=1) / math.sqrt(n_rep)) if n_rep > 1 else math.inf
    if not mean > 0:
        return H1Norm(-math.inf, math.inf, "quasi-mc")
    return H1Norm(math.log(mean), err / mean, "quasi-mc")


def h1_norm(gf, region, quad=None, n_points=1 << 20, n_rep=8, seed=0, tol=1e-6):
    """``‖F_n‖²_{H¹(region)}`` with an error estimate.

    ``quad`` is ``'exact'`` (closed form, boxes only), ``'tensor-gauss'``
    (boxes, doubling estimate) or ``'quasi-mc'`` (any region; scrambled
    Sobol replicates, standard error).  Defaults to ``'exact'`` for boxes.
    The result is flagged, not rejected, when the error exceeds ``tol``.
    """
    quad = quad or ("exact" if region.is_box else "quasi-mc")
    if quad in ("exact", "tensor-gauss") and not region.is_box:
        raise ValueError(f"{quad} quadrature needs a box region, got {region.kind}")
    if quad == "exact":
        res = _h1_exact(gf, region)
    elif quad == "tensor-gauss":
        res = _h1_tensor(gf, region)
    elif quad == "quasi-mc":
        res = _h1_qmc(gf, region, n_points, n_rep, seed)
    else:
        raise ValueError(f"unknown quadrature {quad!r}")
    return H1Norm(float(res.log_value), float(res.rel_error), res.method, bool(res.rel_error > tol))


# ---------------------------------------------------------------------------
# checks of the two-sided bound and the interpolation inequalities


def beta(E, T):
    """``e^{2T√E}`` for ``E > 0`` and ``1`` otherwise."""
    E = np.asarray(E, dtype=float)
    return np.exp(2.0 * T * np.sqrt(np.maximum(E, 0.0)))


@dataclass(frozen=True)
class TwoSidedReport:
    T: float
    R: int
    lower: float
    middle: float
    upper: float
    middle_r1: float
    middle_quadrature: float | None
    quad_rel_error: float | None
    tol: float

    @property
    def lower_ok(self):
        return self.lower <= self.middle * (1 + self.tol) and self.lower <= self.middle_r1 * (1 + self.tol)

    @property
    def upper_ok(self):
        return self.middle <= self.upper * (1 + self.tol) and self.middle_r1 <= self.upper * (1 + self.tol)

    @property
    def routes_agree(self):
        if self.middle_quadrature is None:
            return True
        return abs(self.middle_quadrature - self.middle) <= self.tol * self.middle

    @property
    def ok(self):
        return self.lower_ok and self.upper_ok and self.routes_agree

    def to_dict(self):
        return {"T": self.T, "R": self.R, "lower": self.lower, "middle": self.middle, "upper": self.upper,
                "middle_r1": self.middle_r1, "middle_quadrature": self.middle_quadrature,
                "quad_rel_error": self.quad_rel_error, "lower_ok": self.lower_ok,
                "upper_ok": self.upper_ok, "routes_agree": self.routes_agree, "ok": self.ok}


def verify_two_sided(gf, T, tol=1e-6, quadrature=True):
    """The three quantities of the two-sided ``H¹`` bound on ``Λ_{RL} × [−T, T]``.

    The middle term is computed in closed form on ``Λ_{RL}`` (divided by
    ``R^d``) and on ``Λ_L`` (the ``R = 1`` variant); with ``quadrature`` it is
    also integrated by tensor Gauss on ``Λ_{RL}`` as an independent route.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    dom = gf.system.domain
    if abs(dom.L - round(dom.L)) > 1e-12 or int(round(dom.L)) % 2 == 0:
        raise HypothesisViolation(f"the two-sided bound is stated for odd integer L, got {dom.L}", "L ∈ N_odd")
    R, _ = r_values(dom.d)
    big = Region.box([-R * dom.L / 2.0] * dom.d + [-T], [R * dom.L / 2.0] * dom.d + [T])
    cube = Region.box([-dom.L / 2.0] * dom.d + [-T], [dom.L / 2.0] * dom.d + [T])
    mass = float(np.vdot(gf.alpha, gf.alpha).real)
    middle = _h1_exact(gf, big).value / R**dom.d
    middle_r1 = _h1_exact(gf, cube).value
    lower = T / 2.0 * mass
    upper = 2.0 * T * (1.0 + (1.0 + gf.v_inf) * T**2) * float(beta(gf.E, T) @ np.abs(gf.alpha) ** 2)
    mq = qerr = None
    if quadrature:
        q = _h1_tensor(gf, big)
        mq, qerr = q.value / R**dom.d, q.rel_error
    return TwoSidedReport(float(T), R, lower, middle, upper, middle_r1, mq, qerr, tol)


@dataclass(frozen=True)
class InterpolationReport:
    delta: float
    gamma: float
    w_mass: float
    h1_U1: H1Norm
    h1_U3: H1Norm
    h1_X1: H1Norm
    h1_Xt: H1Norm
    log_D1: float
    log_D2: float

    @property
    def D1_infinite(self):
        return math.isinf(self.log_D1)

    def to_dict(self):
        def norm(h):
            return {"log_value": h.log_value, "rel_error": h.rel_error, "method": h.method, "flagged": h.flagged}
        return {"delta": self.delta, "gamma": self.gamma, "w_mass": self.w_mass, "log_D1": self.log_D1,
                "log_D2": self.log_D2, "D1_infinite": self.D1_infinite, "h1_U1": norm(self.h1_U1),
                "h1_U3": norm(self.h1_U3), "h1_X1": norm(self.h1_X1), "h1_Xt": norm(self.h1_Xt)}


def measure_interpolation(gf, seq, n_points=1 << 16, n_rep=8, seed=0, qmc_tol=1e-3):
    """Implied constants ``D̂_1`` and ``D̂_2`` of the two interpolation inequalities.

    ``D̂_1 = ‖F‖_{U_1} / (‖φ_n‖^{1/2}_{W_δ} ‖F‖^{1/2}_{U_3})`` and
    ``D̂_2 = ‖F‖_{X_1} / (‖F‖^γ_{U_1} ‖F‖^{1−γ}_{X̃_{R_3}})``, returned as
    logarithms.  ``log_D1 = +inf`` when ``φ_n`` vanishes on ``W_δ``.  The
    ``U_i`` norms are quasi-Monte Carlo estimates, flagged above ``qmc_tol``.
    """
    from .observability import gram

    dom = seq.domain
    if abs(seq.G - 1.0) > 1e-12:
        raise HypothesisViolation("the interpolation inequalities use G = 1", "(1, δ)-equidistributed")
    if abs(dom.L - round(dom.L)) > 1e-12 or int(round(dom.L)) % 2 == 0:
        raise HypothesisViolation(f"L must be an odd integer, got {dom.L}", "L ∈ N_odd")
    if not 0 < seq.delta < 0.5:
        raise HypothesisViolation(f"δ must lie in (0, 1/2), got {seq.delta}", "δ ∈ (0, 1/2)")
    M = gram(gf.system, seq).M[: gf.n, : gf.n]
    w_mass = float(np.vdot(gf.alpha, M @ gf.alpha).real)
    u1 = h1_norm(gf, Region.u(1, seq), "quasi-mc", n_points, n_rep, seed, qmc_tol)
    u3 = h1_norm(gf, Region.u(3, seq), "quasi-mc", n_points, n_rep, seed + 1, qmc_tol)
    x1 = h1_norm(gf, Region.x1(dom), "exact")
    xt = h1_norm(gf, Region.xtilde_r3(dom), "exact")
    g = gamma_of(seq.delta, dom.d)
    # below the rounding floor of α*Mα the mass on W_δ is indistinguishable from zero
    if w_mass <= gf.n * np.finfo(float).eps * float(np.vdot(gf.alpha, gf.alpha).real):
        log_d1 = math.inf
    else:
        log_d1 = 0.5 * u1.log_value - 0.25 * math.log(w_mass) - 0.25 * u3.log_value
    log_d2 = 0.5 * x1.log_value - 0.5 * g * u1.log_value - 0.5 * (1.0 - g) * xt.log_value
    return InterpolationReport(seq.delta, g, w_mass, u1, u3, x1, xt, log_d1, log_d2)


def interpolation_sweep(gf, deltas, mode="centered", seed=0, **kw):
    """``measure_interpolation`` over ``deltas`` plus least-squares slopes of ``ln D̂_i`` vs ``ln(1/δ)``."""
    dom = gf.system.domain
    reports = [measure_interpolation(gf, make_equidistributed(dom, 1.0, dl, mode, seed), seed=seed, **kw)
               for dl in deltas]
    x = np.log(1.0 / np.asarray(deltas, dtype=float))
    slopes = {}
    for key in ("log_D1", "log_D2"):
        y = np.array([getattr(r, key) for r in reports])
        slopes[key] = float(np.polyfit(x, y, 1)[0]) if len(x) >= 2 and np.all(np.isfinite(y)) else math.nan
    return reports, slopes
