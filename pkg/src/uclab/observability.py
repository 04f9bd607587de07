"""Observability constants on ``W_δ(L)``: measured mass ratios and sharp infima.

The mass of ``φ = Σ α_k ψ_k`` on the ball union is the quadratic form
``α* M α`` with the Gram matrix ``M_jk = ∫_W conj(ψ_j) ψ_k``.  The best
constant over a spectral subspace is therefore an eigenvalue of a block of
``M``, and over the coefficient-decay class it is a one-constraint
quadratic program solved through its Lagrange dual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as K
from .errors import HypothesisViolation, InconclusiveError, QuadratureError
from .funclass import LOG_HUGE, certify_A, certify_B
from .geometry import Domain, make_equidistributed
from .quadrature import disk_rule, gauss_panels, panels_for
from .spectral import PotentialSpec, SpectralFunction, build_system


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """``M_jk = ∫_{W_δ(L)} conj(ψ_j) ψ_k`` with provenance of how it was integrated."""

    M: np.ndarray
    system: object
    seq: object
    method: str
    quad_error: float = 0.0

    def __len__(self):
        return len(self.M)


def _gram_modes_1d(basis, seq):
    half = basis.domain.L / 2.0
    out = np.zeros((len(basis), len(basis)), dtype=complex)
    for z in seq.points[:, 0]:
        lo, hi = max(z - seq.delta, -half), min(z + seq.delta, half)
        out += basis.gram_box([lo], [hi])
    return out


def _gram_modes_2d(basis, seq, n_r, n_theta):
    out = np.zeros((len(basis), len(basis)), dtype=complex)
    for z in seq.points:
        pts, w = disk_rule(z, seq.delta, n_r, n_theta)
        vals = basis.eval(pts)
        out += vals.conj().T @ (w[:, None] * vals)
    return out


def _disk_sizes(basis, delta, n_r, n_theta):
    kd = basis.kmax * delta
    return max(n_r, int(math.ceil(kd)) + 16), max(n_theta, 2 * int(math.ceil(2 * kd)) + 32)


def gram(system, seq, n_r=32, n_theta=64, tol=1e-8):
    """Gram matrix of the eigenfunctions over ``W_δ(L)``.

    ``d = 1``: exact trigonometric integrals over each interval.
    ``d = 2``: polar Gauss rule per disk, accepted when doubling both node
    counts changes no entry by more than ``tol``.
    """
    basis = system.basis
    if seq.domain.d != system.domain.d or abs(seq.domain.L - system.domain.L) > 1e-12:
        raise ValueError("sequence and system live on different cubes")
    if system.domain.d == 1:
        Ge, method, err = _gram_modes_1d(basis, seq), "closed-form", 0.0
    else:
        nr, nt = _disk_sizes(basis, seq.delta, n_r, n_theta)
        G1 = _gram_modes_2d(basis, seq, nr, nt)
        Ge = _gram_modes_2d(basis, seq, 2 * nr, 2 * nt)
        err = float(np.max(np.abs(Ge - G1)))
        if err > tol:
            raise QuadratureError(f"disk quadrature changed a Gram entry by {err:.3e} under doubling")
        method = f"polar-gauss {2 * nr}x{2 * nt}"
    M = system.Psi.conj().T @ Ge @ system.Psi
    M = 0.5 * (M + M.conj().T)
    if not basis.is_complex:
        M = M.real
    return GramMatrix(M, system, seq, method, err)


def _as_gram(obj, seq=None):
    if isinstance(obj, GramMatrix):
        return obj
    return gram(obj, seq)


def mass_ratio(phi, seq=None, gram_matrix=None):
    """``‖φ‖²_{W_δ(L)} / ‖φ‖²`` as ``α*Mα / α*α``."""
    g = gram_matrix if gram_matrix is not None else gram(phi.system, seq)
    a = phi.alpha
    den = float(np.vdot(a, a).real)
    if not den > 0:
        raise ValueError("mass ratio of the zero function")
    # the form is positive semidefinite; negative values are rounding
    return max(0.0, float(np.vdot(a, g.M @ a).real) / den)


def mass_on_w(phi, seq, refine=2):
    """``∫_{W_δ(L)} |φ|²`` by direct quadrature of ``φ`` (independent of the Gram path)."""
    basis = phi.system.basis
    total = 0.0
    if basis.domain.d == 1:
        for z in seq.points[:, 0]:
            a, b = z - seq.delta, z + seq.delta
            x, w = gauss_panels(a, b, refine * panels_for(b - a, basis.kmax))
            total += float(np.sum(w * np.abs(phi(x[:, None])) ** 2))
        return total
    nr, nt = _disk_sizes(basis, seq.delta, 32, 64)
    for z in seq.points:
        pts, w = disk_rule(z, seq.delta, refine * nr, refine * nt)
        total += float(np.sum(w * np.abs(phi(pts)) ** 2))
    return total


def cluster_end(E, n, rtol=1e-9):
    """Smallest ``m ≥ n`` such that ``E[m-1]`` and ``E[m]`` are not degenerate."""
    m = n
    while m < len(E) and E[m] - E[m - 1] <= rtol * max(1.0, abs(E[m - 1])):
        m += 1
    return m


@dataclass(frozen=True)
class SubspaceConstant:
    value: float
    alpha: np.ndarray
    n_used: int
    extended: bool


def sharp_subspace_constant(g, n, seq=None):
    """``inf ‖φ‖²_W / ‖φ‖²`` over ``span(ψ_0 … ψ_{n-1})``: the least eigenvalue of that block.

    ``n`` is extended to the end of a degenerate eigenvalue cluster.
    """
    g = _as_gram(g, seq)
    if not 1 <= n <= len(g):
        raise ValueError(f"subspace size must be in [1, {len(g)}]")
    m = cluster_end(g.system.E, n)
    vals, vecs = np.linalg.eigh(g.M[:m, :m])
    alpha = np.zeros(len(g), dtype=complex)
    alpha[:m] = vecs[:, 0]
    # M is positive semidefinite; a negative least eigenvalue is rounding
    return SubspaceConstant(max(0.0, float(vals[0])), alpha, m, m != n)


@dataclass(frozen=True)
class WeightedConstant:
    """Bounds on ``inf α*Mα`` over unit ``α`` with ``Σ w_k|α_k|² ≤ D_B``.

    ``resolution`` is the absolute rounding scale of the eigensolves behind
    both bounds; differences below it carry no information.
    """

    lower: float
    upper: float
    alpha: np.ndarray
    mu: float
    n_used: int
    active: int
    note: str = ""
    resolution: float = 0.0

    @property
    def gap(self):
        return (self.upper - self.lower) / max(abs(self.upper), 1e-300)


# modes whose scaled multiplier μ(w_k/D − 1) exceeds this are eliminated by a
# Schur complement instead of being handed to the dense eigensolver
SCHUR_SPLIT = 64.0
# a feasible α has |α_k|² ≤ D/w_k; beyond e^690 that is below 1e-299
LOG_NEGLIGIBLE = 690.0


def _min_pair(M, chat, mu):
    """Least eigenpair of ``M + μ diag(ĉ)``.

    Heavy modes (``μĉ_k > SCHUR_SPLIT``) are removed through the Schur
    complement ``S(λ) = A_LL − A_LH (A_HH − λ)⁻¹ A_HL`` and the eigenvalue is
    found as the fixed point ``λ = λ_min(S(λ))``.  ``A_HH`` is inverted after
    symmetric diagonal scaling, where it is ``I`` plus a small perturbation,
    so huge weights cost no accuracy.
    """
    with np.errstate(over="ignore"):
        s = mu * chat
    heavy = s > SCHUR_SPLIT
    if not heavy.any():
        vals, vecs = np.linalg.eigh(M + np.diag(s))
        return float(vals[0]), vecs[:, 0]
    lt = np.flatnonzero(~heavy)
    ht = np.flatnonzero(heavy)
    r = 1.0 / np.sqrt(s[ht])
    All = M[np.ix_(lt, lt)] + np.diag(s[lt])
    B = M[np.ix_(lt, ht)]
    Mhh = M[np.ix_(ht, ht)]
    rBh = r[:, None] * B.conj().T
    eye = np.eye(len(ht))
    lam = float(np.linalg.eigvalsh(All)[0])
    for _ in range(60):
        K = eye + r[:, None] * (Mhh - lam * eye) * r[None, :]
        Y = np.linalg.solve(K, rBh)
        vals, vecs = np.linalg.eigh(All - B @ (r[:, None] * Y))
        step = float(vals[0]) - lam
        lam = float(vals[0])
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(lam)):
            break
    vl = vecs[:, 0]
    v = np.zeros(len(chat), dtype=np.result_type(M, vl))
    v[lt] = vl
    v[ht] = -r * (Y @ vl)
    return lam, v / np.linalg.norm(v)


def _weighted(chat, v):
    return float(np.sum(chat * np.abs(v) ** 2))


def _best_in_span(M, chat, p, q):
    """Exact least ``α*Mα`` over unit ``α ∈ span(p, q)`` with ``α*Cα ≤ 0``."""
    q = q - p * np.vdot(p, q)
    nq = np.linalg.norm(q)
    if nq < 1e-12:
        return None
    Q = np.stack([p, q / nq], axis=1)
    Mr = Q.conj().T @ M @ Q
    Cr = Q.conj().T @ (chat[:, None] * Q)
    cands = []
    mv, mvec = np.linalg.eigh(Mr)
    if _herm2(Cr, mvec[:, 0]) <= 0:
        cands.append(mvec[:, 0])
    cv, U = np.linalg.eigh(Cr)
    if cv[0] < 0 < cv[1]:
        # |y1|², |y2|² on the cone c₊|y1|² + c₋|y2|² = 0, y1 along c₊
        p1, p2 = -cv[0] / (cv[1] - cv[0]), cv[1] / (cv[1] - cv[0])
        U = U[:, ::-1]
        N = U.conj().T @ Mr @ U
        b = N[0, 1]
        phase = -np.conj(b) / abs(b) if abs(b) > 0 else 1.0
        cands.append(U @ np.array([math.sqrt(p1), math.sqrt(p2) * phase]))
    elif cv[0] >= 0 and cv[0] <= 1e-15 * max(abs(cv[1]), 1e-300):
        cands.append(U[:, 0])
    if not cands:
        return None
    best = min(cands, key=lambda y: _herm2(Mr, y))
    return _herm2(Mr, best), Q @ best


def _herm2(A, y):
    return float(np.vdot(y, A @ y).real)


def sharp_weighted_constant(g, kappa, D_B, n_trunc=None, seq=None, max_bisect=200):
    """Lower/upper bounds for the least mass ratio over the coefficient-decay class.

    Minimises ``α*Mα`` over unit ``α`` (first ``n_trunc`` modes) subject to
    ``α*(W − D_B I)α ≤ 0``, ``W = diag(exp(κ√max{0,E_k}))``.  The lower bound
    is the Lagrange dual ``max_μ λ_min(M + μ(W/D_B − I))``, located by
    bisection on the sign of its supergradient; the upper bound is the best
    feasible vector in the span of the two eigenvectors bracketing the
    optimal multiplier.  With a single quadratic constraint there is no
    duality gap, so the two meet up to rounding.
    """
    g = _as_gram(g, seq)
    if D_B < 1:
        raise HypothesisViolation("D_B must be ≥ 1", "D_B ≥ 1")
    n = cluster_end(g.system.E, n_trunc or len(g))
    E = g.system.E[:n]
    logw = kappa * np.sqrt(np.maximum(E, 0.0))
    logD = math.log(D_B)
    tol = 1e-13
    if logw.max() <= logD + tol:
        s = sharp_subspace_constant(g, n)
        return WeightedConstant(s.value, s.value, s.alpha, 0.0, s.n_used, n, "constraint inactive")
    if logw.min() > logD + tol:
        raise HypothesisViolation(f"no function satisfies the decay bound with D_B={D_B}: "
                                  f"the smallest weight is e^{logw.min():.4g}", "D_B ≥ min_k w_k")
    M = g.M[:n, :n]
    if not (logw < logD - tol).any():
        keep = np.flatnonzero(logw <= logD + tol)
        vals, vecs = np.linalg.eigh(M[np.ix_(keep, keep)])
        alpha = np.zeros(len(g), dtype=complex)
        alpha[keep] = vecs[:, 0]
        value = max(0.0, float(vals[0]))
        return WeightedConstant(value, value, alpha, 0.0, n, len(keep),
                                "feasible set is the span of the weight-D_B modes")
    act = np.flatnonzero(logw - logD <= LOG_NEGLIGIBLE)
    M = M[np.ix_(act, act)]
    chat = np.expm1(logw[act] - logD)
    resolution = len(act) * np.finfo(float).eps * (SCHUR_SPLIT + float(np.linalg.norm(M, 2)))

    def pair(mu):
        lam, v = _min_pair(M, chat, mu)
        return lam, v, _weighted(chat, v)

    lam0, v0, h0 = pair(0.0)
    lower, mu_star = lam0, 0.0
    vecs = [v0]
    if h0 > 0:
        lo, hi = 0.0, 1.0 / chat.max()
        lam, v, h = pair(hi)
        while h > 0:
            if lam > lower:
                lower, mu_star = lam, hi
            lo, v_lo = hi, v
            hi *= 4.0
            if hi > 1e300:
                raise QuadratureError("weighted dual: no multiplier makes the constraint active")
            lam, v, h = pair(hi)
        v_hi = v
        if lam > lower:
            lower, mu_star = lam, hi
        if lo == 0.0:
            v_lo = v0
            lo = hi
            while True:
                lo /= 4.0
                lam, v, h = pair(lo)
                if lam > lower:
                    lower, mu_star = lam, lo
                if h > 0 or lo < 1e-300:
                    break
                hi, v_hi = lo, v
            if h > 0:
                v_lo = v
        for _ in range(max_bisect):
            if hi <= lo * (1.0 + 4 * np.finfo(float).eps):
                break
            mid = math.sqrt(lo * hi) if lo > 0 else hi / 2.0
            lam, v, h = pair(mid)
            if lam > lower:
                lower, mu_star = lam, mid
            if h > 0:
                lo, v_lo = mid, v
            else:
                hi, v_hi = mid, v
        vecs = [v_lo, v_hi]
    best = None
    for v in vecs:
        if _weighted(chat, v) <= 0:
            val = _herm2(M, v)
            if best is None or val < best[0]:
                best = (val, v)
    if len(vecs) == 2:
        mix = _best_in_span(M, chat, vecs[0], vecs[1])
        # the cone point is feasible up to rounding of the 2×2 reduction
        slack = 8 * np.finfo(float).eps * float(np.sum(np.abs(chat) * np.abs(mix[1]) ** 2)) if mix else 0.0
        if mix is not None and _weighted(chat, mix[1]) <= slack and (best is None or mix[0] < best[0]):
            best = mix
    if best is None:
        k0 = int(np.argmin(chat))
        best = (float(M[k0, k0].real), np.eye(len(act))[k0])
    alpha = np.zeros(len(g), dtype=complex)
    alpha[act] = best[1] / np.linalg.norm(best[1])
    upper = max(0.0, best[0])
    lower = max(0.0, float(lower))
    if upper < lower <= upper + resolution:
        lower = upper
    return WeightedConstant(lower, upper, alpha, float(mu_star), n, len(act),
                            resolution=float(resolution))


@dataclass(frozen=True)
class ClassSpec:
    """The whole decay class (rather than one function) as verification target."""

    kappa: float
    D: float
    n_trunc: int | None = None


@dataclass(frozen=True)
class ObservabilityReport:
    variant: str
    ratio: float
    log_D: float
    N: float
    c_sfuc_formula: float
    log_c_sfuc: float
    status: str
    ratio_direct: float | None = None
    sharp_upper: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def margin(self):
        return self.ratio - self.c_sfuc_formula

    def to_dict(self):
        return {"variant": self.variant, "ratio": self.ratio, "log_D": self.log_D, "N": self.N,
                "c_sfuc_formula": self.c_sfuc_formula, "log_c_sfuc": self.log_c_sfuc,
                "margin": self.margin, "status": self.status, "ratio_direct": self.ratio_direct,
                "sharp_upper": self.sharp_upper, **self.details}


def _bundle_with(bundle, variant, log_d):
    from dataclasses import replace
    if variant == "A":
        return replace(bundle, D_A=None, log_D_A=log_d)
    return replace(bundle, D_B=None, log_D_B=log_d)


def verify_theorem(target, variant, bundle, g, log_d_budget=LOG_HUGE, check_direct=True):
    """Compare a measured ratio with ``C_sfuc`` for variant ``A`` or ``B``.

    ``target`` is a :class:`SpectralFunction` (its minimal decay constant is
    certified and must not exceed the bundle's, if given) or a
    :class:`ClassSpec`, in which case the dual lower bound of the sharp
    constant over the class is used.  Hypothesis problems raise
    :class:`HypothesisViolation`; a failed inequality yields ``status="FAIL"``.
    """
    seq = g.seq
    if abs(bundle.G - seq.G) > 1e-12 or abs(bundle.delta - seq.delta) > 1e-12:
        raise ValueError("bundle G/delta disagree with the sequence")
    K.check_kappa_g(variant, bundle.kappa, bundle.G, bundle.d)
    details = {}
    sharp_upper = None
    ratio_direct = None
    if isinstance(target, SpectralFunction):
        if variant == "B":
            log_min = certify_A(target, bundle.kappa).log_D_B_min
        else:
            log_min = certify_B(target, bundle.kappa).log_D_A_min
        if log_min > log_d_budget:
            raise HypothesisViolation(
                f"no exponential certificate within the overflow budget: log D_min = {log_min:.6g}",
                "finite exponential decay constant")
        has_d = (bundle.D_A, bundle.log_D_A) if variant == "A" else (bundle.D_B, bundle.log_D_B)
        given = bundle.log_d(variant) if any(v is not None for v in has_d) else None
        if given is not None and log_min > given + 1e-12 * max(1.0, abs(given)):
            raise HypothesisViolation(f"φ needs D ≥ e^{log_min:.6g}, bundle gives e^{given:.6g}",
                                      "decay assumption")
        log_d = log_min if given is None else given
        ratio = mass_ratio(target, gram_matrix=g)
        if check_direct:
            ratio_direct = mass_on_w(target, seq) / target.norm2
    else:
        log_d = math.log(target.D)
        if variant == "B":
            res = sharp_weighted_constant(g, target.kappa, target.D, target.n_trunc)
        else:
            eps = bundle.kappa / bundle.G - 2.0 * bundle.R3
            log_db, _ = K.db_from_da(log_d, eps, bundle.G**2 * bundle.v_plus, bundle.d, log_input=True)
            details["log_D_B_converted"] = log_db
            D_conv = math.exp(log_db) if log_db < 700 else math.inf
            res = sharp_weighted_constant(g, 2.0 * bundle.R3 * bundle.G, D_conv, target.n_trunc)
        ratio, sharp_upper = res.lower, res.upper
        details["dual_gap"] = res.gap
    b = _bundle_with(bundle, variant, log_d)
    log_c = K.log_c_sfuc(variant, b)
    c = math.exp(log_c)
    status = "PASS" if ratio >= c else "FAIL"
    return ObservabilityReport(variant, ratio, log_d, b.N_A if variant == "A" else b.N_B, c, log_c,
                               status, ratio_direct, sharp_upper, details)


@dataclass(frozen=True)
class Setup:
    system: object
    seq: object
    gram: GramMatrix


def prepare(d=1, L=1.0, bc="dirichlet", potential=None, lambda_max=None, n_modes=None, G=1.0, delta=0.1,
            mode="centered", seed=None):
    """Eigensystem, sequence and Gram matrix for one configuration."""
    dom = Domain(d, float(L), bc)
    pot = potential if isinstance(potential, PotentialSpec) else PotentialSpec.parse(potential or "zero")
    system = build_system(dom, pot, lambda_max=lambda_max, n_modes=n_modes)
    seq = make_equidistributed(dom, G, delta, mode, seed)
    return Setup(system, seq, gram(system, seq))


@dataclass(frozen=True)
class ScaleRow:
    L: float
    lower: float
    upper: float
    gap: float
    n_modes: int


@dataclass(frozen=True)
class ScaleTable:
    rows: list

    @property
    def minimum(self):
        return min(r.lower for r in self.rows)

    @property
    def spread(self):
        v = [r.lower for r in self.rows]
        return (max(v) - min(v)) / max(v)

    def ratio_to_first(self):
        return self.minimum / self.rows[0].lower


def scale_invariance_experiment(L_list, kappa, D_B, d=1, bc="neumann", potential=None, lambda_max=400.0,
                                G=1.0, delta=0.1, mode="centered", seed=None):
    """Dual lower bound of the class constant for each side length in ``L_list``.

    The spectral window ``lambda_max`` is held fixed so that every cube sees
    the same energy range.
    """
    rows = []
    for L in L_list:
        s = prepare(d, L, bc, potential, lambda_max=lambda_max, G=G, delta=delta, mode=mode, seed=seed)
        res = sharp_weighted_constant(s.gram, kappa, D_B)
        rows.append(ScaleRow(float(L), res.lower, res.upper, res.gap, len(s.system)))
    return ScaleTable(rows)
