"""Laplacian eigenbasis on the cube and Galerkin diagonalisation of -Δ + V.

Modes are indexed by multi-indices ``y`` from ``N^d`` (Dirichlet),
``N_0^d`` (Neumann) or ``(2Z)^d`` (periodic) with eigenvalue
``(π/L)^2 |y|^2``.  The position of a mode in the sorted list is the
ordering bijection ``p``; ties in ``|y|`` are broken lexicographically.
Indices ``k`` are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _trig
from .errors import QuadratureError
from .geometry import Domain
from .quadrature import gauss_panels, panels_for

MAX_MODES = 10_000


# --------------------------------------------------------------------------
# Laplacian basis
# --------------------------------------------------------------------------


def _axis_indices(bc, ymax):
    if bc == "dirichlet":
        return np.arange(1, ymax + 1)
    if bc == "neumann":
        return np.arange(0, ymax + 1)
    top = ymax - ymax % 2
    return np.arange(-top, top + 1, 2)


def _enumerate(domain, ymax):
    axis = _axis_indices(domain.bc, ymax)
    grids = np.meshgrid(*([axis] * domain.d), indexing="ij")
    y = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    ysq = (y**2).sum(axis=1)
    keys = tuple(y[:, l] for l in reversed(range(domain.d))) + (ysq,)
    order = np.lexsort(keys)
    return y[order], ysq[order]


@dataclass(frozen=True, eq=False)
class LaplacianBasis:
    """Truncated, sorted eigenbasis ``e_y`` of the Laplacian on ``domain``."""

    domain: Domain
    y: np.ndarray
    lam: np.ndarray
    lambda_max: float

    def __len__(self):
        return len(self.y)

    @property
    def is_complex(self):
        return self.domain.bc == "periodic"

    @property
    def norms(self):
        """Norms of the unnormalised product eigenfunctions."""
        out = np.ones(len(self.y))
        for l in range(self.domain.d):
            out *= _trig.factor_norms(self.y[:, l], self.domain.bc, self.domain.L)
        return out

    @property
    def kmax(self):
        return math.pi * float(np.abs(self.y).max(initial=0)) / self.domain.L

    def p(self, k):
        """Multi-index of the ``k``-th mode."""
        return tuple(int(v) for v in self.y[k])

    def index_of(self, y):
        y = np.atleast_1d(np.asarray(y))
        hits = np.flatnonzero((self.y == y[None, :]).all(axis=1))
        if len(hits) == 0:
            raise KeyError(f"mode {tuple(y)} is not in the basis")
        return int(hits[0])

    def axis_table(self, l):
        """Distinct 1D indices along axis ``l`` and the position of each mode in it."""
        uniq, inv = np.unique(self.y[:, l], return_inverse=True)
        return uniq, inv

    def eval(self, x, deriv=None):
        """Values ``e_y(x)`` for all modes, shape ``(npts, n)``.

        ``deriv`` is an optional per-axis derivative order tuple.  Points
        outside the cube get the reflection / periodic extension.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        deriv = deriv or (0,) * self.domain.d
        out = None
        for l in range(self.domain.d):
            uniq, inv = self.axis_table(l)
            vals = _trig.factor_values(uniq, self.domain.bc, self.domain.L, x[:, l], deriv[l])[:, inv]
            out = vals if out is None else out * vals
        return out

    def grad(self, x):
        """Gradients, shape ``(npts, n, d)``."""
        d = self.domain.d
        return np.stack([self.eval(x, tuple(int(i == l) for i in range(d))) for l in range(d)], axis=-1)

    def eval_mode(self, y, x):
        return self.eval(x)[:, self.index_of(y)]

    def gram_box(self, lo, hi, nu=None, deriv_axis=None):
        """``∫_box conj(e_y) e_y'`` over an axis-aligned box (closed form).

        ``deriv_axis`` differentiates both factors along that axis, giving
        the gradient Gram block for that coordinate.
        """
        n = len(self.y)
        out = np.ones((n, n), dtype=complex)
        for l in range(self.domain.d):
            uniq, inv = self.axis_table(l)
            der = (1, 1) if deriv_axis == l else (0, 0)
            g = _trig.factor_gram(uniq, uniq, self.domain.bc, self.domain.L, lo[l], hi[l],
                                  0.0 if nu is None else nu[l], der)
            out *= g[inv[:, None], inv[None, :]]
        return out


def eval_basis(basis, y, x):
    """Normalised eigenfunction ``e_y`` at point(s) ``x``."""
    vals = basis.eval_mode(y, np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, basis.domain.d)))
    return vals if np.ndim(x) > 1 else vals[0]


def build_basis(domain, lambda_max=None, n_modes=None):
    """All modes with ``λ_y ≤ lambda_max``, or the first ``n_modes`` modes."""
    if (lambda_max is None) == (n_modes is None):
        raise ValueError("give exactly one of lambda_max and n_modes")
    scale = (math.pi / domain.L) ** 2
    if lambda_max is not None:
        if not lambda_max > 0:
            raise ValueError("lambda_max must be positive")
        bound = lambda_max / scale
        ymax = int(math.floor(math.sqrt(bound) + 1e-12))
        per_axis = ymax / 2.0 if domain.bc == "periodic" else float(ymax)
        if per_axis**domain.d > 4 * MAX_MODES:
            raise ValueError(f"lambda_max={lambda_max} exceeds the {MAX_MODES}-mode guard")
        y, ysq = _enumerate(domain, ymax)
        keep = ysq <= bound * (1 + 1e-12)
        y, ysq = y[keep], ysq[keep]
        cutoff = float(lambda_max)
    else:
        if not 0 < n_modes <= MAX_MODES:
            raise ValueError(f"n_modes must be in [1, {MAX_MODES}]")
        ymax = max(2, int(math.ceil(2 * n_modes ** (1.0 / domain.d))) + 2)
        while True:
            y, ysq = _enumerate(domain, ymax)
            if len(y) >= n_modes and ysq[n_modes - 1] <= ymax**2:
                break
            ymax *= 2
        y, ysq = y[:n_modes], ysq[:n_modes]
        cutoff = float(scale * ysq[-1])
    if len(y) > MAX_MODES:
        raise ValueError(f"{len(y)} modes exceed the {MAX_MODES}-mode guard")
    if len(y) == 0:
        raise ValueError("no modes below lambda_max")
    return LaplacianBasis(domain, y, scale * ysq.astype(float), cutoff)


# --------------------------------------------------------------------------
# Potentials
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Bounds:
    v_inf: float
    v_plus: float
    v_minus: float
    exact: bool


@dataclass(frozen=True)
class PotentialSpec:
    """A bounded potential ``V`` on ``R^d`` from one of three families.

    ``zero`` and ``constant``: ``V = c``.  ``cosine``:
    ``V(x) = offset + Σ_m a_m Σ_l cos(2π m x_l / period)``.  ``cells``:
    piecewise constant on the cells of side ``size`` tiling the cube, with
    values uniform in ``[lo, hi]`` drawn from ``seed`` and the cell position.
    The whole potential is multiplied by ``scale`` (used by rescaling).
    """

    family: str = "zero"
    amplitudes: tuple = ()
    period: float = 1.0
    offset: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    seed: int = 0
    size: float = 1.0
    scale: float = 1.0

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, c):
        return cls("constant", offset=float(c))

    @classmethod
    def cosine(cls, amplitudes, period=1.0, offset=0.0):
        return cls("cosine", tuple(float(a) for a in amplitudes), float(period), float(offset))

    @classmethod
    def cells(cls, lo, hi, seed=0, size=1.0):
        return cls("cells", lo=float(lo), hi=float(hi), seed=int(seed), size=float(size))

    @classmethod
    def parse(cls, text):
        """Parse ``zero``, ``const:c``, ``cos:a1,a2[@period=P,offset=c]``,
        ``cells:lo,hi[@seed=s,size=h]``."""
        text = text.strip()
        head, _, opts = text.partition("@")
        name, _, args = head.partition(":")
        kw = {}
        for item in filter(None, opts.split(",")):
            k, _, v = item.partition("=")
            kw[k.strip()] = v.strip()
        vals = [float(a) for a in args.split(",") if a.strip()]
        if name in ("zero", "0"):
            return cls.zero()
        if name in ("const", "constant"):
            return cls.constant(vals[0])
        if name in ("cos", "cosine"):
            return cls.cosine(vals, float(kw.get("period", 1.0)), float(kw.get("offset", 0.0)))
        if name == "cells":
            return cls.cells(vals[0], vals[1], int(kw.get("seed", 0)), float(kw.get("size", 1.0)))
        raise ValueError(f"unknown potential family in {text!r}")

    def __str__(self):
        if self.family == "zero":
            base = "zero"
        elif self.family == "constant":
            base = f"const:{self.offset!r}"
        elif self.family == "cosine":
            base = "cos:" + ",".join(repr(a) for a in self.amplitudes)
            base += f"@period={self.period!r},offset={self.offset!r}"
        else:
            base = f"cells:{self.lo!r},{self.hi!r}@seed={self.seed},size={self.size!r}"
        return base if self.scale == 1.0 else f"{base}#scale={self.scale!r}"

    @property
    def is_constant(self):
        return self.family in ("zero", "constant") or (
            self.family == "cosine" and not any(self.amplitudes))

    def scaled(self, G):
        """``G² V(G ·)``: the potential seen after shrinking the cube by ``G``."""
        period = self.period / G if self.family == "cosine" else self.period
        size = self.size / G if self.family == "cells" else self.size
        return PotentialSpec(self.family, self.amplitudes, period, self.offset, self.lo,
                             self.hi, self.seed, size, self.scale * G * G)

    # -- cells ----------------------------------------------------------
    def _axis_cells(self, L):
        ratio = L / self.size
        m = int(round(ratio))
        if abs(ratio - m) > 1e-9 or m < 1:
            raise ValueError(f"cell size {self.size} does not tile side {L}")
        edges = -L / 2.0 + self.size * np.arange(m + 1)
        return m, edges

    def cell_values(self, domain):
        m, edges = self._axis_cells(domain.L)
        centers = 0.5 * (edges[1:] + edges[:-1])
        keys = np.rint(2.0 * centers / self.size).astype(np.int64)
        out = np.empty((m,) * domain.d)
        for idx in np.ndindex(*out.shape):
            ss = np.random.SeedSequence([self.seed] + [int(keys[i]) + 2**31 for i in idx])
            out[idx] = self.lo + (self.hi - self.lo) * np.random.default_rng(ss).random()
        return self.scale * out

    # -- values and bounds ----------------------------------------------
    def evaluate(self, x, domain):
        """``V`` at points ``x`` of shape ``(npts, d)`` inside the cube."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.family in ("zero", "constant"):
            return np.full(len(x), self.scale * self.offset)
        if self.family == "cosine":
            v = np.full(len(x), self.offset)
            for m, a in enumerate(self.amplitudes, start=1):
                v += a * np.cos(2.0 * math.pi * m * x / self.period).sum(axis=1)
            return self.scale * v
        m, _ = self._axis_cells(domain.L)
        idx = np.clip(np.floor((x + domain.L / 2.0) / self.size).astype(int), 0, m - 1)
        return self.cell_values(domain)[tuple(idx.T)]

    def bounds(self, domain):
        """``‖V‖∞, ‖V₊‖∞, ‖V₋‖∞``; ``exact=False`` marks triangle-inequality bounds."""
        if self.family in ("zero", "constant"):
            c = self.scale * self.offset
            return Bounds(abs(c), max(c, 0.0), 0.0 if c >= 0 else -c, True)
        if self.family == "cells":
            v = self.cell_values(domain)
            return Bounds(float(np.abs(v).max()), float(max(v.max(), 0.0)), float(max(-v.min(), 0.0)), True)
        amp = domain.d * sum(abs(a) for a in self.amplitudes)
        s = abs(self.scale)
        hi = self.scale * self.offset + s * amp
        lo = self.scale * self.offset - s * amp
        exact = sum(1 for a in self.amplitudes if a) <= 1 and domain.L >= self.period
        return Bounds(max(abs(hi), abs(lo)), max(hi, 0.0), max(-lo, 0.0), exact)

    # -- Galerkin matrix --------------------------------------------------
    def matrix(self, basis):
        """``⟨e_y, V e_y'⟩`` in closed form."""
        n = len(basis)
        dom = basis.domain
        half = dom.L / 2.0
        if self.family in ("zero", "constant"):
            return self.scale * self.offset * np.eye(n, dtype=complex)
        if self.family == "cosine":
            out = self.offset * np.eye(n, dtype=complex)
            for l in range(dom.d):
                uniq, inv = basis.axis_table(l)
                same = np.ones((n, n), dtype=bool)
                for o in range(dom.d):
                    if o != l:
                        same &= basis.y[:, o][:, None] == basis.y[:, o][None, :]
                for m, a in enumerate(self.amplitudes, start=1):
                    if not a:
                        continue
                    nu = 2.0 * math.pi * m / self.period
                    g = 0.5 * (_trig.factor_gram(uniq, uniq, dom.bc, dom.L, -half, half, nu)
                               + _trig.factor_gram(uniq, uniq, dom.bc, dom.L, -half, half, -nu))
                    out += a * g[inv[:, None], inv[None, :]] * same
            return self.scale * out
        values = self.cell_values(dom)
        _, edges = self._axis_cells(dom.L)
        blocks = []
        for l in range(dom.d):
            uniq, inv = basis.axis_table(l)
            blocks.append(np.stack([
                _trig.factor_gram(uniq, uniq, dom.bc, dom.L, a, b)[inv[:, None], inv[None, :]]
                for a, b in zip(edges[:-1], edges[1:])]))
        if dom.d == 1:
            return np.einsum("p,pab->ab", values, blocks[0])
        return np.einsum("pq,pab,qab->ab", values, blocks[0], blocks[1])


# --------------------------------------------------------------------------
# Eigensystems and spectral functions
# --------------------------------------------------------------------------


def _fix_phases(psi):
    """Make the largest-magnitude entry of each column real and positive."""
    idx = np.argmax(np.abs(psi), axis=0)
    piv = psi[idx, np.arange(psi.shape[1])]
    return psi * (np.conj(piv) / np.abs(piv))[None, :]


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Galerkin eigenpairs; column ``k`` of ``Psi`` is ``ψ_k`` in the ``e_y`` basis."""

    basis: LaplacianBasis
    potential: PotentialSpec
    E: np.ndarray
    Psi: np.ndarray
    bounds: Bounds = field(default=None)

    def __len__(self):
        return len(self.E)

    @property
    def domain(self):
        return self.basis.domain

    @property
    def lam(self):
        return self.basis.lam

    def psi(self, x):
        """``ψ_k(x)`` for all ``k``, shape ``(npts, n)``."""
        vals = self.basis.eval(x) @ self.Psi
        return vals if self.basis.is_complex else vals.real

    def grad_psi(self, x):
        raw = self.basis.grad(x)
        g = np.stack([raw[:, :, l] @ self.Psi for l in range(raw.shape[2])], axis=2)
        return g if self.basis.is_complex else g.real

    def to_dict(self):
        dom = self.domain
        out = {
            "d": dom.d, "L": dom.L, "bc": dom.bc,
            "lambda_max": self.basis.lambda_max,
            "potential": str(self.potential),
            "y": self.basis.y.tolist(),
            "E": [float(e) for e in self.E],
            "Psi_re": np.real(self.Psi).tolist(),
        }
        if self.basis.is_complex:
            out["Psi_im"] = np.imag(self.Psi).tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        dom = Domain(int(data["d"]), float(data["L"]), data["bc"])
        y = np.array(data["y"], dtype=np.int64).reshape(-1, dom.d)
        basis = LaplacianBasis(dom, y, (math.pi / dom.L) ** 2 * (y**2).sum(1).astype(float),
                               float(data["lambda_max"]))
        psi = np.array(data["Psi_re"], dtype=float)
        psi = psi + 1j * np.array(data["Psi_im"]) if "Psi_im" in data else psi.astype(complex)
        pot = _parse_scaled(data["potential"])
        return cls(basis, pot, np.array(data["E"], dtype=float), psi, pot.bounds(dom))


def _parse_scaled(text):
    base, _, sc = text.partition("#scale=")
    pot = PotentialSpec.parse(base)
    if sc:
        pot = PotentialSpec(**{**pot.__dict__, "scale": float(sc)})
    return pot


def assemble_and_diagonalize(basis, potential=None):
    """Diagonalise ``diag(λ_y) + ⟨e_y, V e_y'⟩`` densely; eigenvalues ascending."""
    potential = potential or PotentialSpec.zero()
    bounds = potential.bounds(basis.domain)
    n = len(basis)
    if potential.is_constant:
        c = potential.scale * potential.offset
        return EigenSystem(basis, potential, basis.lam + c, np.eye(n, dtype=complex), bounds)
    H = np.diag(basis.lam).astype(complex) + potential.matrix(basis)
    H = 0.5 * (H + H.conj().T)
    if basis.is_complex:
        E, psi = np.linalg.eigh(H)
    else:
        E, psi = np.linalg.eigh(H.real)
        psi = psi.astype(complex)
    return EigenSystem(basis, potential, E, _fix_phases(psi), bounds)


def build_system(domain, potential=None, lambda_max=None, n_modes=None):
    return assemble_and_diagonalize(build_basis(domain, lambda_max, n_modes), potential)


@dataclass(frozen=True)
class SandwichReport:
    lower_margin: np.ndarray
    upper_margin: np.ndarray
    tau: np.ndarray
    checked: int
    ok: bool

    @property
    def worst(self):
        k = self.checked
        return float(min(self.lower_margin[:k].min(), self.upper_margin[:k].min()))


def truncation_slack(system):
    """Per-mode slack ``1e-6 + ‖V‖²/(λ_max − λ_p(k))`` (infinite at the cutoff)."""
    gap = system.basis.lambda_max - system.lam
    with np.errstate(divide="ignore"):
        return 1e-6 + np.where(gap > 0, system.bounds.v_inf**2 / np.where(gap > 0, gap, 1.0), np.inf)


def eigenvalue_sandwich_check(system):
    """Margins of ``λ_p(k) − ‖V₋‖ ≤ E_k ≤ λ_p(k) + ‖V₊‖``, enforced for ``k < n/2``."""
    b = system.bounds
    lower = system.E - (system.lam - b.v_minus)
    upper = system.lam + b.v_plus - system.E
    tau = truncation_slack(system)
    k = max(1, len(system) // 2)
    ok = bool(np.all(lower[:k] >= -tau[:k]) and np.all(upper[:k] >= -tau[:k]))
    return SandwichReport(lower, upper, tau, k, ok)


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """``φ = Σ α_k ψ_k`` over an eigensystem.

    ``residual_mass`` is the part of ``‖φ‖²`` not captured by the retained
    modes (zero when ``φ`` was given by coefficients).
    """

    system: EigenSystem
    alpha: np.ndarray
    residual_mass: float = 0.0

    @property
    def norm2(self):
        return float(np.vdot(self.alpha, self.alpha).real)

    @property
    def coefficients(self):
        """Coefficients against the ``e_y`` basis."""
        return self.system.Psi @ self.alpha

    def __call__(self, x):
        vals = self.system.basis.eval(x) @ self.coefficients
        return vals if self.system.basis.is_complex else vals.real

    @classmethod
    def mode(cls, system, k):
        a = np.zeros(len(system), dtype=complex)
        a[k] = 1.0
        return cls(system, a)

    def truncated(self, n):
        a = self.alpha.copy()
        a[n:] = 0
        return SpectralFunction(self.system, a, self.residual_mass)


MAX_REFINE = 64


def _rule_1d(a, b, kmax, refine):
    return gauss_panels(a, b, refine * panels_for(b - a, kmax))


def _project_once(basis, f, support, refine):
    dom = basis.domain
    rules = [_rule_1d(support[0][l], support[1][l], basis.kmax, refine) for l in range(dom.d)]
    if dom.d == 1:
        x, w = rules[0]
        fx = np.asarray(f(x[:, None]))
        c = basis.eval(x[:, None]).conj().T @ (w * fx)
        return c, float(np.sum(w * np.abs(fx) ** 2))
    (x1, w1), (x2, w2) = rules
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    F = np.asarray(f(np.stack([X1.ravel(), X2.ravel()], axis=1))).reshape(X1.shape)
    u1, i1 = basis.axis_table(0)
    u2, i2 = basis.axis_table(1)
    A1 = _trig.factor_values(u1, dom.bc, dom.L, x1)
    A2 = _trig.factor_values(u2, dom.bc, dom.L, x2)
    C = (A1.conj() * w1[:, None]).T @ F @ (A2.conj() * w2[:, None])
    return C[i1, i2], float(np.sum(w1[:, None] * w2[None, :] * np.abs(F) ** 2))


def project(system, f, support=None, tol=1e-10):
    """Expansion coefficients ``α_k = ⟨ψ_k, f⟩`` of a callable ``f``.

    ``f`` maps points of shape ``(npts, d)`` to values.  ``support`` is an
    optional box ``(lo, hi)`` outside which ``f`` vanishes.  The ``e_y``
    coefficients come from composite Gauss quadrature; the panel count is
    doubled until two successive rules agree.  An array ``f`` is taken as
    ready ``e_y`` coefficients.
    """
    if not callable(f):
        c = np.asarray(f, dtype=complex)
        return SpectralFunction(system, system.Psi.conj().T @ c)
    dom = system.domain
    if support is None:
        support = ([-dom.L / 2.0] * dom.d, [dom.L / 2.0] * dom.d)
    refine = 1
    c1, _ = _project_once(system.basis, f, support, refine)
    while True:
        c2, n2 = _project_once(system.basis, f, support, 2 * refine)
        change = float(np.max(np.abs(c1 - c2)))
        if change <= tol * max(1.0, math.sqrt(n2)):
            break
        refine *= 2
        if refine > MAX_REFINE:
            raise QuadratureError(f"projection did not converge: doubling changed a coefficient by {change:.3e}")
        c1 = c2
    alpha = system.Psi.conj().T @ c2
    residual = max(n2 - float(np.vdot(c2, c2).real), 0.0)
    return SpectralFunction(system, alpha, residual)


def rescale(obj, G):
    """Transport a system or function on ``Λ_L`` to ``Λ_{L/G}`` via ``x ↦ G x``.

    Eigenvalues become ``G² E_k`` and the potential ``G² V(G ·)``; function
    coefficients pick up ``G^{-d/2}`` so that ``‖φ‖² = G^d ‖φ∘g‖²``.
    """
    if not G > 0:
        raise ValueError("G must be positive")
    if isinstance(obj, SpectralFunction):
        sysG = rescale(obj.system, G)
        fac = G ** (-obj.system.domain.d / 2.0)
        return SpectralFunction(sysG, obj.alpha * fac, obj.residual_mass * fac**2)
    dom = obj.domain.scaled(G)
    y = obj.basis.y
    basis = LaplacianBasis(dom, y, (math.pi / dom.L) ** 2 * (y**2).sum(1).astype(float),
                           obj.basis.lambda_max * G * G)
    pot = obj.potential.scaled(G)
    return EigenSystem(basis, pot, obj.E * G * G, obj.Psi, pot.bounds(dom))
