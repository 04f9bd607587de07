"""Decay classes of spectral functions and their minimal constants.

Two exponential classes are supported:

* coefficient decay: ``Σ exp(κ√max{0,E_k}) |α_k|² ≤ D_B Σ |α_k|²``
  (``certify_A`` returns the least admissible ``D_B``);
* spectral-tail decay: ``‖χ_[λ,∞)(H) φ‖² ≤ D_A exp(-κ√(λ+‖V₋‖)) ‖φ‖²``
  for every ``λ ≥ -‖V₋‖`` (``certify_B`` returns the least ``D_A``).

Both constants grow like ``exp(κ√E)`` and are carried in log form; the
linear value is ``inf`` when it does not fit in a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import HypothesisViolation

LOG_FLOAT_MAX = math.log(np.finfo(float).max)
LOG_HUGE = math.log(1e300)


def _exp_or_inf(log_value):
    return math.exp(log_value) if log_value < LOG_FLOAT_MAX else math.inf


def _weights_log(phi):
    a2 = np.abs(phi.alpha) ** 2
    if not a2.sum() > 0:
        raise ValueError("the zero function has no decay certificate")
    with np.errstate(divide="ignore"):
        return np.log(a2), a2


@dataclass(frozen=True)
class DecayCertificateA:
    """Least ``D_B`` for the coefficient-decay class at rate ``kappa``."""

    kappa: float
    log_D_B_min: float
    per_k: np.ndarray
    log_tail_term: float

    @property
    def D_B_min(self):
        return _exp_or_inf(self.log_D_B_min)


@dataclass(frozen=True)
class DecayCertificateB:
    """Least ``D_A`` for the spectral-tail class; ``argmax`` is the maximising jump."""

    kappa: float
    log_D_A_min: float
    per_k: np.ndarray
    argmax: int

    @property
    def D_A_min(self):
        return _exp_or_inf(self.log_D_A_min)


def certify_A(phi, kappa):
    """Smallest ``D_B ≥ 1`` with the coefficient-decay inequality at rate ``kappa``.

    ``log_tail_term`` is ``κ√λ_max + log(residual mass / ‖φ‖²)``, the weight the
    truncated sum cannot see (``-inf`` when nothing was dropped).
    """
    la2, a2 = _weights_log(phi)
    expo = kappa * np.sqrt(np.maximum(phi.system.E, 0.0))
    per_k = expo + la2 - math.log(a2.sum())
    log_d = max(0.0, float(logsumexp(per_k)))
    if phi.residual_mass > 0:
        tail = kappa * math.sqrt(phi.system.basis.lambda_max) + math.log(phi.residual_mass / a2.sum())
    else:
        tail = -math.inf
    return DecayCertificateA(float(kappa), log_d, per_k, tail)


def tail_masses(phi):
    """``Σ_{j ≥ k} |α_j|²`` for each ``k`` (suffix sums in fixed order)."""
    a2 = np.abs(phi.alpha) ** 2
    return np.cumsum(a2[::-1])[::-1]


def certify_B(phi, kappa, v_minus=None):
    """Smallest ``D_A ≥ 1`` with the spectral-tail inequality at rate ``kappa``.

    The supremum over ``λ`` is attained at the eigenvalues: on
    ``(E_{k-1}, E_k]`` the tail is constant and the exponential increases.
    """
    v_minus = phi.system.bounds.v_minus if v_minus is None else v_minus
    _, a2 = _weights_log(phi)
    tails = tail_masses(phi)
    with np.errstate(divide="ignore"):
        per_k = kappa * np.sqrt(np.maximum(phi.system.E + v_minus, 0.0)) + np.log(tails) - math.log(a2.sum())
    k = int(np.argmax(per_k))
    return DecayCertificateB(float(kappa), max(0.0, float(per_k[k])), per_k, k)


def certify_B_grid(phi, kappa, n_grid=10_000, v_minus=None):
    """Brute-force log ``D_A``: scan the definition over a λ-grid plus the eigenvalues.

    Test oracle for ``certify_B``; masks the spectrum directly at every λ.
    """
    v_minus = phi.system.bounds.v_minus if v_minus is None else v_minus
    E = phi.system.E
    a2 = np.abs(phi.alpha) ** 2
    grid = np.union1d(np.linspace(-v_minus, E.max() + 1.0, n_grid), E)
    best = -math.inf
    total = a2.sum()
    for lam in grid:
        mass = a2[E >= lam].sum()
        if mass > 0:
            best = max(best, kappa * math.sqrt(max(lam + v_minus, 0.0)) + math.log(mass / total))
    return max(best, 0.0)


def certify_polynomial(phi, kappa):
    """Least ``D ≥ 1`` with ``Σ max{0,E_k}^κ |α_k|² ≤ D Σ |α_k|²``."""
    _, a2 = _weights_log(phi)
    w = np.maximum(phi.system.E, 0.0) ** kappa
    return max(1.0, float(np.dot(w, a2) / a2.sum()))


@dataclass(frozen=True)
class ConversionConstants:
    """Inputs and result of the tail-to-coefficient conversion constant ``C3``."""

    log_C1: float
    C2: float
    epsilon: float
    v_plus: float
    log_C3: float

    @property
    def C1(self):
        return _exp_or_inf(self.log_C1)

    @property
    def C3(self):
        return _exp_or_inf(self.log_C3)

    @property
    def overflow(self):
        """True when ``C3`` exceeds ``1e300``."""
        return self.log_C3 > LOG_HUGE


def conversion_constant(C1, C2, epsilon, v_plus=0.0, log_C1=None):
    """``C3 = e^{C2(π + √v₊)} (1 + C1 C2 π / (1 − e^{−επ}))`` in log form.

    Pass ``log_C1`` instead of ``C1`` when ``C1`` itself is huge.
    """
    if log_C1 is None:
        if not C1 > 0:
            raise ValueError("C1 must be positive")
        log_C1 = math.log(C1)
    if not (C2 > 0 and epsilon > 0 and v_plus >= 0):
        raise ValueError("need C2 > 0, epsilon > 0, v_plus >= 0")
    log_frac = log_C1 + math.log(C2 * math.pi) - math.log(-math.expm1(-epsilon * math.pi))
    log_c3 = C2 * (math.pi + math.sqrt(v_plus)) + np.logaddexp(0.0, log_frac)
    return ConversionConstants(float(log_C1), float(C2), float(epsilon), float(v_plus), float(log_c3))


@dataclass(frozen=True)
class ConversionReport:
    constants: ConversionConstants
    log_lhs: float
    log_rhs: float

    @property
    def log_slack(self):
        """``log(C3 ‖φ‖²) − log(Σ e^{C2√E₊}|α|²)``; non-negative when the bound holds."""
        return self.log_rhs - self.log_lhs

    @property
    def holds(self):
        return self.log_lhs <= self.log_rhs + 1e-12 * max(1.0, abs(self.log_rhs))


def verify_conversion(phi, C2, epsilon):
    """Check the tail-to-coefficient conversion for ``φ`` with ``κ = C2 + ε``.

    ``C1`` is the least tail constant at rate ``C2 + ε``; the coefficient sum
    at rate ``C2`` must not exceed ``C3 ‖φ‖²``.
    """
    L = phi.system.domain.L
    if abs(L - round(L)) > 1e-12 or round(L) < 1:
        raise HypothesisViolation(f"the conversion bound needs an integer side length, got L={L}", "L ∈ N")
    cert = certify_B(phi, C2 + epsilon)
    consts = conversion_constant(None, C2, epsilon, phi.system.bounds.v_plus, log_C1=cert.log_D_A_min)
    la2, a2 = _weights_log(phi)
    log_lhs = float(logsumexp(C2 * np.sqrt(np.maximum(phi.system.E, 0.0)) + la2))
    log_rhs = consts.log_C3 + math.log(a2.sum())
    return ConversionReport(consts, log_lhs, log_rhs)
