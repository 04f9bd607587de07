"""Closed-form constants of the observability estimates.

Exponents ``N_A``, ``N_B`` (and the interpolation exponents ``N_1``, ``N_2``)
are free parameters: only their existence is known, so they are supplied
by the caller or fitted from measurements with :func:`fit_exponent`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import HypothesisViolation
from .funclass import LOG_FLOAT_MAX, LOG_HUGE

E = math.e
HYP_A = "G ∈ (0, κ/(18e√d))"
HYP_B = "G ∈ (0, κ/(18e√d)]"


def r_values(d):
    """``(R, R_3)``: least odd integer above ``18e√d + 2`` and ``9e√d``."""
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    r3 = 9.0 * E * math.sqrt(d)
    bound = 2.0 * r3 + 2.0
    R = int(math.floor(bound)) + 1
    if R % 2 == 0:
        R += 1
    return R, r3


def gamma_denominator(delta):
    """``1/2 − √(16−δ²)/8`` rewritten as ``δ²/(8(4+√(16−δ²)))``."""
    return delta * delta / (8.0 * (4.0 + math.sqrt(16.0 - delta * delta)))


def gamma_of(delta, d):
    """Interpolation exponent ``γ = 1/log₂(6e√d / (1/2 − √(16−δ²)/8))``."""
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    return 1.0 / math.log2(6.0 * E * math.sqrt(d) / gamma_denominator(delta))


def gamma_naive(delta, d):
    return 1.0 / math.log2(6.0 * E * math.sqrt(d) / (0.5 - math.sqrt(16.0 - delta * delta) / 8.0))


def d3_of(d, v_inf):
    """``D_3 = √(4 R^d R_3 (1 + (1+‖V‖)R_3²))``."""
    if v_inf < 0:
        raise ValueError("v_inf must be non-negative")
    R, r3 = r_values(d)
    return math.sqrt(4.0 * R**d * r3 * (1.0 + (1.0 + v_inf) * r3 * r3))


def kappa_threshold(kappa, d):
    """Largest admissible cell size ``κ/(18e√d)``."""
    return kappa / (18.0 * E * math.sqrt(d))


def check_kappa_g(variant, kappa, G, d):
    limit = kappa_threshold(kappa, d)
    if variant == "A":
        if not 0 < G < limit:
            raise HypothesisViolation(
                f"tail-decay estimate needs {HYP_A} (strict); got G={G}, κ/(18e√d)={limit}", HYP_A)
    elif variant == "B":
        if not 0 < G <= limit:
            raise HypothesisViolation(
                f"coefficient-decay estimate needs {HYP_B}; got G={G}, κ/(18e√d)={limit}", HYP_B)
    else:
        raise ValueError(f"variant must be 'A' or 'B', got {variant!r}")


def sfuc_exponent(variant, d, G, kappa, v_inf, log_D):
    """The bracket multiplying ``N`` in the exponent of ``(δ/G)``."""
    base = 1.0 + G ** (4.0 / 3.0) * v_inf ** (2.0 / 3.0) + log_D
    if variant == "A":
        base += G / (kappa - G * 18.0 * E * math.sqrt(d))
    return base


@dataclass(frozen=True)
class ConstantBundle:
    """Parameters of one application of the estimates plus derived constants.

    ``D_A``/``D_B`` may be ``None`` when only the other variant is used;
    ``log_D_A``/``log_D_B`` override them for values beyond float range.
    """

    d: int = 1
    G: float = 1.0
    delta: float = 0.1
    kappa: float = 49.0
    v_inf: float = 0.0
    v_plus: float = 0.0
    v_minus: float = 0.0
    D_A: float | None = None
    D_B: float | None = None
    N_A: float | None = None
    N_B: float | None = None
    log_D_A: float | None = None
    log_D_B: float | None = None

    def log_d(self, variant):
        if variant == "A":
            val, lg = self.D_A, self.log_D_A
        else:
            val, lg = self.D_B, self.log_D_B
        if lg is None:
            if val is None:
                raise ValueError(f"bundle has no D_{variant}")
            if val < 1:
                raise HypothesisViolation(f"D_{variant} must be ≥ 1, got {val}", f"D_{variant} ≥ 1")
            lg = math.log(val)
        if lg < 0:
            raise HypothesisViolation(f"D_{variant} must be ≥ 1", f"D_{variant} ≥ 1")
        return lg

    @property
    def R(self):
        return r_values(self.d)[0]

    @property
    def R3(self):
        return r_values(self.d)[1]

    @property
    def epsilon(self):
        """``κ/G − 2R_3``, the rate margin used in the tail-to-coefficient step."""
        return self.kappa / self.G - 2.0 * self.R3

    def derived(self):
        """All derived constants with their logarithms (``None`` where undefined)."""
        R, r3 = r_values(self.d)
        out = {"R": R, "R3": r3, "epsilon": self.epsilon, "kappa_threshold": kappa_threshold(self.kappa, self.d),
               "D3": d3_of(self.d, self.v_inf)}
        out["log_D3"] = math.log(out["D3"])
        out["gamma"] = gamma_of(self.delta / self.G, self.d) if self.delta / self.G < 0.5 else None
        for variant, n in (("A", self.N_A), ("B", self.N_B)):
            key = f"C_sfuc_{variant}"
            try:
                lg = log_c_sfuc(variant, self)
            except (ValueError, HypothesisViolation) as err:
                out[key], out[f"log_{key}"], out[f"{key}_error"] = None, None, str(err)
                continue
            out[key], out[f"log_{key}"] = math.exp(lg), lg
        if self.D_A is not None or self.log_D_A is not None:
            if self.epsilon > 0:
                lg, bound = db_from_da(self.log_d("A"), self.epsilon, self.G**2 * self.v_plus, self.d,
                                       v_inf=self.G**2 * self.v_inf, log_input=True)
                out["log_D_B_from_D_A"], out["log_D_B_from_D_A_bound"] = lg, bound
                out["D_B_from_D_A"] = math.exp(lg) if lg < LOG_FLOAT_MAX else math.inf
            else:
                out["log_D_B_from_D_A"] = None
        return out

    def to_dict(self):
        return {**asdict(self), "derived": self.derived()}


def log_c_sfuc(variant, bundle):
    """``log C_sfuc`` for variant ``A`` (tail decay) or ``B`` (coefficient decay)."""
    b = bundle
    check_kappa_g(variant, b.kappa, b.G, b.d)
    if not 0 < b.delta < b.G / 2.0:
        raise HypothesisViolation(f"need δ ∈ (0, G/2), got δ={b.delta}, G={b.G}", "δ ∈ (0, G/2)")
    n = b.N_A if variant == "A" else b.N_B
    if n is None or not n > 0:
        raise ValueError(f"N_{variant} must be supplied and positive")
    expo = sfuc_exponent(variant, b.d, b.G, b.kappa, b.v_inf, b.log_d(variant))
    return n * expo * math.log(b.delta / b.G)


def c_sfuc(variant, bundle):
    """``(δ/G)^{N(…)}``; underflows to 0 for extreme exponents (use ``log_c_sfuc``)."""
    return math.exp(log_c_sfuc(variant, bundle))


def db_from_da(D_A, epsilon, v_plus, d, v_inf=None, log_input=False):
    """``log D_B`` obtained from ``D_A`` through the conversion lemma, plus its upper bound.

    ``D_B = e^{2R_3(π+√v₊)} (1 + 2 D_A R_3 π/(1 − e^{−επ}))``; the second value is
    ``2R_3(π+1) + 2R_3 ‖V‖^{2/3} + ln D_A + ln(3R_3π) + 1/(επ)``.
    Returns ``(log_D_B, log_bound)``; pass ``log_input=True`` to give ``log D_A``.
    """
    log_da = D_A if log_input else math.log(D_A)
    if log_da < 0:
        raise HypothesisViolation("D_A must be ≥ 1", "D_A ≥ 1")
    if not epsilon > 0:
        raise HypothesisViolation(f"need ε = κ − 2R_3 > 0, got {epsilon}", "κ > 18e√d")
    v_inf = v_plus if v_inf is None else v_inf
    _, r3 = r_values(d)
    log_frac = log_da + math.log(2.0 * r3 * math.pi) - math.log(-math.expm1(-epsilon * math.pi))
    log_db = 2.0 * r3 * (math.pi + math.sqrt(v_plus)) + float(np.logaddexp(0.0, log_frac))
    bound = (2.0 * r3 * (math.pi + 1.0) + 2.0 * r3 * v_inf ** (2.0 / 3.0) + log_da
             + math.log(3.0 * r3 * math.pi) + 1.0 / (epsilon * math.pi))
    return log_db, bound


@dataclass(frozen=True)
class ExponentFit:
    N: float
    residual: float
    n_points: int


def fit_exponent(measurements):
    """Least-squares ``N`` in ``ln C = N (1 + G^{4/3} v^{2/3} + ln D) ln(δ/G)``.

    Each measurement is ``(delta_over_G, v_inf, lnD, C)`` or
    ``(delta_over_G, v_inf, lnD, C, G)``; ``G`` defaults to 1.
    """
    rows = [tuple(m) + (1.0,) * (5 - len(m)) for m in measurements]
    if len(rows) < 3:
        raise ValueError("need at least 3 measurements")
    x, yv = [], []
    for ratio, v, lnd, c, G in rows:
        if not 0 < c <= 1:
            raise ValueError(f"measured constant must lie in (0, 1], got {c}")
        x.append((1.0 + G ** (4.0 / 3.0) * v ** (2.0 / 3.0) + lnd) * math.log(ratio))
        yv.append(math.log(c))
    A = np.array(x)[:, None]
    if not np.any(A):
        raise ValueError("degenerate design: every δ/G equals 1")
    sol, res, _, _ = np.linalg.lstsq(A, np.array(yv), rcond=None)
    resid = float(np.linalg.norm(A[:, 0] * sol[0] - np.array(yv)))
    return ExponentFit(float(sol[0]), resid, len(rows))


def log_lower_d1(delta, v_inf, N1):
    """``log D_1^{-4} = N_1 (1 + ‖V‖^{2/3}) ln δ`` for a supplied ``N_1``."""
    return N1 * (1.0 + v_inf ** (2.0 / 3.0)) * math.log(delta)


def log_lower_d2(delta, v_inf, N2):
    """``log D_2^{-4/γ} = N_2 (1 + ‖V‖^{2/3}) ln δ`` for a supplied ``N_2``."""
    return N2 * (1.0 + v_inf ** (2.0 / 3.0)) * math.log(delta)


__all__ = ["ConstantBundle", "ExponentFit", "LOG_HUGE", "c_sfuc", "d3_of", "db_from_da", "fit_exponent",
           "gamma_of", "log_c_sfuc", "r_values", "check_kappa_g", "kappa_threshold"]
