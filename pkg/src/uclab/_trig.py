"""Closed-form integrals of exponential sums.

Every Laplacian eigenfunction on a cube factorises into one-dimensional
trigonometric factors, each a sum of at most two complex exponentials
``c * exp(i k x)``.  Products of such factors with cosines or with each
other stay exponential sums, so all the Gram, potential and box integrals
below reduce to ``∫ exp(i k x) dx`` over an interval.
"""

from __future__ import annotations

import math

import numpy as np

BCS = ("dirichlet", "neumann", "periodic")


def exp_integral(k, a, b):
    """``∫_a^b exp(i k x) dx`` for real ``k`` (broadcasts), exact at ``k = 0``."""
    k = np.asarray(k, dtype=float)
    h = b - a
    # exp(i k h) - 1 written without cancellation
    re = h * np.sinc(k * h / math.pi)
    im = h * np.sin(k * h / 2.0) * np.sinc(k * h / (2.0 * math.pi))
    return np.exp(1j * k * a) * (re + 1j * im)


def factor_terms(y, bc, L):
    """Exponential-sum form of the *unnormalised* 1D factors.

    Returns ``(coef, freq)`` of shape ``(len(y), 2)`` such that the factor for
    index ``y`` equals ``sum_j coef[:, j] * exp(1j * freq[:, j] * x)``.
    """
    y = np.asarray(y, dtype=float)
    k = math.pi * y / L
    phase = np.exp(1j * k * L / 2.0)
    if bc == "dirichlet":
        coef = np.stack([phase / 2j, -np.conj(phase) / 2j], axis=1)
        freq = np.stack([k, -k], axis=1)
    elif bc == "neumann":
        coef = np.stack([phase / 2.0, np.conj(phase) / 2.0], axis=1)
        freq = np.stack([k, -k], axis=1)
    elif bc == "periodic":
        coef = np.stack([np.ones_like(k, dtype=complex), np.zeros_like(k, dtype=complex)], axis=1)
        freq = np.stack([k, k], axis=1)
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return coef, freq


def factor_norms(y, bc, L):
    """L² norms of the unnormalised factors over one period cell of length L."""
    y = np.asarray(y)
    if bc == "dirichlet":
        return np.full(y.shape, math.sqrt(L / 2.0))
    if bc == "neumann":
        return np.where(y == 0, math.sqrt(L), math.sqrt(L / 2.0))
    return np.full(y.shape, math.sqrt(L))


def factor_values(y, bc, L, x, deriv=0):
    """Normalised 1D factors (or their ``deriv``-th derivative) at points ``x``.

    Shape ``(len(x), len(y))``.  Evaluated by the global formula, which is
    also the reflection / periodic extension beyond ``(-L/2, L/2)``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)[:, None]
    k = math.pi * y[None, :] / L
    norm = factor_norms(y, bc, L)[None, :]
    if bc == "periodic":
        return (1j * k) ** deriv * np.exp(1j * k * x) / norm
    arg = k * (x + L / 2.0)
    if bc == "dirichlet":
        base = (np.sin, np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u))
    else:
        base = (np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u), np.sin)
    return k**deriv * base[deriv % 4](arg) / norm


def factor_gram(yp, yq, bc, L, a, b, nu=0.0, deriv=(0, 0)):
    """``∫_a^b conj(f_p^(m)) f_q^(n) exp(i nu x) dx`` for normalised factors.

    ``deriv = (m, n)`` selects derivative orders.  Shape ``(len(yp), len(yq))``.
    """
    cp, kp = factor_terms(yp, bc, L)
    cq, kq = factor_terms(yq, bc, L)
    cp = cp * (1j * kp) ** deriv[0] / factor_norms(yp, bc, L)[:, None]
    cq = cq * (1j * kq) ** deriv[1] / factor_norms(yq, bc, L)[:, None]
    out = np.zeros((len(cp), len(cq)), dtype=complex)
    for i in range(2):
        for j in range(2):
            freq = kq[None, :, j] - kp[:, None, i] + nu
            out += np.conj(cp[:, None, i]) * cq[None, :, j] * exp_integral(freq, a, b)
    return out


def texp_integral(m, c, a, b, shift=0.0):
    """``∫_a^b t^m exp(c t − shift) dt`` for complex ``c`` (array) and integer ``m``.

    Uses the power series when ``|c| max(|a|,|b|)`` is small and the
    integration-by-parts recursion otherwise.  ``shift`` keeps very large
    exponentials in range.
    """
    c = np.atleast_1d(np.asarray(c, dtype=complex))
    out = np.empty(c.shape, dtype=complex)
    span = max(abs(a), abs(b))
    small = np.abs(c) * span <= 2.0
    if np.any(small):
        cs = c[small]
        acc = np.zeros(cs.shape, dtype=complex)
        term = np.ones(cs.shape, dtype=complex)
        for n in range(60):
            p = n + m + 1
            acc += term * (b**p - a**p) / p
            term = term * cs / (n + 1)
        out[small] = acc * math.exp(-shift)
    big = ~small
    if np.any(big):
        cb = c[big]
        eb, ea = np.exp(cb * b - shift), np.exp(cb * a - shift)
        val = (eb - ea) / cb
        for j in range(1, m + 1):
            val = (b**j * eb - a**j * ea) / cb - j * val / cb
        out[big] = val
    return out
