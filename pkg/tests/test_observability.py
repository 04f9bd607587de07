import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from uclab.constants import ConstantBundle
from uclab.errors import HypothesisViolation
from uclab.geometry import Domain, make_equidistributed
from uclab.observability import (ClassSpec, cluster_end, gram, mass_on_w, mass_ratio, prepare,
                                 scale_invariance_experiment, sharp_subspace_constant, sharp_weighted_constant,
                                 verify_theorem)
from uclab.quadrature import gauss_panels
from uclab.spectral import PotentialSpec, SpectralFunction, build_system

M11 = 0.2 + math.sin(0.2 * math.pi) / math.pi


@pytest.fixture(scope="module")
def unit():
    return prepare(1, 1.0, "dirichlet", None, n_modes=20, delta=0.1)


def test_single_mode_example(unit):
    assert abs(unit.gram.M[0, 0] - M11) < 1e-12
    assert M11 == pytest.approx(0.38710, abs=1e-5)
    assert mass_ratio(SpectralFunction.mode(unit.system, 0), gram_matrix=unit.gram) == pytest.approx(M11, abs=1e-12)
    assert sharp_subspace_constant(unit.gram, 1).value == pytest.approx(M11, abs=1e-12)


def test_gram_hermitian_and_bounded():
    for d, bc, pot in ((1, "periodic", "cos:2@period=0.5"), (2, "neumann", "cells:-1,1@seed=2,size=1")):
        s = prepare(d, 2.0 if d == 1 else 1.0, bc, pot, n_modes=30, delta=0.2)
        M = s.gram.M
        assert np.max(np.abs(M - M.conj().T)) < 1e-12
        ev = np.linalg.eigvalsh(M)
        assert ev[0] > -1e-10 and ev[-1] < 1 + 1e-8


def test_full_cover_is_identity():
    system = build_system(Domain(1, 1.0, "neumann"), PotentialSpec.parse("cos:1@period=1"), n_modes=15)
    cover = SimpleNamespace(domain=system.domain, points=np.zeros((1, 1)), delta=1.0)
    g = gram(system, cover)
    assert np.max(np.abs(g.M - np.eye(15))) < 1e-12
    assert sharp_subspace_constant(g, 15).value == pytest.approx(1.0, abs=1e-12)


def test_small_delta_linear():
    system = build_system(Domain(1, 1.0), None, n_modes=8)
    for delta in (1e-3, 1e-5):
        M = gram(system, make_equidistributed(system.domain, 1.0, delta)).M
        assert np.max(np.abs(M)) <= 2.0 * 2 * delta + 1e-15


@pytest.mark.parametrize("d,L,bc,pot,mode", [(1, 3.0, "dirichlet", "cos:2@period=1", "random"),
                                             (1, 2.0, "periodic", None, "centered"),
                                             (2, 2.0, "dirichlet", "cells:-1,2@seed=3,size=1", "random")])
def test_two_ratio_routes_agree(d, L, bc, pot, mode):
    s = prepare(d, L, bc, pot, n_modes=25, delta=0.15, mode=mode, seed=5)
    r = np.random.default_rng(0)
    phi = SpectralFunction(s.system, r.standard_normal(25) + 0j)
    assert abs(mass_ratio(phi, gram_matrix=s.gram) - mass_on_w(phi, s.seq) / phi.norm2) < 1e-8


def test_rayleigh_oracle_L3():
    s = prepare(1, 3.0, "dirichlet", None, n_modes=40, delta=0.1)
    got = sharp_subspace_constant(s.gram, 10)
    assert got.n_used == 10 and got.value > 0
    # independent Gram by dense Gauss quadrature of sin/cos modes on the three intervals
    y = np.arange(1, 11)
    ref = np.zeros((10, 10))
    for z in (-1.0, 0.0, 1.0):
        x, w = gauss_panels(z - 0.1, z + 0.1, 8)
        v = math.sqrt(2 / 3) * np.sin(np.pi * y[None, :] * (x[:, None] + 1.5) / 3)
        ref += v.T @ (w[:, None] * v)
    r = np.random.default_rng(1)
    best = min(minimize(lambda a: a @ ref @ a / (a @ a), r.standard_normal(10), method="BFGS",
                        options={"gtol": 1e-12}).fun for _ in range(100))
    assert abs(best - got.value) < 1e-8


def test_cluster_extension():
    s = prepare(2, 1.0, "dirichlet", None, n_modes=12, delta=0.2)
    assert cluster_end(s.system.E, 2) == 3
    res = sharp_subspace_constant(s.gram, 2)
    assert res.n_used == 3 and res.extended
    with pytest.raises(ValueError):
        sharp_subspace_constant(s.gram, 0)


def test_weighted_vacuous_equals_subspace(unit):
    top = math.exp(math.sqrt(unit.system.E[9]))
    res = sharp_weighted_constant(unit.gram, 1.0, top * 1.01, n_trunc=10)
    assert res.lower == res.upper == pytest.approx(sharp_subspace_constant(unit.gram, 10).value, abs=1e-15)


def test_weighted_unit_D():
    s = prepare(1, 1.0, "neumann", None, n_modes=20, delta=0.1)
    res = sharp_weighted_constant(s.gram, 5.0, 1.0)
    assert res.lower == pytest.approx(0.2, abs=1e-12) and res.active == 1
    with pytest.raises(HypothesisViolation):
        sharp_weighted_constant(prepare(1, 1.0, "dirichlet", None, n_modes=20).gram, 1.0, 1.0)
    with pytest.raises(HypothesisViolation):
        sharp_weighted_constant(s.gram, 5.0, 0.5)


@settings(max_examples=15)
@given(st.sampled_from([1.0, 3.0]), st.floats(0.3, 4.0), st.floats(0.05, 8.0),
       st.sampled_from(["neumann", "periodic"]), st.integers(0, 100))
def test_weighted_orderings(L, kappa, log_d, bc, seed):
    s = prepare(1, L, bc, "cos:1@period=1", n_modes=50, delta=0.1, mode="random", seed=seed)
    res = sharp_weighted_constant(s.gram, kappa, math.exp(log_d))
    lam = float(np.linalg.eigvalsh(s.gram.M)[0])
    assert lam - 1e-12 <= res.lower <= res.upper + 1e-12
    assert res.upper >= lam - 1e-12
    # the witness is feasible and realises the upper bound
    a = res.alpha
    w = np.exp(kappa * np.sqrt(np.maximum(s.system.E, 0)))
    assert np.sum(w * np.abs(a) ** 2) <= math.exp(log_d) * (1 + 1e-9)
    assert np.vdot(a, s.gram.M @ a).real == pytest.approx(res.upper, abs=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_weighted_matches_slsqp(seed):
    r = np.random.default_rng(seed)
    bc = ["dirichlet", "neumann"][seed % 2]
    s = prepare(1, 3.0, bc, f"cos:{r.uniform(-3, 3)}@period=0.5", n_modes=12, delta=float(r.uniform(0.05, 0.3)),
                mode="random", seed=seed)
    kappa = float(r.uniform(0.2, 2.0))
    lw = kappa * np.sqrt(np.maximum(s.system.E, 0))
    D = math.exp(float(r.uniform(lw.min() + 0.01, lw.max())))
    res = sharp_weighted_constant(s.gram, kappa, D)
    M, c = s.gram.M.real, np.exp(lw) - D
    best = math.inf
    for _ in range(20):
        o = minimize(lambda a: a @ M @ a / (a @ a), r.normal(size=len(c)), method="SLSQP",
                     constraints=[{"type": "ineq", "fun": lambda a: -(a @ (c * a)) / (a @ a)}],
                     options={"ftol": 1e-15, "maxiter": 500})
        if o.x @ (c * o.x) <= 1e-12 * (o.x @ o.x):
            best = min(best, o.fun)
    assert res.lower <= best + 1e-12
    assert res.upper == pytest.approx(best, rel=1e-6, abs=1e-12)
    assert res.gap < 1e-9 or res.upper < 1e3 * res.resolution


def test_weighted_huge_weights_stay_accurate():
    # weights up to e^{49·20π}: far beyond double range, eliminated exactly
    s = prepare(1, 3.0, "neumann", None, lambda_max=400.0, delta=0.1)
    res = sharp_weighted_constant(s.gram, 49.0, math.e)
    assert res.active < len(s.system.E)
    assert 0 < res.lower <= res.upper
    assert res.gap < 1e-10
    for kappa, D in ((6.0, 50.0), (12.0, 1e4)):
        res = sharp_weighted_constant(s.gram, kappa, D)
        assert res.gap < 1e-10


def test_span_witness_matches_phase_grid():
    from uclab.observability import _best_in_span
    r = np.random.default_rng(3)
    for _ in range(10):
        n = 6
        A = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
        M = A @ A.conj().T / n
        chat = r.normal(size=n)
        p = r.normal(size=n) + 1j * r.normal(size=n)
        p /= np.linalg.norm(p)
        q = r.normal(size=n) + 1j * r.normal(size=n)
        got = _best_in_span(M, chat, p, q)
        # brute force over x = cos t · e1 + e^{iφ} sin t · e2 in an orthonormal basis
        q2 = q - p * np.vdot(p, q)
        q2 /= np.linalg.norm(q2)
        t, f = np.meshgrid(np.linspace(0, math.pi, 801), np.linspace(0, 2 * math.pi, 801))
        X = np.cos(t)[..., None] * p + (np.exp(1j * f) * np.sin(t))[..., None] * q2
        val = np.einsum("abi,ij,abj->ab", X.conj(), M, X).real
        con = np.einsum("abi,abi->ab", X.conj() * chat, X).real
        feas = con <= 0
        if not feas.any():
            continue
        brute = val[feas].min()
        assert got is not None
        assert got[0] <= brute + 1e-9
        # the optimum sits on the constraint boundary, which the grid only approaches
        assert got[0] >= brute - 1e-2 * max(1.0, abs(brute))
        assert np.vdot(got[1], chat * got[1]).real <= 1e-12


def test_weighted_monotone_in_D():
    s = prepare(1, 3.0, "neumann", None, lambda_max=400.0, delta=0.1)
    prev = None
    for D in (1.5, math.e, 10.0, 1e3):
        res = sharp_weighted_constant(s.gram, 2.0, D)
        if prev is not None:
            assert res.lower <= prev.upper + 1e-12
        prev = res


def test_delta_monotone():
    vals = []
    for delta in (0.05, 0.1, 0.2):
        s = prepare(1, 3.0, "dirichlet", "cos:1@period=1", n_modes=30, delta=delta)
        vals.append((sharp_subspace_constant(s.gram, 10).value, sharp_weighted_constant(s.gram, 1.0, 50.0)))
    for (c0, w0), (c1, w1) in zip(vals, vals[1:]):
        assert c1 > c0 and w1.lower >= w0.upper - 1e-12


def test_periodic_cell_modes_scale_free():
    vals = []
    for L in (1, 3, 5):
        s = prepare(1, float(L), "periodic", None, n_modes=12 * L + 1, delta=0.1)
        y = s.system.basis.y[:, 0]
        keep = np.flatnonzero((y % (2 * L) == 0) & (np.abs(y) <= 6 * L))
        assert len(keep) == 7
        vals.append(np.linalg.eigvalsh(s.gram.M[np.ix_(keep, keep)]))
    assert np.allclose(vals[0], vals[1], atol=1e-12) and np.allclose(vals[0], vals[2], atol=1e-12)


def test_scale_invariance_table():
    tab = scale_invariance_experiment([1.0, 3.0], 49.0, math.e)
    assert tab.minimum > 0 and all(r.lower <= r.upper + 1e-12 for r in tab.rows)
    assert 0 <= tab.spread < 1 and tab.ratio_to_first() <= 1.0


def test_verify_theorem_huge_N(unit):
    b = ConstantBundle(d=1, G=1.0, delta=0.1, kappa=49.0, N_B=1e6)
    rep = verify_theorem(SpectralFunction.mode(unit.system, 0), "B", b, unit.gram)
    assert rep.status == "PASS" and rep.c_sfuc_formula == 0.0
    assert rep.log_D == pytest.approx(49.0 * math.pi)
    assert abs(rep.ratio - rep.ratio_direct) < 1e-8
    assert rep.to_dict()["margin"] == pytest.approx(M11)


def test_verify_theorem_fail_and_variant_a(unit):
    b = ConstantBundle(d=1, G=1.0, delta=0.1, kappa=49.0, N_A=1e-3, N_B=1e-3)
    rep = verify_theorem(SpectralFunction.mode(unit.system, 0), "A", b, unit.gram)
    assert rep.status == "FAIL" and rep.margin < 0


def test_verify_theorem_rejects_polynomial_decay():
    s = prepare(1, 1.0, "dirichlet", None, n_modes=400, delta=0.1)
    a = 1.0 / np.arange(1, 401) ** 3
    b = ConstantBundle(d=1, G=1.0, delta=0.1, kappa=49.0, N_B=1.0)
    with pytest.raises(HypothesisViolation, match="overflow budget"):
        verify_theorem(SpectralFunction(s.system, a + 0j), "B", b, s.gram)


def test_verify_theorem_hypotheses(unit):
    phi = SpectralFunction.mode(unit.system, 0)
    with pytest.raises(HypothesisViolation):
        verify_theorem(phi, "A", ConstantBundle(kappa=40.0, N_A=1.0), unit.gram)
    with pytest.raises(HypothesisViolation, match="needs D"):
        verify_theorem(phi, "B", ConstantBundle(kappa=49.0, N_B=1.0, D_B=2.0), unit.gram)


def test_verify_theorem_class():
    s = prepare(1, 1.0, "neumann", None, lambda_max=400.0, delta=0.1)
    b = ConstantBundle(d=1, G=1.0, delta=0.1, kappa=49.0, N_B=1.0)
    rep = verify_theorem(ClassSpec(49.0, math.e), "B", b, s.gram)
    assert rep.status == "PASS" and rep.ratio <= rep.sharp_upper and rep.details["dual_gap"] < 0.05
    rep_a = verify_theorem(ClassSpec(49.0, math.e), "A", ConstantBundle(kappa=49.0, N_A=1.0), s.gram)
    assert rep_a.details["log_D_B_converted"] > 150
