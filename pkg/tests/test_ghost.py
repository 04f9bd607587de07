import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uclab.counterexample import bump_function, find_gap
from uclab.errors import HypothesisViolation
from uclab.geometry import Domain, Region, make_equidistributed
from uclab.ghost import (GhostFunction, eval_F, eval_gradF, extend, extended_potential, h1_norm, measure_interpolation,
                         s_eval, verify_two_sided)
from uclab.observability import prepare
from uclab.quadrature import gauss_panels
from uclab.spectral import PotentialSpec, SpectralFunction, build_system

PI = math.pi


def ghost(n=20, L=1.0, bc="dirichlet", pot=None, seed=0, d=1):
    s = build_system(Domain(d, L, bc), PotentialSpec.parse(pot) if pot else None, n_modes=n)
    r = np.random.default_rng(seed)
    return GhostFunction(s, r.standard_normal(n) + (1j * r.standard_normal(n) if bc == "periodic" else 0))


def test_s_eval_examples():
    assert s_eval(4.0, 1.0) == pytest.approx(1.81343, abs=1e-5)
    assert s_eval(4.0, 1.0) == pytest.approx(math.sinh(2) / 2, rel=1e-15)
    assert s_eval(0.0, 0.7) == 0.7
    assert s_eval(-4.0, PI / 4) == pytest.approx(0.5, rel=1e-15)


@pytest.mark.parametrize("E", [-9.0, -1e-13, 0.0, 1e-13, 2.5])
def test_s_eval_derivative_at_zero(E):
    assert s_eval(E, 0.0) == 0.0
    assert s_eval(E, 0.0, 1) == pytest.approx(1.0)
    h = 1e-6
    assert s_eval(E, 0.3, 1) == pytest.approx((s_eval(E, 0.3 + h) - s_eval(E, 0.3 - h)) / (2 * h), rel=1e-8)


def test_s_eval_continuous_across_cutoff():
    for E in (1e-12, -1e-12):
        assert s_eval(E * 0.99, 2.0) == pytest.approx(s_eval(E * 1.01, 2.0), rel=1e-14)


def test_branches():
    s = build_system(Domain(1, 1.0, "neumann"), PotentialSpec.constant(-PI**2), n_modes=3)
    gf = GhostFunction(s, np.ones(3))
    assert gf.skind.tolist() == ["sin", "linear", "sinh"]


@pytest.mark.parametrize("bc,pot", [("dirichlet", "cos:2@period=0.5"), ("periodic", None), ("neumann", "cos:-1@period=1")])
def test_ghost_identity(bc, pot, rng):
    gf = ghost(25, 1.0, bc, pot)
    x = rng.uniform(-0.5, 0.5, (100, 1))
    assert np.max(np.abs(eval_F(gf, x, 0.0))) == 0.0
    assert np.max(np.abs(eval_gradF(gf, x, 0.0)[:, -1] - gf.phi_n(x))) < 1e-10


def test_gradient_by_differences(rng):
    gf = ghost(10, 1.0, "dirichlet", "cos:1@period=1", d=2)
    x = rng.uniform(-0.5, 0.5, (5, 2))
    t = rng.uniform(-1, 1, 5)
    g = eval_gradF(gf, x, t)
    h = 1e-6
    for l in range(3):
        e = np.zeros(3)
        e[l] = h
        fp = eval_F(gf, x + e[:2], t + e[2])
        fm = eval_F(gf, x - e[:2], t - e[2])
        assert np.allclose(g[:, l], (fp - fm) / (2 * h), rtol=1e-6, atol=1e-6)


def test_single_mode_growth():
    s = build_system(Domain(1, 1.0), None, n_modes=3)
    gf = GhostFunction(s, np.array([0, 0, 1.0]))
    w = gf.omega[2]
    t = np.linspace(5, 10, 50) / w
    vals = np.abs(eval_F(gf, np.full((50, 1), 0.1), t))
    slope = np.polyfit(t, np.log(vals), 1)[0]
    assert abs(slope - w) < 0.01 * w


def test_extend_rejects_even_R():
    s = build_system(Domain(1, 1.0), None, n_modes=3)
    with pytest.raises(ValueError):
        extend(s.psi, R=4, domain=s.domain)


def test_dirichlet_fold_matches_global_sine(rng):
    dom = Domain(1, 1.0)
    ext = extend(lambda x: np.sqrt(2) * np.sin(3 * PI * (x[:, 0] + 0.5)), R=51, domain=dom)
    x = rng.uniform(-25.5, 25.5, (200, 1))
    assert np.max(np.abs(ext(x) - np.sqrt(2) * np.sin(3 * PI * (x[:, 0] + 0.5)))) < 1e-12


def test_periodic_and_neumann_extension(rng):
    x = rng.uniform(-7.5, 7.5, (200, 1))
    per = extend(lambda p: np.exp(2j * PI * p[:, 0]), R=15, domain=Domain(1, 1.0, "periodic"))
    assert np.max(np.abs(per(x) - np.exp(2j * PI * x[:, 0]))) < 1e-12
    neu = extend(lambda p: np.cos(PI * (p[:, 0] + 0.5)), R=15, domain=Domain(1, 1.0, "neumann"))
    assert np.max(np.abs(neu(x) - np.cos(PI * (x[:, 0] + 0.5)))) < 1e-12


def test_extended_potential_reflects_evenly():
    s = build_system(Domain(1, 1.0), PotentialSpec.parse("cells:-1,3@seed=2,size=0.25"), n_modes=3)
    V = extended_potential(s, R=5)
    u = np.linspace(0.01, 0.49, 13)[:, None]
    for edge in (0.5, 1.5, -0.5):
        assert np.array_equal(V(edge + u), V(edge - u))


@pytest.mark.parametrize("bc", ["dirichlet", "neumann", "periodic"])
def test_extended_orthogonality(bc):
    dom = Domain(1, 1.0, bc)
    s = build_system(dom, PotentialSpec.parse("cos:1@period=0.5"), n_modes=8)
    ext = extend(s.psi, R=3, domain=dom)
    x, w = gauss_panels(-1.5, 1.5, 60)
    v = ext(x[:, None])
    assert np.max(np.abs(v.conj().T @ (w[:, None] * v) - 3 * np.eye(8))) < 1e-10


def test_basis_evaluation_extends_automatically(rng):
    s = build_system(Domain(2, 1.0, "neumann"), PotentialSpec.parse("cells:0,2@seed=1,size=0.5"), n_modes=6)
    x = rng.uniform(-2.5, 2.5, (50, 2))
    ext = extend(s.psi, R=5, domain=s.domain)
    assert np.allclose(s.psi(x), ext(x), atol=1e-12)


def test_single_mode_h1_closed_form():
    s = build_system(Domain(1, 1.0), None, n_modes=1)
    gf = GhostFunction(s, np.array([1.0]))
    mp.mp.dps = 30
    ref = float(mp.quad(lambda t: mp.sinh(mp.pi * t) ** 2 * (1 / mp.pi**2 + 1) + mp.cosh(mp.pi * t) ** 2, [-1, 1]))
    box = Region.box([-0.5, -1.0], [0.5, 1.0])
    assert h1_norm(gf, box).value == pytest.approx(ref, rel=1e-12)
    assert h1_norm(gf, box, "tensor-gauss").value == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("d,bc,pot", [(1, "dirichlet", "cos:3@period=0.5"), (1, "periodic", "cos:1@period=1"),
                                      (2, "neumann", "cells:-2,2@seed=4,size=0.5")])
def test_exact_matches_tensor(d, bc, pot):
    gf = ghost(15, 1.0, bc, pot, d=d)
    box = Region.box([-0.5] * d + [-1.5], [0.3] * d + [2.0])
    a, b = h1_norm(gf, box), h1_norm(gf, box, "tensor-gauss")
    assert abs(a.value - b.value) <= 1e-8 * a.value and not b.flagged


def test_box_additivity():
    gf = ghost(20, 3.0, "neumann", "cos:1@period=1")
    whole = h1_norm(gf, Region.box([-1.5, -1.0], [1.5, 1.0])).value
    parts = sum(h1_norm(gf, Region.box([x0, t0], [x1, t1])).value
                for x0, x1 in ((-1.5, -0.2), (-0.2, 1.5)) for t0, t1 in ((-1.0, 0.4), (0.4, 1.0)))
    assert parts == pytest.approx(whole, rel=1e-8)


def test_qmc_error_bars_cover_exact():
    gf = ghost(6, 1.0, "dirichlet", None)
    box = Region.box([-0.5, 0.0], [0.5, 0.5])
    exact = h1_norm(gf, box).value
    hits = 0
    for seed in range(20):
        q = h1_norm(gf, box, "quasi-mc", n_points=1 << 10, n_rep=8, seed=seed)
        hits += abs(q.value - exact) <= 3 * q.error
    assert hits >= 19


def test_u1_inside_u3_and_sliver():
    gf = ghost(10, 3.0, "dirichlet", "cos:1@period=1")
    seq = make_equidistributed(gf.system.domain, 1.0, 0.2)
    u1 = h1_norm(gf, Region.u(1, seq), "quasi-mc", n_points=1 << 14)
    u3 = h1_norm(gf, Region.u(3, seq), "quasi-mc", n_points=1 << 14)
    assert u1.value <= u3.value + 3 * (u1.error + u3.error)
    sliver = h1_norm(gf, Region.s(1, [0.0], 1e-4), "quasi-mc", n_points=1 << 12)
    assert 0 <= sliver.value < 1e-10


def test_box_only_quadratures():
    gf = ghost(4)
    seq = make_equidistributed(gf.system.domain, 1.0, 0.2)
    with pytest.raises(ValueError):
        h1_norm(gf, Region.u(1, seq), "exact")


def test_two_sided_single_mode():
    s = build_system(Domain(1, 1.0), None, n_modes=1)
    rep = verify_two_sided(GhostFunction(s, np.array([1.0])), 1.0)
    assert rep.lower == 0.5 and rep.upper == pytest.approx(4.0 * math.exp(2 * PI))
    assert rep.lower < rep.middle < rep.upper and rep.ok
    assert rep.middle == pytest.approx(rep.middle_r1, rel=1e-10)


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("seed", range(3))
def test_two_sided_random(T, seed):
    rep = verify_two_sided(ghost(20, 1.0, "dirichlet", "cos:2@period=0.5", seed), T, quadrature=seed == 0)
    assert rep.ok


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.floats(0.05, 2.0), st.sampled_from(["dirichlet", "neumann", "periodic"]),
       st.sampled_from([1.0, 3.0]))
def test_two_sided_property(seed, T, bc, L):
    rep = verify_two_sided(ghost(12, L, bc, "cos:1.5,-0.5@period=1", seed), T, quadrature=False)
    assert rep.lower_ok and rep.upper_ok


def test_two_sided_small_T():
    gf = ghost(10)
    reps = [verify_two_sided(gf, T, quadrature=False) for T in (1e-4, 1e-5)]
    for r in reps:
        assert r.middle / r.lower >= 1.0
    assert reps[1].upper / reps[0].upper == pytest.approx(0.1, rel=1e-2)
    assert reps[1].lower / reps[0].lower == pytest.approx(0.1)


def test_two_sided_needs_odd_side():
    with pytest.raises(HypothesisViolation):
        verify_two_sided(ghost(5, 2.0), 1.0)


def test_measure_interpolation_single_mode():
    s = prepare(1, 1.0, "dirichlet", None, n_modes=1, delta=0.1)
    rep = measure_interpolation(GhostFunction(s.system, np.array([1.0])), s.seq, n_points=1 << 12)
    assert math.isfinite(rep.log_D1) and math.isfinite(rep.log_D2)
    assert rep.gamma == pytest.approx(0.06, abs=1e-4)
    assert rep.w_mass == pytest.approx(0.2 + math.sin(0.2 * PI) / PI)
    assert not rep.h1_U1.flagged


def test_measure_interpolation_vanishing_bump():
    s = prepare(1, 1.0, "dirichlet", None, n_modes=400, delta=0.1)
    phi = bump_function(find_gap(s.seq), s.system)
    rep = measure_interpolation(GhostFunction.from_function(phi), s.seq, n_points=1 << 10, n_rep=4)
    assert rep.D1_infinite and rep.to_dict()["D1_infinite"]


def test_measure_interpolation_hypotheses():
    gf = ghost(4, 2.0)
    with pytest.raises(HypothesisViolation):
        measure_interpolation(gf, make_equidistributed(gf.system.domain, 1.0, 0.1))
    gf = ghost(4, 3.0)
    with pytest.raises(HypothesisViolation):
        measure_interpolation(gf, make_equidistributed(gf.system.domain, 3.0, 0.1))
