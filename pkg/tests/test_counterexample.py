import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uclab.counterexample import (BumpSpec, bump_function, corollary_demo, decay_slope, derivative_norms, find_gap, order_for,
                                  unit_derivative_norm, verify_lemma_polynomial)
from uclab.errors import HypothesisViolation, InconclusiveError
from uclab.funclass import certify_A
from uclab.geometry import Domain, make_equidistributed
from uclab.observability import prepare
from uclab.spectral import PotentialSpec, build_system


def fd_second_derivative_norm(radius, amplitude=1.0, n=400_001):
    """``∫ (φ'')²`` by central differences of the 1D bump on a fine uniform grid."""
    x = np.linspace(-radius, radius, n)
    h = x[1] - x[0]
    q = np.clip((x / radius) ** 2, 0, 1)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(q < 1, amplitude * np.exp(-1.0 / (1.0 - q)), 0.0)
    f2 = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    return float(np.sum(f2**2) * h)


def test_find_gap_example():
    seq = make_equidistributed(Domain(1, 1.0), 1.0, 0.1)
    spec = find_gap(seq)
    assert spec.center[0] == pytest.approx(0.3) and spec.radius == pytest.approx(0.18)


def test_find_gap_narrow():
    spec3 = find_gap(make_equidistributed(Domain(1, 3.0), 1.0, 0.49))
    assert spec3.radius == pytest.approx(0.009) and spec3.center[0] == pytest.approx(0.5)
    spec1 = find_gap(make_equidistributed(Domain(1, 1.0), 1.0, 0.49))
    assert spec1.radius == pytest.approx(0.0045)


def test_find_gap_fraction_guard():
    seq = make_equidistributed(Domain(1, 1.0), 1.0, 0.1)
    with pytest.raises(ValueError):
        find_gap(seq, radius_fraction=1.1)


@settings(max_examples=20)
@given(st.sampled_from([1, 2]), st.sampled_from([1.0, 3.0]), st.floats(0.02, 0.45), st.integers(0, 1000))
def test_bump_vanishes_on_w(d, L, delta, seed):
    seq = make_equidistributed(Domain(d, L), 1.0, delta, "random", seed)
    spec = find_gap(seq)
    r = np.random.default_rng(seed)
    z = seq.points[r.integers(len(seq), size=500)]
    u = r.standard_normal((500, d))
    u *= (delta * r.uniform(size=(500, 1)) ** (1 / d)) / np.linalg.norm(u, axis=1, keepdims=True)
    assert np.all(spec(z + u) == 0.0)
    assert np.all(np.abs(spec.center) + spec.radius <= L / 2 + 1e-12)
    assert spec(spec.center[None, :])[0] == pytest.approx(math.exp(-1))


def test_second_derivative_matches_finite_differences():
    for r in (0.1, 0.2, 1.0):
        got = derivative_norms(BumpSpec(np.zeros(1), r), 2)[0]
        assert got == pytest.approx(fd_second_derivative_norm(r), rel=1e-4)


def test_derivative_scaling():
    base = derivative_norms(BumpSpec(np.zeros(2), 0.1), 4)
    assert derivative_norms(BumpSpec(np.zeros(2), 0.1, 3.0), 4) == pytest.approx([9 * v for v in base], rel=1e-14)
    assert derivative_norms(BumpSpec(np.zeros(2), 0.2), 4)[0] == pytest.approx(base[0] * 2.0 ** (2 - 8), rel=1e-14)
    assert base[0] == pytest.approx(base[1], rel=1e-9)


def test_derivative_order_guard():
    spec = BumpSpec(np.zeros(1), 0.1)
    for N in (3, 10):
        with pytest.raises(ValueError):
            derivative_norms(spec, N)
    assert all(unit_derivative_norm(1, N) > 0 for N in (0, 2, 4, 6, 8))


def test_order_for():
    assert [order_for(k) for k in (0, 1, 1.5, 2, 3.9)] == [2, 2, 2, 4, 4]


@pytest.fixture(scope="module")
def free400():
    return prepare(1, 1.0, "dirichlet", None, n_modes=400, delta=0.1)


def test_lemma_kappa_one(free400):
    rep = verify_lemma_polynomial(find_gap(free400.seq), 1.0, free400.system)
    assert rep.holds and rep.conclusive and rep.N == 2
    assert rep.bound == rep.bound_stated


def test_lemma_kappa_zero(free400):
    spec = find_gap(free400.seq)
    rep = verify_lemma_polynomial(spec, 0.0, free400.system)
    phi = bump_function(spec, free400.system)
    assert rep.holds and rep.weighted_sum == pytest.approx(phi.norm2, rel=1e-12)


def test_lemma_two_dimensions():
    s = prepare(2, 1.0, "dirichlet", None, n_modes=600, delta=0.1)
    rep = verify_lemma_polynomial(find_gap(s.seq), 1.0, s.system)
    assert rep.holds and rep.conclusive


def test_lemma_needs_zero_potential():
    s = build_system(Domain(1, 1.0), PotentialSpec.parse("cos:1@period=1"), n_modes=10)
    with pytest.raises(HypothesisViolation):
        verify_lemma_polynomial(BumpSpec(np.array([0.3]), 0.1), 1.0, s)


def test_superpolynomial_decay():
    s = build_system(Domain(1, 1.0), None, n_modes=1000)
    seq = make_equidistributed(s.domain, 1.0, 0.1)
    rep = verify_lemma_polynomial(find_gap(seq), 1.0, s)
    assert rep.decay_slope < -4


def test_corollary(free400):
    rep = corollary_demo(find_gap(free400.seq), free400.seq, 1.0, free400.system)
    assert rep.mass_ratio < 1e-10 and math.isfinite(rep.D_poly) and rep.witnessed
    assert rep.log_D_B_exponential > 1000
    assert rep.to_dict()["witnessed"]


def test_corollary_small_delta():
    s = prepare(1, 1.0, "dirichlet", None, n_modes=400, delta=0.01)
    spec = find_gap(s.seq)
    assert spec.radius > 0.2
    assert corollary_demo(spec, s.seq, 1.0, s.system).mass_ratio < 1e-10


def test_corollary_inconclusive_when_truncated():
    s = prepare(1, 1.0, "dirichlet", None, n_modes=8, delta=0.1)
    with pytest.raises(InconclusiveError):
        corollary_demo(find_gap(s.seq), s.seq, 3.9, s.system)


def test_exponential_certificate_is_huge(free400):
    phi = bump_function(find_gap(free400.seq), free400.system)
    assert certify_A(phi, 49.0).log_D_B_min > 700
    assert math.isnan(decay_slope(type(phi)(phi.system, np.eye(400)[0] + 0j)))
