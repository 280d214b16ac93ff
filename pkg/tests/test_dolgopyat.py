import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempomix import (BNormContext, CylinderFunction, SymbolicSystem, b_norm, cancellation_pair_bound,
                      cancellation_search, contraction_factor, flat_case_contraction, l1_to_sup_contraction,
                      lasota_yorke_verify)
from tempomix.dolgopyat import (c11_bound, fit_c9, fit_lasota_yorke, iteration_count, make_context, pair_gap,
                                twisted_operator, twisted_spectral_radius)
from tempomix.errors import NoPair, PreconditionUnmet, ValidationError
from tempomix.shift import word_count

LOG2 = math.log(2)


@pytest.fixture(scope="module")
def step_roof(full2):
    """Depth-1 roof (1 on symbol 0, sqrt 2 on symbol 1): small C_10."""
    return CylinderFunction(full2, 1, [1.0, math.sqrt(2)])


def _h(system, depth, seed, complex_=True):
    rng = np.random.default_rng(seed)
    m = word_count(system, depth)
    vals = rng.normal(size=m) + (1j * rng.normal(size=m) if complex_ else 0)
    return CylinderFunction(system, depth, vals)


def test_iteration_count():
    assert iteration_count(100.0) == math.ceil(4 * math.log(100))
    assert iteration_count(10.0, 1.0) == 3


def test_b_norm_examples(full2):
    ctx = BNormContext(b=10.0, c10=3.0, lam_prime=0.75)
    assert b_norm(CylinderFunction.constant(full2, 1.0, depth=4), ctx) == 1.0
    # sup 1, Lip = 2 C_10 |b|: values +-1 at index 0 give Lip 2, so scale b accordingly
    h = CylinderFunction(full2, 1, [1.0, -1.0])
    assert b_norm(h, BNormContext(b=1 / 3.0, c10=3.0, lam_prime=0.75)) == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        BNormContext(b=1.0, c10=0.5, lam_prime=0.75)


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.complex_numbers(max_magnitude=1e3), st.floats(1, 1e4))
def test_b_norm_homogeneous(seed, c, b):
    system = SymbolicSystem.full_shift(2)
    h = _h(system, 4, seed)
    ctx = BNormContext(b=b, c10=2.0, lam_prime=0.75)
    assert b_norm(h * c, ctx) == pytest.approx(abs(c) * b_norm(h, ctx), rel=1e-9, abs=1e-300)


def test_lasota_yorke_constant(full2, bernoulli_phi, golden_roof):
    one = CylinderFunction.constant(full2, 1.0)
    for b in (10.0, 100.0):
        for n in (1, 5, 12):
            rep = lasota_yorke_verify(full2, bernoulli_phi, golden_roof, one, n, b,
                                      c11=c11_bound(bernoulli_phi, golden_roof, b))
            assert rep.lhs <= c11_bound(bernoulli_phi, golden_roof, b) * b + 1e-12


def test_lasota_yorke_b_zero_averaging(full2, bernoulli_phi, golden_roof):
    # b = 0: only the contraction term remains for averaging operators on deep h
    h = _h(full2, 8, 1, complex_=False)
    rep = lasota_yorke_verify(full2, bernoulli_phi, golden_roof, h, 3, 0.0, c11=0.0)
    assert rep.lhs <= full2.lam ** 3 * h.lipschitz * (1 + 1e-12)


def test_lasota_yorke_fit(full2, bernoulli_phi, golden_roof):
    rng = np.random.default_rng(2)
    inst = [(_h(full2, int(rng.integers(1, 7)), k), int(rng.integers(1, 21)), float(rng.choice([10, 100, 1000])))
            for k in range(25)]
    c11, recs = fit_lasota_yorke(full2, bernoulli_phi, golden_roof, inst)
    assert math.isfinite(c11)
    assert all(rec.lhs <= rec.rhs * (1 + 1e-12) + 1e-12 for rec in recs)
    assert c11 <= c11_bound(bernoulli_phi, golden_roof, 10.0)


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6), st.integers(1, 15), st.floats(2, 2000), st.integers(1, 6))
def test_analytic_c11_holds(seed, n, b, depth):
    system = SymbolicSystem.full_shift(2)
    rng = np.random.default_rng(seed)
    r = CylinderFunction(system, 3, rng.uniform(0.5, 2.0, 8))
    phi_p = CylinderFunction.constant(system, -LOG2)
    lasota_yorke_verify(system, phi_p, r, _h(system, depth, seed), n, b, c11=c11_bound(phi_p, r, b))


def test_constant_roof_lattice(full2, bernoulli_phi):
    one = CylinderFunction.constant(full2, 1.0)
    for k in (1, 5, 10):
        b = 2 * math.pi * k
        assert twisted_spectral_radius(full2, bernoulli_phi, one, b) == pytest.approx(1.0, abs=1e-12)
        row = contraction_factor(full2, bernoulli_phi, one, b, depth=6, n_random=8)
        assert row.factor >= 1 - 1e-10
    with pytest.raises(NoPair):
        cancellation_search(full2, bernoulli_phi, one, one, 2 * math.pi)
    rep = l1_to_sup_contraction(full2, bernoulli_phi, one, one, 2 * math.pi, depth=4)
    assert rep.factor == pytest.approx(1.0, abs=1e-10)
    assert rep.mu_U == 0.0


def test_b_zero_radius(full2, bernoulli_phi, golden_roof):
    assert twisted_spectral_radius(full2, bernoulli_phi, golden_roof, 0.0) == pytest.approx(1.0, abs=1e-12)
    L = twisted_operator(full2, bernoulli_phi, golden_roof, 0.0, 5)
    assert np.allclose(L.apply(np.ones(L.size)), 1.0)


def test_golden_roof_contracts(full2, bernoulli_phi, golden_roof):
    for b in (10.0, 100.0):
        row = contraction_factor(full2, bernoulli_phi, golden_roof, b, depth=8, n_random=16)
        assert row.spectral_radius < 1
        assert row.factor < 1
    assert math.isfinite(fit_c9([row]))


@settings(max_examples=25)
@given(st.integers(0, 10 ** 6), st.floats(2, 1e3), st.integers(1, 30))
def test_sup_and_b_norm_never_grow(seed, b, n):
    system = SymbolicSystem.full_shift(2)
    rng = np.random.default_rng(seed)
    r = CylinderFunction(system, 2, rng.uniform(0.5, 2.0, 4))
    phi_p = CylinderFunction.constant(system, -LOG2)
    ctx = make_context(phi_p, r, b)
    h = _h(system, 5, seed)
    L = twisted_operator(system, phi_p, r, b, 5)
    out = L.power_apply(h, n)
    assert out.sup_norm <= h.sup_norm * (1 + 1e-12)
    assert b_norm(out, ctx) <= b_norm(h, ctx) * (1 + 1e-12)


def test_flat_case(full2, bernoulli_phi, step_roof):
    ctx = make_context(bernoulli_phi, step_roof, 10.0)
    assert ctx.c10 == pytest.approx((math.sqrt(2) - 1) / 0.25)
    with pytest.raises(PreconditionUnmet):
        flat_case_contraction(full2, bernoulli_phi, step_roof, CylinderFunction.constant(full2, 1.0), 10.0, 1, ctx)
    # oscillation at index 7 only: |h|_inf = eps, |h|_Lip = 2 eps 2^7
    eps = 1e-3
    vals = eps * np.array([1.0 if w & 1 else -1.0 for w in range(256)])
    h = CylinderFunction(full2, 8, vals)
    for n in (1, 4, 8):
        assert flat_case_contraction(full2, bernoulli_phi, step_roof, h, 10.0, n, ctx) <= ctx.lam_prime
    # boundary |h|_Lip = 2 C_10 |b| |h|_inf exactly
    b_edge = h.lipschitz / (2 * ctx.c10 * h.sup_norm)
    assert flat_case_contraction(full2, bernoulli_phi, step_roof, h, b_edge, 1, ctx) <= ctx.lam_prime


def test_cancellation_examples():
    assert cancellation_pair_bound(1, 1) == pytest.approx(0.0, abs=1e-15)
    assert cancellation_pair_bound(1, -1) == pytest.approx(1.0)
    assert cancellation_pair_bound(1, 1j) == pytest.approx(1.5 - math.sqrt(2))
    with pytest.raises(ValidationError):
        cancellation_pair_bound(0, 1)


@settings(max_examples=200)
@given(st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e6),
       st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e6))
def test_cancellation_property(v1, v2):
    assert cancellation_pair_bound(v1, v2) >= 0


def test_cancellation_search(full2, bernoulli_phi, golden_roof):
    one = CylinderFunction.constant(full2, 1.0)
    pair = cancellation_search(full2, bernoulli_phi, golden_roof, one, 100.0)
    assert pair.method == "guided"
    assert pair.gap >= min(abs(np.exp(100j) - 1), abs(np.exp(100j * (1 + 5 ** 0.5) / 2) - 1))
    assert pair.gap == pytest.approx(pair_gap(golden_roof, one, pair.y1, pair.y2, pair.n_b, 100.0), abs=0)
    assert pair.y1[pair.n_b:] == pair.y2[pair.n_b:] == pair.x
    small = cancellation_search(full2, bernoulli_phi, golden_roof, one, 10.0)
    assert small.method == "exhaustive"
    assert small.gap > 0.5
    with pytest.raises(PreconditionUnmet):
        cancellation_search(full2, bernoulli_phi, golden_roof, CylinderFunction(full2, 1, [1.0, 0.1]), 10.0)


def test_l1_never_exceeds_sup(full2, bernoulli_phi, golden_roof):
    for b in (10.0, 100.0):
        h = _h(full2, 3, int(b))
        rep = l1_to_sup_contraction(full2, bernoulli_phi, golden_roof, h, b, depth=8)
        assert rep.l1 <= h.sup_norm
        assert rep.factor < 1
