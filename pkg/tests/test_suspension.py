import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempomix import (CylinderFunction, RoofFunction, SuspensionPoint, SymbolicSystem, TwoSidedPoint,
                      birkhoff_sum, construct_roof_with_range, delta_s, delta_u, delta_u_truncation,
                      flow_evolve, temporal_distance, temporal_range)
from tempomix.errors import NotStableEquivalent, NotUnstableEquivalent, ValidationError
from tempomix.shift import random_point

GOLDEN = (1 + math.sqrt(5)) / 2


def _pt(doc):
    return TwoSidedPoint.from_json(doc)


def test_birkhoff_examples(full2):
    x = TwoSidedPoint.periodic((0, 1))
    r = CylinderFunction(full2, 1, [0.7, 1.9])
    assert birkhoff_sum(r, x, 0) == 0.0
    assert birkhoff_sum(r, x, 4) == pytest.approx(2 * 0.7 + 2 * 1.9, abs=1e-15)
    assert birkhoff_sum(CylinderFunction.constant(full2, 1.25), x, 7) == pytest.approx(8.75)


def test_delta_examples(full2):
    a, b = 0.7, 1.9
    r = CylinderFunction(full2, 1, [a, b])
    x = TwoSidedPoint.periodic((0,))
    y = x.replaced({0: 1})
    assert delta_s(x, y, r) == pytest.approx(b - a, abs=1e-15)
    assert delta_s(x, y, CylinderFunction.constant(full2, 2.0)) == 0.0
    z = x.replaced({1: 1})
    assert delta_u(x, z, r) == 0.0
    with pytest.raises(NotStableEquivalent):
        delta_s(x, TwoSidedPoint.periodic((1,)), r)
    with pytest.raises(NotUnstableEquivalent):
        delta_u(x, TwoSidedPoint.periodic((1,)), r)


def test_delta_oracle(full2, frozen):
    ora = frozen["delta"]
    r = CylinderFunction(full2, ora["depth"], ora["values"])
    for case in ora["stable"]:
        assert delta_s(_pt(case["x"]), _pt(case["y"]), r) == pytest.approx(case["value"], abs=1e-12)
    for case in ora["unstable"]:
        assert delta_u(_pt(case["x"]), _pt(case["y"]), r) == pytest.approx(case["value"], abs=1e-12)


def test_truncation_bound_examples(full2):
    rng = np.random.default_rng(0)
    r = CylinderFunction(full2, 3, rng.uniform(0.5, 2.0, 8))
    x = random_point(full2, rng, m=3)
    y = x.replaced({2: 1 - x[2], -1: 1 - x[-1]})
    for k in range(0, 12):
        rep = delta_u_truncation(x, y, r, k)
        assert rep.error <= rep.bound
    assert delta_u_truncation(x, y, CylinderFunction.constant(full2, 1.0), 3).exact == 0.0


def test_temporal_distance_degenerate(golden_roof):
    x0 = golden_roof.base_point
    x1 = x0.replaced({-3: 1})
    x2 = x0.replaced({2: 1})
    assert temporal_distance(x0, x2, x0, golden_roof) == 0.0
    assert temporal_distance(x1, x0, x0, golden_roof) == 0.0


def test_range_examples(full2, frozen):
    assert temporal_range(full2, CylinderFunction.constant(full2, 1.0)).values == (0.0,)
    ora = frozen["cohomologous_roof"]
    r = CylinderFunction.from_json(full2, ora)
    assert r.min > 0
    assert temporal_range(full2, r).values == (0.0,)


def test_fixture_roofs_range(full2, golden_roof, sqrt2_roof):
    for roof, beta in ((golden_roof, GOLDEN), (sqrt2_roof, math.sqrt(2))):
        table = temporal_range(full2, roof, window=6)
        assert table.matches([1.0, beta])
        # some rectangle attains alpha
        assert np.any(np.isclose(table.h_values, 1.0, atol=1e-12))


def test_construct_roof(full2):
    with pytest.raises(ValidationError):
        construct_roof_with_range(full2, 1.0, 1.0)
    roof = construct_roof_with_range(full2, 1.0, GOLDEN, depth=6)
    assert temporal_range(full2, roof, roof.base_point, 6).matches([1.0, GOLDEN])
    assert roof.r_min > 0


def test_roof_json_roundtrip(full2, golden_roof):
    again = RoofFunction.from_json(full2, golden_roof.to_json())
    assert again.allclose(golden_roof, atol=0)
    assert again.base_point == golden_roof.base_point


def test_flow_examples(full2):
    one = CylinderFunction.constant(full2, 1.0)
    x = TwoSidedPoint((0, 1, 1), (0,), (1, 0))
    p = SuspensionPoint(x, 0.0)
    assert flow_evolve(p, 0.0, one) == p
    q = flow_evolve(p, 2.5, one)
    assert q.height == pytest.approx(0.5)
    assert q.base.same_as(x.shifted(2))
    with pytest.raises(ValidationError):
        flow_evolve(SuspensionPoint(x, 1.5), 0.1, one)


# ---------------------------------------------------------------- properties

def _roof(seed, depth=3):
    rng = np.random.default_rng(seed)
    system = SymbolicSystem.full_shift(2, lam=float(rng.uniform(0.3, 0.8)))
    return system, CylinderFunction(system, depth, rng.uniform(0.5, 2.0, 2 ** depth)), rng


def _stable_partner(x, rng, reach=3):
    return x.replaced({i: int(rng.integers(2)) for i in range(-reach, reach + 1)})


def _with_past(x, rng, reach=3):
    """Point sharing the past of x (indices < -reach) but with a new future."""
    m = max(x.m, reach)
    w = x.widened(m)
    window = w.window[:m - reach] + tuple(int(rng.integers(2)) for _ in range(m + reach + 1))
    return TwoSidedPoint(window, w.left_tail, tuple(int(rng.integers(2)) for _ in range(int(rng.integers(1, 3)))))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_delta_antisymmetry_and_cocycle(seed):
    system, r, rng = _roof(seed)
    x = random_point(system, rng, m=3)
    y, z = _stable_partner(x, rng), _stable_partner(x, rng)
    assert delta_s(x, y, r) == pytest.approx(-delta_s(y, x, r), abs=1e-12)
    assert delta_s(x, z, r) == pytest.approx(delta_s(x, y, r) + delta_s(y, z, r), abs=1e-12)
    u = _with_past(x, rng)
    v = TwoSidedPoint(u.widened(max(u.m, x.m)).window, u.widened(max(u.m, x.m)).left_tail, (1,))
    v = v.replaced({2: int(rng.integers(2))})
    assert delta_u(x, u, r) == pytest.approx(-delta_u(u, x, r), abs=1e-12)
    assert delta_u(x, v, r) == pytest.approx(delta_u(x, u, r) + delta_u(u, v, r), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 15))
def test_truncation_bound_property(seed, k):
    system, r, rng = _roof(seed)
    x = random_point(system, rng, m=3)
    y = _with_past(x, rng, reach=int(rng.integers(0, 4)))
    rep = delta_u_truncation(x, y, r, k)
    assert rep.error <= rep.bound * (1 + 1e-12) + 1e-13


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-6, 6), st.floats(-6, 6))
def test_flow_semigroup(seed, t1, t2):
    system, r, rng = _roof(seed, depth=2)
    x = random_point(system, rng, m=2)
    p = SuspensionPoint(x, float(rng.uniform(0, 1)) * float(r(x)))
    a = flow_evolve(flow_evolve(p, t1, r), t2, r)
    b = flow_evolve(p, t1 + t2, r)
    assert a.base.same_as(b.base)
    assert a.height == pytest.approx(b.height, abs=1e-9)
    assert a.base.is_admissible(system)


def test_range_symmetric(golden_roof, full2):
    vals = temporal_range(full2, golden_roof, window=6).values
    assert np.allclose(sorted(vals), sorted(-v for v in vals))
