import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempomix import CylinderFunction, SymbolicSystem, TwoSidedPoint, lipschitz_seminorm, metric_distance
from tempomix.errors import NotAperiodic, ValidationError
from tempomix.shift import check_aperiodic, enumerate_words, random_point, word_count


def test_aperiodic_powers(full2, golden_shift, frozen):
    assert check_aperiodic(full2) == frozen["aperiodic"]["full"] == 1
    assert check_aperiodic(golden_shift) == frozen["aperiodic"]["golden"] == 2
    with pytest.raises(NotAperiodic):
        SymbolicSystem([[1, 0], [0, 1]])


def test_bad_lambda():
    with pytest.raises(ValidationError):
        SymbolicSystem([[1, 1], [1, 1]], lam=1.0)


def test_words(full2, golden_shift, frozen):
    assert enumerate_words(full2, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert enumerate_words(golden_shift, 2) == [(0, 0), (0, 1), (1, 0)]
    assert word_count(golden_shift, 5) == frozen["golden_words5"] == 13


@pytest.mark.parametrize("n", range(1, 8))
def test_words_project_by_prefix(golden_shift, n):
    longer = enumerate_words(golden_shift, n + 1)
    assert {w[:n] for w in longer} == set(enumerate_words(golden_shift, n))


def test_metric_examples(full2):
    x = TwoSidedPoint.periodic((0,))
    assert metric_distance(x, x, 0.5) == 0.0
    assert metric_distance(x, x.replaced({0: 1}), 0.5) == 1.0
    assert metric_distance(x, x.replaced({-3: 1}), 0.9) == pytest.approx(0.729, abs=1e-15)
    assert metric_distance(x, x.replaced({3: 1, -5: 1}), 0.9) == pytest.approx(0.729, abs=1e-15)


def test_lipschitz_examples(full2, golden_shift, frozen):
    assert lipschitz_seminorm(CylinderFunction.constant(full2, 3.0, depth=4)) == 0.0
    assert lipschitz_seminorm(CylinderFunction(full2, 1, [0.0, 1.0])) == 1.0
    ora = frozen["lipschitz_full3"]
    sys_ = SymbolicSystem.full_shift(2, lam=ora["lam"])
    assert lipschitz_seminorm(CylinderFunction(sys_, 3, ora["values"])) == pytest.approx(ora["seminorm"], rel=1e-12)
    ora = frozen["lipschitz_golden4"]
    sys_ = SymbolicSystem.golden_mean(lam=ora["lam"])
    assert lipschitz_seminorm(CylinderFunction(sys_, 4, ora["values"])) == pytest.approx(ora["seminorm"], rel=1e-12)


def test_depth_promotion_and_ops(golden_shift):
    f = CylinderFunction(golden_shift, 1, [1.0, 2.0])
    g = CylinderFunction(golden_shift, 2, [0.5, 0.25, 1.0])
    h = f + g
    assert h.depth == 2
    assert np.allclose(h.values, [1.5, 1.25, 3.0])
    assert f.promote(3).reduced().allclose(f)
    assert (f * 2 - f).allclose(f)


def test_json_roundtrip(golden_shift):
    f = CylinderFunction(golden_shift, 2, [0.5, 0.25 + 1j, 1.0])
    assert CylinderFunction.from_json(golden_shift, f.to_json()).allclose(f)
    assert SymbolicSystem.from_json(golden_shift.to_json()) == golden_shift


def test_point_shift_and_splice():
    x = TwoSidedPoint((1, 0, 1), (0, 1), (1,))
    assert [x.shifted(2)[i] for i in range(-5, 6)] == [x[i + 2] for i in range(-5, 6)]
    y = TwoSidedPoint((0, 0, 0), (1,), (0, 1))
    z = TwoSidedPoint.splice(x.replaced({0: 0}), y)
    assert all(z[i] == x[i] for i in range(-9, 0))
    assert all(z[i] == y[i] for i in range(0, 9))
    with pytest.raises(ValidationError):
        TwoSidedPoint((0, 1), (0,), (0,))


# ---------------------------------------------------------------- properties

def _points(seed, n=3, lam=0.5):
    rng = np.random.default_rng(seed)
    system = SymbolicSystem.golden_mean(lam)
    return system, [random_point(system, rng, m=int(rng.integers(0, 4))) for _ in range(n)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 0.95))
def test_metric_axioms(seed, lam):
    _, (x, y, z) = _points(seed)
    dxy = metric_distance(x, y, lam)
    assert dxy == metric_distance(y, x, lam)
    assert (dxy == 0) == x.same_as(y)
    assert metric_distance(x, z, lam) <= dxy + metric_distance(y, z, lam) + 1e-15


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 5))
def test_lipschitz_bounds_pairs(seed, depth):
    system, pts = _points(seed, n=6, lam=0.6)
    rng = np.random.default_rng(seed + 1)
    f = CylinderFunction(system, depth, rng.normal(size=word_count(system, depth)))
    lip = lipschitz_seminorm(f)
    for x in pts:
        for y in pts:
            d = metric_distance(x, y, system.lam)
            # one-sided functions only see the future, so d_lam bounds the difference
            assert abs(f(x) - f(y)) <= lip * d + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_lipschitz_homogeneous(seed):
    rng = np.random.default_rng(seed)
    system = SymbolicSystem.full_shift(2, 0.7)
    f = CylinderFunction(system, 3, rng.normal(size=8) + 1j * rng.normal(size=8))
    c = complex(rng.normal(), rng.normal())
    assert lipschitz_seminorm(f * c) == pytest.approx(abs(c) * lipschitz_seminorm(f), rel=1e-9)
