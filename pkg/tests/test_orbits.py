import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempomix import CylinderFunction, SymbolicSystem, enumerate_prime_orbits, li, pot_deviation, topological_entropy
from tempomix.errors import DomainError, LatticeRoof
from tempomix.orbits import necklace_count, orbit_period

GOLDEN = (1 + math.sqrt(5)) / 2


def test_entropy_examples(full2, golden_shift, golden_roof, frozen):
    assert topological_entropy(full2, CylinderFunction.constant(full2, 1.0)) == pytest.approx(math.log(2), abs=1e-11)
    assert topological_entropy(full2, CylinderFunction.constant(full2, 2.5)) == pytest.approx(math.log(2) / 2.5, abs=1e-11)
    assert topological_entropy(golden_shift, CylinderFunction.constant(golden_shift, 1.0)) == pytest.approx(
        frozen["golden_pressure"], abs=1e-11)
    assert topological_entropy(full2, golden_roof) == pytest.approx(frozen["orbits"]["golden_entropy"], abs=1e-10)


def test_small_orbit_counts(full2):
    one = CylinderFunction.constant(full2, 1.0)
    assert len(enumerate_prime_orbits(full2, one, 3)) == 5
    assert len(enumerate_prime_orbits(full2, one, 1)) == 2
    r = CylinderFunction(full2, 1, [0.7, 1.9])
    recs = enumerate_prime_orbits(full2, r, 2.0)
    fixed = [rec for rec in recs if rec.word == (0,)][0]
    assert fixed.period == pytest.approx(0.7)


@pytest.mark.parametrize("name", ["full", "golden"])
def test_necklace_identity(name, frozen):
    system = SymbolicSystem.full_shift(2) if name == "full" else SymbolicSystem.golden_mean()
    want = frozen["necklaces"][name]
    assert [necklace_count(system, n) for n in range(1, 21)] == want
    assert want[:12] == frozen["necklaces"][name + "_brute"]
    # enumeration with r = 1 reproduces the identity
    recs = enumerate_prime_orbits(system, CylinderFunction.constant(system, 1.0), 16)
    by_n = Counter(rec.n for rec in recs)
    assert [by_n[n] for n in range(1, 17)] == want[:16]


def test_counts_match_bruteforce(golden_roof, sqrt2_roof, full2, frozen):
    for roof, key in ((golden_roof, "golden_roof"), (sqrt2_roof, "sqrt2_roof")):
        recs = enumerate_prime_orbits(full2, roof, 16)
        for T, count in frozen["orbits"][key].items():
            assert sum(rec.period <= float(T) for rec in recs) == count


def test_threads_independent(full2, golden_roof):
    a = enumerate_prime_orbits(full2, golden_roof, 12, threads=1)
    b = enumerate_prime_orbits(full2, golden_roof, 12, threads=3, split=4)
    assert a == b


def test_li(frozen):
    assert li(2) == 0.0
    assert li(10) == pytest.approx(frozen["li"]["10"], rel=1e-10)
    assert li(10) == pytest.approx(frozen["li"]["10_series"], rel=1e-10)
    for x in ("100", "1000"):
        assert li(float(x)) == pytest.approx(frozen["li"][x], rel=1e-10)
    with pytest.raises(DomainError):
        li(1.5)
    vals = [li(math.exp(0.5 * T)) for T in range(2, 30)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_pot(full2, golden_roof):
    with pytest.raises(LatticeRoof):
        pot_deviation(full2, CylinderFunction.constant(full2, 1.0), [4, 6, 8, 10])
    rep = pot_deviation(full2, golden_roof, [8, 10, 12, 14, 16], window=6)
    ratios = [c.ratio for c in rep.censuses]
    assert all(0.8 <= x <= 1.2 for x in ratios)
    again = pot_deviation(full2, golden_roof, [8, 10, 12, 14, 16], window=6)
    assert [c.deviation for c in again.censuses] == [c.deviation for c in rep.censuses]


# ---------------------------------------------------------------- properties

@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.integers(1, 9))
def test_period_rotation_invariant(seed, n):
    system = SymbolicSystem.full_shift(2)
    rng = np.random.default_rng(seed)
    r = CylinderFunction(system, 3, rng.uniform(0.5, 2.0, 8))
    word = tuple(int(s) for s in rng.integers(0, 2, n))
    p = orbit_period(word, r)
    for k in range(n):
        assert orbit_period(word[k:] + word[:k], r) == pytest.approx(p, rel=1e-14)


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6), st.floats(3, 9))
def test_enumeration_complete(seed, T):
    """Every primitive necklace with period <= T is found exactly once, as its least rotation."""
    system = SymbolicSystem.golden_mean()
    rng = np.random.default_rng(seed)
    r = CylinderFunction(system, 2, rng.uniform(0.8, 2.0, 3))
    recs = enumerate_prime_orbits(system, r, T)
    words = {rec.word for rec in recs}
    assert len(words) == len(recs)
    n_max = int(T / r.min)
    expect = set()
    import itertools
    for n in range(1, n_max + 1):
        for w in itertools.product((0, 1), repeat=n):
            if not all(system.allowed(w[i], w[(i + 1) % n]) for i in range(n)):
                continue
            rots = {w[i:] + w[:i] for i in range(n)}
            if len(rots) < n or min(rots) != w:
                continue
            if orbit_period(w, r) <= T:
                expect.add(w)
    assert words == expect
