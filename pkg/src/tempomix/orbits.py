"""Topological entropy, prime closed orbits and the prime orbit counting error."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from ._parallel import parallel_map
from .errors import BoundViolated, DomainError, LatticeRoof, ValidationError
from .shift import SymbolicSystem
from .suspension import RoofFunction, temporal_range
from .thermo import pressure

BISECTION_TOL = 1e-12


def topological_entropy(system: SymbolicSystem, r) -> float:
    """Root h of s -> P(-s r), by bisection to 1e-12."""
    r = RoofFunction.of(r)
    p0 = pressure(system, r * 0.0)
    if p0 <= 0:
        return 0.0

    def f(s):
        return pressure(system, r * (-s))

    # P(-s r) <= P(0) - s r_min, so the root lies in [0, 2 P(0) / r_min]
    lo, hi = 0.0, 2.0 * p0 / r.r_min
    if not (f(lo) > 0 > f(hi)):
        raise BoundViolated("pressure is not strictly decreasing along -s r")
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- orbit enumeration

@dataclass(frozen=True, order=True)
class OrbitRecord:
    """Prime periodic orbit: least rotation of a primitive word, symbolic period n, flow period."""

    n: int
    word: tuple[int, ...]
    period: float


def orbit_period(word: Sequence[int], r) -> float:
    """Sum of the roof over the n cyclic windows of ``word``; correctly rounded."""
    n, d = len(word), r.depth
    ext = tuple(word) * (1 + (d - 1) // n + 1)
    return math.fsum(float(r(ext[i:i + d])) for i in range(n))


def _walk(system, r, T, prefix, p, partial_sum, out, frontier, split):
    """FKM recursion: prefix is a prenecklace whose longest Lyndon prefix has length p."""
    length = len(prefix)
    d = r.depth
    a = system.matrix
    if length and p == length and a[prefix[-1], prefix[0]]:
        per = orbit_period(prefix, r)
        if per <= T:
            out.append(OrbitRecord(length, prefix, per))
    if split is not None and length == split:
        frontier.append((prefix, p, partial_sum))
        return
    if length * r.r_min >= T and length:
        return
    lo = prefix[length - p] if length else 0
    for j in range(lo, system.n_symbols):
        if length and not a[prefix[-1], j]:
            continue
        nxt = prefix + (j,)
        s = partial_sum
        if len(nxt) >= d:
            s = partial_sum + float(r(nxt[-d:]))
        # windows not yet complete in the prefix each add at least r_min
        if s + min(len(nxt), d - 1) * r.r_min > T + 1e-9:
            continue
        _walk(system, r, T, nxt, p if length and j == prefix[length - p] else length + 1, s,
              out, frontier, split)


def _subtree(state, system, r, T):
    out = []
    _walk(system, r, T, state[0], state[1], state[2], out, [], None)
    # the frontier word itself was already collected by the parent walk
    return [rec for rec in out if rec.n > len(state[0])]


def enumerate_prime_orbits(system: SymbolicSystem, r, T: float, threads: int | None = 1,
                           split: int = 8) -> list[OrbitRecord]:
    """All prime closed orbits with period <= T, sorted by (n, word).

    Branch and bound over the prenecklace tree: a prefix whose complete roof
    windows plus r_min per missing window exceed T cannot extend to an orbit.
    Subtrees below depth ``split`` run in parallel.
    """
    if T <= 0:
        raise ValidationError("T must be positive")
    r = RoofFunction.of(r)
    out: list[OrbitRecord] = []
    frontier: list = []
    _walk(system, r, T, (), 0, 0.0, out, frontier, split)
    for part in parallel_map(partial(_subtree, system=system, r=r, T=T), frontier, threads):
        out.extend(part)
    return sorted(out)


def necklace_count(system: SymbolicSystem, n: int) -> int:
    """(1/n) sum_{d | n} mu(d) trace(A^(n/d)): primitive admissible necklaces of length n."""
    a = np.array(system.matrix, dtype=object)
    total = 0
    for dd in range(1, n + 1):
        if n % dd:
            continue
        mu = _mobius(dd)
        if mu:
            power = np.identity(len(a), dtype=object)
            for _ in range(n // dd):
                power = power.dot(a)
            total += mu * int(np.trace(power))
    return total // n


def _mobius(n: int) -> int:
    result, k = 1, 2
    while k * k <= n:
        if n % k == 0:
            n //= k
            if n % k == 0:
                return 0
            result = -result
        k += 1
    return -result if n > 1 else result


# ---------------------------------------------------------------- counting

def li(x: float) -> float:
    """int_2^x du / log u."""
    if x < 2:
        raise DomainError("li is defined here for x >= 2")
    if x == 2:
        return 0.0
    val, _ = quad(lambda u: 1.0 / math.log(u), 2.0, x, epsabs=0.0, epsrel=1e-10, limit=500)
    return val


@dataclass(frozen=True)
class OrbitCensus:
    T: float
    count: int
    entropy: float
    li_value: float
    deviation: float
    scaled_deviation: float

    @property
    def ratio(self) -> float:
        return self.count / self.li_value


@dataclass(frozen=True)
class PotReport:
    censuses: tuple[OrbitCensus, ...]
    entropy: float
    C: float
    delta: float
    records: tuple[OrbitRecord, ...] = field(repr=False, default=())


def census(records: Sequence[OrbitRecord], T: float, h: float) -> OrbitCensus:
    count = sum(1 for rec in records if rec.period <= T)
    lv = li(math.exp(h * T))
    dev = abs(count - lv)
    return OrbitCensus(float(T), count, h, lv, dev, dev / (math.exp(h * T) / T))


def fit_error_exponent(censuses: Sequence[OrbitCensus]) -> tuple[float, float]:
    """(C, delta) with deviation ~ C e^{hT} / T^{1+delta}, least squares on the upper half of T."""
    pts = sorted(censuses, key=lambda c: c.T)
    upper = pts[len(pts) // 2:]
    if len(upper) < 2:
        raise ValidationError("need at least two grid points in the upper half")
    lt = np.log([c.T for c in upper])
    y = np.log([max(c.deviation, 1e-300) for c in upper]) - np.array([c.entropy * c.T for c in upper])
    slope = np.polyfit(lt, y, 1)[0]
    delta = -float(slope) - 1.0
    c = max(c.deviation * c.T ** (1 + delta) / math.exp(c.entropy * c.T) for c in upper)
    return float(c), delta


def pot_deviation(system: SymbolicSystem, r, T_grid: Sequence[float], threads: int | None = 1,
                  window: int | None = None) -> PotReport:
    """Per T: #pi(T), li(e^{hT}) and |#pi(T) - li(e^{hT})|; plus the fitted (C, delta)."""
    r = RoofFunction.of(r)
    table = temporal_range(system, r, window=window)
    if all(v == 0 for v in table.values):
        raise LatticeRoof("temporal range is {0}: the flow does not mix")
    h = topological_entropy(system, r)
    grid = sorted(float(t) for t in T_grid)
    records = enumerate_prime_orbits(system, r, grid[-1], threads)
    cens = tuple(census(records, T, h) for T in grid)
    c, delta = fit_error_exponent(cens) if len(cens) >= 4 else (math.nan, math.nan)
    return PotReport(cens, h, c, delta, tuple(records))
