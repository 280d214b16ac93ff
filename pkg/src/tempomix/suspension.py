"""Suspension flows: Birkhoff sums, stable/unstable holonomy sums, temporal distance.

Holonomy sums are assembled as lists of signed roof values and added with
``math.fsum``.  Every rectangle sum is therefore the exactly rounded value of
the underlying real combination of stored roof values, so two rectangles that
reduce to the same combination give bitwise identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (InfeasibleTargets, NotStableEquivalent, NotUnstableEquivalent,
                     BoundViolated, ValidationError, WindowExhausted)
from .shift import (CylinderFunction, SymbolicSystem, TwoSidedPoint, Word,
                    default_base_point, enumerate_words, format_word, iter_fillers,
                    word_count, word_index)


class RoofFunction(CylinderFunction):
    """Strictly positive real cylinder function, optionally tagged with construction metadata."""

    __slots__ = ("meta",)

    def __init__(self, system: SymbolicSystem, depth: int, values, meta: dict | None = None):
        values = np.asarray(values)
        if np.iscomplexobj(values):
            if np.any(values.imag != 0):
                raise ValidationError("roof must be real-valued")
            values = values.real
        super().__init__(system, depth, values)
        if not np.all(self.values > 0):
            raise ValidationError(f"roof must be strictly positive (min {self.values.min()})")
        self.meta = dict(meta or {})

    @classmethod
    def of(cls, r: CylinderFunction, meta: dict | None = None) -> "RoofFunction":
        if isinstance(r, RoofFunction) and meta is None:
            return r
        return cls(r.system, r.depth, r.values, meta if meta is not None else getattr(r, "meta", None))

    @property
    def r_min(self) -> float:
        return float(self.values.min())

    @property
    def r_max(self) -> float:
        return float(self.values.max())

    @property
    def base_point(self) -> TwoSidedPoint | None:
        bp = self.meta.get("base_point")
        return TwoSidedPoint.from_json(bp) if bp else None

    def to_json(self) -> dict:
        doc = super().to_json()
        doc.update({k: v for k, v in self.meta.items()})
        return doc

    @classmethod
    def from_json(cls, system: SymbolicSystem, doc) -> "RoofFunction":
        base = CylinderFunction.from_json(system, doc)
        meta = {k: v for k, v in doc.items() if k not in ("depth", "values")}
        return cls(system, base.depth, base.values, meta)


class _Lookup:
    """Memoized word -> roof value."""

    def __init__(self, r: CylinderFunction):
        self.r = r
        self.cache: dict[Word, float] = {}

    def __call__(self, word: Word) -> float:
        v = self.cache.get(word)
        if v is None:
            v = float(self.r.values[int(word_index(self.r.system, np.array(word)))].real)
            self.cache[word] = v
        return v


def birkhoff_sum(r: CylinderFunction, x: TwoSidedPoint, n: int) -> float:
    """r_n(x) = sum_{i<n} r(sigma^i x)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0.0
    d = r.depth
    seq = np.array(x.segment(0, n + d - 1))
    windows = np.lib.stride_tricks.sliding_window_view(seq, d)
    return math.fsum(r.evaluate(windows).real.tolist())


# ---------------------------------------------------------------- holonomy sums

def _aligned(x: TwoSidedPoint, y: TwoSidedPoint):
    """Both sequences on -span..span, where span covers the windows plus one full tail period."""
    span = x.agreement_span(y)
    return span, max(x.m, y.m), x.segment(-span, 2 * span + 1), y.segment(-span, 2 * span + 1)


def _last_difference(x: TwoSidedPoint, y: TwoSidedPoint) -> int | None:
    """Largest index where x and y differ, None if equal; fails without a common future."""
    span, top, sx, sy = _aligned(x, y)
    if sx[span + top + 1:] != sy[span + top + 1:]:
        raise NotStableEquivalent("points have no common future")
    for i in range(top, -span - 1, -1):
        if sx[i + span] != sy[i + span]:
            return i
    return None


def _first_difference(x: TwoSidedPoint, y: TwoSidedPoint) -> int | None:
    """Smallest index where x and y differ, None if equal; fails without a common past."""
    span, top, sx, sy = _aligned(x, y)
    if sx[:span - top] != sy[:span - top]:
        raise NotUnstableEquivalent("points have no common past")
    for i in range(-top, span + 1):
        if sx[i + span] != sy[i + span]:
            return i
    return None


def delta_s_terms(x: TwoSidedPoint, y: TwoSidedPoint, depth: int) -> list[tuple[int, Word]]:
    """Signed words whose roof values sum to Delta^s(x, y) = sum_{n>=0} r(sigma^n y) - r(sigma^n x)."""
    last = _last_difference(x, y)
    if last is None or last < 0:
        return []
    terms = []
    for n in range(last + 1):
        terms.append((1, y.segment(n, depth)))
        terms.append((-1, x.segment(n, depth)))
    return terms


def delta_u_terms(x: TwoSidedPoint, y: TwoSidedPoint, depth: int) -> list[tuple[int, Word]]:
    """Signed words for Delta^u(x, y) = sum_{n>=1} r(sigma^-n x) - r(sigma^-n y)."""
    first = _first_difference(x, y)
    if first is None:
        return []
    terms = []
    for n in range(1, depth - first):
        terms.append((1, x.segment(-n, depth)))
        terms.append((-1, y.segment(-n, depth)))
    return terms


def _evaluate_terms(terms, lookup) -> float:
    return math.fsum(sign * lookup(word) for sign, word in terms)


def delta_s(x: TwoSidedPoint, y: TwoSidedPoint, r: CylinderFunction) -> float:
    return _evaluate_terms(delta_s_terms(x, y, r.depth), _Lookup(r))


def delta_u(x: TwoSidedPoint, y: TwoSidedPoint, r: CylinderFunction) -> float:
    return _evaluate_terms(delta_u_terms(x, y, r.depth), _Lookup(r))


@dataclass(frozen=True)
class DeltaUTruncation:
    exact: float
    partial: float
    bound: float
    n: int
    k: int

    @property
    def error(self) -> float:
        return abs(self.exact - self.partial)


def delta_u_truncation(x: TwoSidedPoint, y: TwoSidedPoint, r: CylinderFunction,
                       k: int) -> DeltaUTruncation:
    """Exact Delta^u, the k-term partial sum, and the bound |r|_Lip lam^(k-n) / (1 - lam).

    n is the least nonnegative integer with x_i = y_i for all i <= -n.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    lookup = _Lookup(r)
    exact = delta_u(x, y, r)
    first = _first_difference(x, y)
    n = 0 if first is None else max(0, 1 - first)
    d = r.depth
    partial = math.fsum(lookup(x.segment(-i, d)) - lookup(y.segment(-i, d)) for i in range(1, k + 1))
    lam = r.system.lam
    bound = r.lipschitz / (1 - lam) * lam ** (k - n)
    if abs(exact - partial) > bound * (1 + 1e-12) + 1e-13:
        raise BoundViolated(f"truncation error {abs(exact - partial)} exceeds {bound}", at=k)
    return DeltaUTruncation(exact, partial, bound, n, k)


def rectangle_terms(x0: TwoSidedPoint, x1: TwoSidedPoint, x2: TwoSidedPoint,
                    depth: int) -> list[tuple[int, Word]]:
    """Signed words of H(x1, x2) around the base point x0.

    H = Delta^s(x0, x1) + Delta^u(x1, x3) + Delta^s(x3, x2) + Delta^u(x2, x0),
    with x3 the point carrying x1's past and x2's future.
    """
    if x1[0] != x2[0]:
        raise ValidationError("local product undefined: x1 and x2 differ at index 0")
    x3 = TwoSidedPoint.splice(x1, x2)
    return (delta_s_terms(x0, x1, depth) + delta_u_terms(x1, x3, depth)
            + delta_s_terms(x3, x2, depth) + delta_u_terms(x2, x0, depth))


def temporal_distance(x1: TwoSidedPoint, x2: TwoSidedPoint, x0: TwoSidedPoint,
                      r: CylinderFunction) -> float:
    return _evaluate_terms(rectangle_terms(x0, x1, x2, r.depth), _Lookup(r))


# ---------------------------------------------------------------- temporal range

def default_window(r: CylinderFunction) -> int:
    return max(r.depth + 2, 6)


def local_rectangles(system: SymbolicSystem, x0: TwoSidedPoint, window: int):
    """Pairs (x1, x2) varying x0 on indices -W..-1 (x1) and 1..W (x2).

    Returns lists of fillers and the corresponding points.  x1 shares x0's
    future and x2 shares its past, so x1 lies in W^s(x0) and x2 in W^u(x0).
    """
    left = list(iter_fillers(system, window, x0[-window - 1], x0[0]))
    right = list(iter_fillers(system, window, x0[0], x0[window + 1]))
    x1s = [x0.replaced({-window + j: s for j, s in enumerate(f)}) for f in left]
    x2s = [x0.replaced({1 + j: s for j, s in enumerate(f)}) for f in right]
    return left, right, x1s, x2s


def _cluster_magnitudes(values: np.ndarray, atol: float) -> list[float]:
    mags = np.sort(np.abs(values))
    reps: list[float] = []
    for v in mags:
        if not reps or v - reps[-1] > atol:
            reps.append(float(v))
    return reps


@dataclass(frozen=True, eq=False)
class TemporalRange:
    """Finite set of temporal-distance values over a window of rectangles.

    Each rectangle is traversed in both orientations, so the set is closed
    under negation.  ``h_values[i, j]`` is H for left filler i and right filler j.
    """

    values: tuple[float, ...]
    window: int
    base_point: TwoSidedPoint
    left_fillers: list
    right_fillers: list
    h_values: np.ndarray = field(repr=False)

    def contains(self, v: float, atol: float = 1e-9) -> bool:
        return any(abs(v - u) <= atol for u in self.values)

    def matches(self, targets: Sequence[float], atol: float = 1e-9) -> bool:
        want = sorted({0.0} | {float(t) for t in targets} | {-float(t) for t in targets})
        merged = _cluster_magnitudes(np.array(want), atol)
        want = sorted({0.0} | set(merged) | {-v for v in merged})
        if len(want) != len(self.values):
            return False
        return all(abs(a - b) <= atol for a, b in zip(want, self.values))

    def rows(self, n_symbols: int = 2):
        for i, lf in enumerate(self.left_fillers):
            for j, rf in enumerate(self.right_fillers):
                yield format_word(lf, n_symbols), format_word(rf, n_symbols), float(self.h_values[i, j])


def temporal_range(system: SymbolicSystem, r: CylinderFunction, x0: TwoSidedPoint | None = None,
                   window: int | None = None, atol: float = 1e-12) -> TemporalRange:
    """All H(x1, x2) over rectangles whose windows vary within |i| <= W."""
    if x0 is None:
        x0 = getattr(r, "base_point", None) or default_base_point(system)
    window = window if window is not None else default_window(r)
    if window < r.depth:
        raise ValidationError("window must be at least the roof depth")
    left, right, x1s, x2s = local_rectangles(system, x0, window)
    lookup = _Lookup(r)
    h = np.zeros((len(x1s), len(x2s)))
    for i, x1 in enumerate(x1s):
        for j, x2 in enumerate(x2s):
            h[i, j] = _evaluate_terms(rectangle_terms(x0, x1, x2, r.depth), lookup)
    reps = _cluster_magnitudes(h.ravel(), atol) if h.size else []
    vals = {0.0} | {v for v in reps if v > atol} | {-v for v in reps if v > atol}
    return TemporalRange(tuple(sorted(vals)), window, x0, left, right, h)


def coefficient_matrix(system: SymbolicSystem, x0: TwoSidedPoint, window: int, depth: int):
    """Matrix M with H = M @ r for every depth-d roof r (rows follow local_rectangles order)."""
    left, right, x1s, x2s = local_rectangles(system, x0, window)
    m = np.zeros((len(x1s) * len(x2s), word_count(system, depth)))
    row = 0
    for x1 in x1s:
        for x2 in x2s:
            for sign, word in rectangle_terms(x0, x1, x2, depth):
                m[row, int(word_index(system, np.array(word)))] += sign
            row += 1
    return m, left, right


def construct_roof_with_range(system: SymbolicSystem, alpha: float, beta: float, depth: int = 6,
                              base: CylinderFunction | None = None,
                              x0: TwoSidedPoint | None = None) -> RoofFunction:
    """Roof whose temporal range over window W = depth is exactly {0, +-alpha, +-beta}.

    H is linear in the roof values, H = M r.  We look for two cylinders whose
    columns of M take values in {-1, 0, 1} on disjoint sets of rectangles; then
    r = base + alpha e_1 + beta e_2 solves M r = t for the target pattern
    t = alpha M e_1 + beta M e_2.  ``base`` must be invisible to H (for example
    any roof of depth <= 2); it defaults to the constant 1.
    """
    alpha, beta = float(alpha), float(beta)
    if not (math.isfinite(alpha) and math.isfinite(beta)) or alpha == 0 or beta == 0:
        raise ValidationError("alpha and beta must be finite and nonzero")
    if alpha == beta:
        raise ValidationError("alpha and beta must differ")
    x0 = x0 if x0 is not None else default_base_point(system)
    if base is None:
        base = CylinderFunction.constant(system, 1.0, depth)
    if base.depth > depth or not base.is_real:
        raise ValidationError("base roof must be real with depth <= the depth budget")
    base = base.promote(depth).real()
    m, _, _ = coefficient_matrix(system, x0, depth, depth)
    if np.abs(m @ base.values).max(initial=0.0) > 1e-9 * max(1.0, np.abs(base.values).max()):
        raise ValidationError("base roof contributes to the temporal range; use a depth <= 2 base")

    ternary = np.all(np.isin(m, (-1.0, 0.0, 1.0)), axis=0)
    support = m != 0
    cands = [j for j in range(m.shape[1]) if ternary[j] and support[:, j].any()]
    pick = None
    for a_pos, j1 in enumerate(cands):
        for j2 in cands[a_pos + 1:]:
            if not np.any(support[:, j1] & support[:, j2]):
                pick = (j1, j2)
                break
        if pick:
            break
    if pick is None:
        raise InfeasibleTargets(f"no pair of cylinder adjustments realizes the targets at depth {depth}")
    j1, j2 = pick
    correction = np.zeros(m.shape[1])
    correction[j1] += alpha
    correction[j2] += beta
    target = alpha * m[:, j1] + beta * m[:, j2]
    if np.abs(m @ correction - target).max() > 1e-12 * max(abs(alpha), abs(beta)):
        raise InfeasibleTargets("affine solve left a residual")
    values = base.values + correction
    floor = base.min if base.min > 0 else 1.0
    if values.min() < floor:
        values = values + (floor - values.min())
    words = enumerate_words(system, depth)
    meta = {"base_point": x0.to_json(), "targets": [alpha, beta], "window": depth,
            "adjusted_words": [format_word(words[j1], system.n_symbols),
                               format_word(words[j2], system.n_symbols)]}
    roof = RoofFunction(system, depth, values, meta)
    found = temporal_range(system, roof, x0, depth)
    if not found.matches([alpha, beta]):
        raise InfeasibleTargets(f"constructed roof has range {found.values}")
    return roof


# ---------------------------------------------------------------- flow

@dataclass(frozen=True)
class SuspensionPoint:
    base: TwoSidedPoint
    height: float


class _Neumaier:
    def __init__(self, value: float = 0.0):
        self.s = float(value)
        self.c = 0.0

    def add(self, v: float):
        t = self.s + v
        if abs(self.s) >= abs(v):
            self.c += (self.s - t) + v
        else:
            self.c += (v - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


def flow_evolve(p: SuspensionPoint, t: float, r: CylinderFunction,
                max_shifts: int = 1_000_000) -> SuspensionPoint:
    """phi_t(x, u) = (x, u + t) followed by the identifications (x, r(x)) ~ (sigma x, 0)."""
    lookup = _Lookup(r)
    x = p.base
    if not 0 <= p.height < lookup(x.segment(0, r.depth)):
        raise ValidationError("height must lie in [0, r(x))")
    acc = _Neumaier(p.height)
    acc.add(t)
    shifts = 0
    while acc.value >= lookup(x.segment(0, r.depth)):
        acc.add(-lookup(x.segment(0, r.depth)))
        x = x.shifted(1)
        shifts += 1
        if shifts > max_shifts:
            raise WindowExhausted(f"flow time {t} needs more than {max_shifts} shifts")
    while acc.value < 0:
        x = x.shifted(-1)
        acc.add(lookup(x.segment(0, r.depth)))
        shifts += 1
        if shifts > max_shifts:
            raise WindowExhausted(f"flow time {t} needs more than {max_shifts} shifts")
    return SuspensionPoint(x, acc.value)
