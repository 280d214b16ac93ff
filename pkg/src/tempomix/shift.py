"""Subshifts of finite type, admissible words, the metric and Lipschitz seminorms.

Symbols are ``0..N-1``.  A word of length ``n`` is a tuple of symbols; words of
a fixed length are always listed in lexicographic order, which coincides with
the numeric order of their base-``N`` codes.  Every matrix and coefficient
array in the package is indexed by that order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DepthMismatch, NotAperiodic, ValidationError

Word = tuple[int, ...]


@dataclass(frozen=True)
class SymbolicSystem:
    """Transition matrix plus the metric constant ``lam`` of d_lam."""

    transition: tuple[tuple[int, ...], ...]
    lam: float = 0.5

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.transition)
        object.__setattr__(self, "transition", rows)
        n = len(rows)
        if n < 2 or any(len(row) != n for row in rows):
            raise ValidationError("transition must be a square matrix with N >= 2")
        if any(v not in (0, 1) for row in rows for v in row):
            raise ValidationError("transition entries must be 0 or 1")
        if not 0.0 < float(self.lam) < 1.0:
            raise ValidationError(f"lambda must lie in (0, 1), got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))
        a = np.array(rows)
        if (a.sum(axis=1) == 0).any() or (a.sum(axis=0) == 0).any():
            raise ValidationError("every symbol needs an incoming and an outgoing transition")
        check_aperiodic(self)

    @property
    def n_symbols(self) -> int:
        return len(self.transition)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.transition, dtype=np.int64)

    def allowed(self, a: int, b: int) -> bool:
        return self.transition[a][b] == 1

    def is_admissible(self, word: Sequence[int]) -> bool:
        return all(self.transition[a][b] for a, b in zip(word, word[1:]))

    @classmethod
    def full_shift(cls, n_symbols: int = 2, lam: float = 0.5) -> "SymbolicSystem":
        return cls(tuple((1,) * n_symbols for _ in range(n_symbols)), lam)

    @classmethod
    def golden_mean(cls, lam: float = 0.5) -> "SymbolicSystem":
        return cls(((1, 1), (1, 0)), lam)

    def to_json(self) -> dict:
        return {"alphabet_size": self.n_symbols,
                "transition": [list(r) for r in self.transition],
                "lambda": self.lam}

    @classmethod
    def from_json(cls, doc: Mapping | str) -> "SymbolicSystem":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            n = int(doc["alphabet_size"])
            system = cls(tuple(tuple(r) for r in doc["transition"]), float(doc["lambda"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed system document: {exc}") from exc
        if system.n_symbols != n:
            raise ValidationError("alphabet_size disagrees with the transition matrix")
        return system


def check_aperiodic(system: SymbolicSystem) -> int:
    """Least m <= N^2 with A^m entrywise positive."""
    a = (system.matrix > 0).astype(np.int64)
    power = a.copy()
    for m in range(1, system.n_symbols ** 2 + 1):
        if (power > 0).all():
            return m
        power = ((power @ a) > 0).astype(np.int64)
    raise NotAperiodic("no power of the transition matrix up to N^2 is positive")


# ---------------------------------------------------------------- words

@lru_cache(maxsize=256)
def _word_table(system: SymbolicSystem, n: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 1:
        raise ValueError("word length must be >= 1")
    big_n = system.n_symbols
    a = system.matrix
    words = np.arange(big_n, dtype=np.int64)[:, None]
    for _ in range(n - 1):
        last = words[:, -1]
        rows, syms = np.nonzero(a[last])
        # np.nonzero walks row-major, so parents stay in order and children are sorted
        words = np.concatenate([words[rows], syms[:, None]], axis=1)
    codes = words @ (big_n ** np.arange(n - 1, -1, -1, dtype=np.int64))
    words.setflags(write=False)
    codes.setflags(write=False)
    return words, codes


def word_array(system: SymbolicSystem, n: int) -> np.ndarray:
    """Admissible length-n words as an (M, n) integer array, lexicographic."""
    return _word_table(system, n)[0]


def word_codes(system: SymbolicSystem, n: int) -> np.ndarray:
    return _word_table(system, n)[1]


def enumerate_words(system: SymbolicSystem, n: int) -> list[Word]:
    return [tuple(int(s) for s in row) for row in word_array(system, n)]


def word_count(system: SymbolicSystem, n: int) -> int:
    return len(word_codes(system, n))


def encode(words: np.ndarray, n_symbols: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.int64)
    n = words.shape[-1]
    return words @ (n_symbols ** np.arange(n - 1, -1, -1, dtype=np.int64))


def word_index(system: SymbolicSystem, words) -> np.ndarray:
    """Row indices of ``words`` (shape (..., n)) in the depth-n table."""
    words = np.asarray(words, dtype=np.int64)
    n = words.shape[-1]
    codes = word_codes(system, n)
    c = encode(words, system.n_symbols)
    idx = np.searchsorted(codes, c)
    idx = np.minimum(idx, len(codes) - 1)
    if not np.array_equal(codes[idx], c):
        raise ValidationError("inadmissible word in lookup")
    return idx


def parse_word(text: str | Sequence[int]) -> Word:
    if isinstance(text, str):
        text = text.strip()
        if "," in text or " " in text:
            return tuple(int(t) for t in text.replace(",", " ").split())
        return tuple(int(ch) for ch in text)
    return tuple(int(s) for s in text)


def format_word(word: Sequence[int], n_symbols: int = 2) -> str:
    if n_symbols <= 10:
        return "".join(str(int(s)) for s in word)
    return ",".join(str(int(s)) for s in word)


# ---------------------------------------------------------------- Lipschitz seminorm

def _diameter(z: np.ndarray) -> float:
    if z.size < 2:
        return 0.0
    if not np.iscomplexobj(z):
        return float(z.max() - z.min())
    if z.size > 128:
        # the farthest pair lies on the convex hull
        try:
            z = z[ConvexHull(np.column_stack([z.real, z.imag])).vertices]
        except QhullError:
            pass
    best = 0.0
    for start in range(0, z.size, 512):
        block = np.abs(z[start:start + 512, None] - z[None, :])
        best = max(best, float(block.max()))
    return best


def _group_diameters(values: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Diameter of ``values`` within each run of equal (sorted) ``keys``."""
    cuts = np.flatnonzero(np.diff(keys)) + 1
    starts = np.concatenate([[0], cuts])
    stops = np.concatenate([cuts, [len(keys)]])
    sizes = stops - starts
    if np.all(sizes == sizes[0]):
        block = values.reshape(len(starts), sizes[0])
        if not np.iscomplexobj(block):
            return block.max(axis=1) - block.min(axis=1)
        if sizes[0] <= 256:
            return np.abs(block[:, :, None] - block[:, None, :]).max(axis=(1, 2))
    return np.array([_diameter(values[s:e]) for s, e in zip(starts, stops)])


def lipschitz_of_values(system: SymbolicSystem, depth: int, values: np.ndarray) -> float:
    """|h|_Lip for the depth-n function with coefficient array ``values``.

    Pairs first differing at index k are weighted by lam^-k.  Grouping words by
    their length-k prefix and taking the group diameter gives the same maximum,
    since pairs with a longer common prefix reappear at a heavier weight.
    """
    values = np.asarray(values)
    if values.ndim == 2:
        return max(lipschitz_of_values(system, depth, v) for v in values)
    codes = word_codes(system, depth)
    big_n = system.n_symbols
    best = 0.0
    for k in range(depth):
        keys = codes // big_n ** (depth - k)
        diam = _group_diameters(values, keys).max()
        best = max(best, float(diam) * system.lam ** (-k))
    return best


def lipschitz_seminorm(h: "CylinderFunction", side: str = "one-sided") -> float:
    """Exact Lipschitz seminorm of a locally constant function.

    A function of x_0..x_{n-1} has the same seminorm on the two-sided space:
    the worst pair can always be taken to agree on all negative indices.
    """
    if side not in ("one-sided", "two-sided"):
        raise ValueError("side must be 'one-sided' or 'two-sided'")
    return lipschitz_of_values(h.system, h.depth, h.values)


# ---------------------------------------------------------------- cylinder functions

class CylinderFunction:
    """Locally constant function given by one value per admissible depth-n word."""

    __slots__ = ("system", "depth", "values")

    def __init__(self, system: SymbolicSystem, depth: int, values):
        values = np.array(values)
        if values.dtype.kind not in "fc":
            values = values.astype(float)
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if values.shape != (word_count(system, depth),):
            raise DepthMismatch(
                f"expected {word_count(system, depth)} values for depth {depth}, got {values.shape}")
        values.setflags(write=False)
        self.system = system
        self.depth = int(depth)
        self.values = values

    # construction
    @classmethod
    def constant(cls, system: SymbolicSystem, value, depth: int = 1) -> "CylinderFunction":
        return cls(system, depth, np.full(word_count(system, depth), value))

    @classmethod
    def from_callable(cls, system: SymbolicSystem, depth: int,
                      fn: Callable[[Word], complex]) -> "CylinderFunction":
        return cls(system, depth, [fn(w) for w in enumerate_words(system, depth)])

    @classmethod
    def from_mapping(cls, system: SymbolicSystem, depth: int, mapping: Mapping) -> "CylinderFunction":
        wanted = enumerate_words(system, depth)
        given = {}
        for key, val in mapping.items():
            word = parse_word(key)
            if len(word) != depth:
                raise ValidationError(f"word {key!r} does not have length {depth}")
            given[word] = val
        missing = [w for w in wanted if w not in given]
        extra = set(given) - set(wanted)
        if missing:
            raise ValidationError(
                f"missing values for admissible words: {[format_word(w, system.n_symbols) for w in missing[:5]]}")
        if extra:
            raise ValidationError(
                f"values given for inadmissible words: {[format_word(w, system.n_symbols) for w in sorted(extra)[:5]]}")
        return cls(system, depth, [_as_number(given[w]) for w in wanted])

    @classmethod
    def from_json(cls, system: SymbolicSystem, doc: Mapping | str) -> "CylinderFunction":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            return cls.from_mapping(system, int(doc["depth"]), doc["values"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed cylinder-function document: {exc}") from exc

    def to_mapping(self) -> dict[str, object]:
        out = {}
        for w, v in zip(enumerate_words(self.system, self.depth), self.values):
            key = format_word(w, self.system.n_symbols)
            out[key] = [float(v.real), float(v.imag)] if np.iscomplexobj(self.values) else float(v)
        return out

    def to_json(self) -> dict:
        return {"depth": self.depth, "values": self.to_mapping()}

    # depth handling
    def promote(self, depth: int) -> "CylinderFunction":
        if depth < self.depth:
            raise DepthMismatch(f"cannot lower depth {self.depth} to {depth} by promotion")
        if depth == self.depth:
            return self
        return CylinderFunction(self.system, depth, self.evaluate(word_array(self.system, depth)))

    def reduced(self, rtol: float = 1e-12) -> "CylinderFunction":
        """Smallest-depth representation, averaging values that agree within rtol."""
        scale = max(float(np.abs(self.values).max()), 1.0)
        codes = word_codes(self.system, self.depth)
        for k in range(1, self.depth):
            keys = codes // self.system.n_symbols ** (self.depth - k)
            if _group_diameters(self.values, keys).max() <= rtol * scale:
                idx = word_index(self.system, word_array(self.system, self.depth)[:, :k])
                sums = np.zeros(word_count(self.system, k), dtype=self.values.dtype)
                counts = np.bincount(idx, minlength=len(sums))
                np.add.at(sums, idx, self.values)
                return CylinderFunction(self.system, k, sums / counts)
        return self

    # evaluation
    def evaluate(self, words) -> np.ndarray:
        """Values on an array of words of length >= depth (leading symbols are read)."""
        words = np.asarray(words, dtype=np.int64)
        if words.shape[-1] < self.depth:
            raise DepthMismatch("words shorter than the function depth")
        return self.values[word_index(self.system, words[..., :self.depth])]

    def __call__(self, x) -> complex | float:
        if isinstance(x, TwoSidedPoint):
            word = x.segment(0, self.depth)
        else:
            word = tuple(x)[:self.depth]
        return self.values[int(word_index(self.system, np.array(word)))].item()

    # norms
    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def lipschitz(self) -> float:
        return lipschitz_of_values(self.system, self.depth, self.values)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(np.all(self.values.imag == 0))

    @property
    def min(self) -> float:
        return float(np.min(self.values.real))

    @property
    def max(self) -> float:
        return float(np.max(self.values.real))

    def real(self) -> "CylinderFunction":
        return CylinderFunction(self.system, self.depth, self.values.real.copy())

    def map(self, fn) -> "CylinderFunction":
        return CylinderFunction(self.system, self.depth, fn(self.values))

    def shift_compose(self) -> "CylinderFunction":
        """h o sigma, a function of depth n+1."""
        words = word_array(self.system, self.depth + 1)
        return CylinderFunction(self.system, self.depth + 1, self.evaluate(words[:, 1:]))

    # arithmetic
    def _binary(self, other, op):
        if isinstance(other, CylinderFunction):
            if other.system != self.system:
                raise ValidationError("functions live on different systems")
            depth = max(self.depth, other.depth)
            return CylinderFunction(self.system, depth,
                                    op(self.promote(depth).values, other.promote(depth).values))
        return CylinderFunction(self.system, self.depth, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return CylinderFunction(self.system, self.depth, -self.values)

    def allclose(self, other: "CylinderFunction", atol: float = 1e-12) -> bool:
        depth = max(self.depth, other.depth)
        return bool(np.allclose(self.promote(depth).values, other.promote(depth).values,
                                rtol=0, atol=atol))

    def __repr__(self):
        return f"CylinderFunction(depth={self.depth}, values={self.values!r})"


def _as_number(v):
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    return float(v)


# ---------------------------------------------------------------- two-sided points

def _primitive(word: tuple[int, ...]) -> tuple[int, ...]:
    p = len(word)
    for d in range(1, p + 1):
        if p % d == 0 and word == word[:d] * (p // d):
            return word[:d]
    return word


def _cycle(word: tuple[int, ...], offset: int, n: int) -> tuple[int, ...]:
    """n symbols of word^infinity starting at position ``offset``."""
    return (word * ((offset + n) // len(word) + 1))[offset:offset + n]


@dataclass(frozen=True)
class TwoSidedPoint:
    """Bi-infinite sequence: periodic left tail, window x_{-m..m}, periodic right tail.

    The sequence reads ``... L L window R R ...``: the last symbol of
    ``left_tail`` sits at index -m-1, the first of ``right_tail`` at m+1.
    """

    window: tuple[int, ...]
    left_tail: tuple[int, ...]
    right_tail: tuple[int, ...]
    _m: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        window = tuple(int(s) for s in self.window)
        if len(window) % 2 != 1:
            raise ValidationError("window must have odd length (indices -m..m)")
        if not self.left_tail or not self.right_tail:
            raise ValidationError("tails must be nonempty")
        left = tuple(int(s) for s in self.left_tail)
        right = tuple(int(s) for s in self.right_tail)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "left_tail", _primitive(left))
        object.__setattr__(self, "right_tail", _primitive(right))
        object.__setattr__(self, "_m", (len(window) - 1) // 2)

    @property
    def m(self) -> int:
        return self._m

    def __getitem__(self, i: int) -> int:
        m = self._m
        if -m <= i <= m:
            return self.window[i + m]
        if i > m:
            return self.right_tail[(i - m - 1) % len(self.right_tail)]
        return self.left_tail[(i + m) % len(self.left_tail)]

    def segment(self, start: int, length: int) -> Word:
        m, stop = self._m, start + length
        if -m <= start and stop - 1 <= m:
            return self.window[start + m:stop + m]
        out = ()
        if start < -m:
            n = min(stop, -m) - start
            out += _cycle(self.left_tail, (start + m) % len(self.left_tail), n)
        lo, hi = max(start, -m), min(stop, m + 1)
        if lo < hi:
            out += self.window[lo + m:hi + m]
        if stop > m + 1:
            first = max(start, m + 1)
            out += _cycle(self.right_tail, (first - m - 1) % len(self.right_tail), stop - first)
        return out

    def future(self, n: int) -> Word:
        return self.segment(0, n)

    def _left_tail_for(self, m_new: int) -> tuple[int, ...]:
        p = len(self.left_tail)
        return tuple(self[-m_new - p + j] for j in range(p))

    def _right_tail_for(self, m_new: int) -> tuple[int, ...]:
        q = len(self.right_tail)
        return tuple(self[m_new + 1 + j] for j in range(q))

    def widened(self, m_new: int) -> "TwoSidedPoint":
        if m_new < self.m:
            raise ValueError("cannot narrow a window by widening")
        return TwoSidedPoint(self.segment(-m_new, 2 * m_new + 1),
                             self._left_tail_for(m_new), self._right_tail_for(m_new))

    def compact(self) -> "TwoSidedPoint":
        """Shrink the window while the outer symbols already follow the tails."""
        x = self
        while x.m > 0:
            m = x.m - 1
            cand = TwoSidedPoint(x.segment(-m, 2 * m + 1), x._left_tail_for(m), x._right_tail_for(m))
            if not cand.same_as(x):
                break
            x = cand
        return x

    def shifted(self, k: int = 1) -> "TwoSidedPoint":
        """sigma^k x, i.e. (sigma^k x)_i = x_{i+k}."""
        m_new = self.m + abs(k)
        p, q = len(self.left_tail), len(self.right_tail)
        window = tuple(self[i + k] for i in range(-m_new, m_new + 1))
        left = tuple(self[-m_new - p + j + k] for j in range(p))
        right = tuple(self[m_new + 1 + j + k] for j in range(q))
        return TwoSidedPoint(window, left, right).compact()

    def replaced(self, assignments: Mapping[int, int]) -> "TwoSidedPoint":
        reach = max([abs(i) for i in assignments] + [self.m])
        x = self.widened(reach)
        window = list(x.window)
        for i, s in assignments.items():
            window[i + reach] = int(s)
        return TwoSidedPoint(tuple(window), x.left_tail, x.right_tail)

    @classmethod
    def periodic(cls, word: Sequence[int]) -> "TwoSidedPoint":
        """The periodic point word^infinity with x_0 = word[0]."""
        word = tuple(int(s) for s in word)
        p = len(word)
        return cls((word[0],), word, tuple(word[(j + 1) % p] for j in range(p)))

    @classmethod
    def splice(cls, past: "TwoSidedPoint", future: "TwoSidedPoint") -> "TwoSidedPoint":
        """Point equal to ``past`` at indices <= 0 and ``future`` at indices >= 0."""
        if past[0] != future[0]:
            raise ValidationError("splice needs matching symbols at index 0")
        m = max(past.m, future.m)
        window = tuple(past[i] for i in range(-m, 1)) + tuple(future[i] for i in range(1, m + 1))
        return cls(window, past._left_tail_for(m), future._right_tail_for(m))

    def agreement_span(self, other: "TwoSidedPoint") -> int:
        """Index radius beyond which both sequences are purely periodic, plus one period."""
        periods = (len(self.left_tail), len(other.left_tail),
                   len(self.right_tail), len(other.right_tail))
        return max(self.m, other.m) + math.lcm(*periods)

    def same_as(self, other: "TwoSidedPoint") -> bool:
        span = self.agreement_span(other)
        return all(self[i] == other[i] for i in range(-span, span + 1))

    def is_admissible(self, system: SymbolicSystem) -> bool:
        span = self.m + 2 * max(len(self.left_tail), len(self.right_tail)) + 1
        return system.is_admissible(self.segment(-span, 2 * span + 1))

    def to_json(self) -> dict:
        return {"window": list(self.window), "left_tail": list(self.left_tail),
                "right_tail": list(self.right_tail)}

    @classmethod
    def from_json(cls, doc: Mapping) -> "TwoSidedPoint":
        return cls(tuple(doc["window"]), tuple(doc["left_tail"]), tuple(doc["right_tail"]))


def metric_distance(x: TwoSidedPoint, y: TwoSidedPoint, lam: float) -> float:
    """d_lam(x, y) = lam^N with N the smallest |i| where the sequences differ."""
    span = x.agreement_span(y)
    for k in range(span + 1):
        if x[k] != y[k] or x[-k] != y[-k]:
            return lam ** k
    return 0.0


def default_base_point(system: SymbolicSystem) -> TwoSidedPoint:
    """A canonical periodic point: the least fixed point, else the shortest least cycle."""
    big_n = system.n_symbols
    for a in range(big_n):
        if system.allowed(a, a):
            return TwoSidedPoint.periodic((a,))
    for length in range(2, big_n + 1):
        for w in enumerate_words(system, length):
            if system.allowed(w[-1], w[0]):
                return TwoSidedPoint.periodic(w)
    raise NotAperiodic("system has no periodic point")


def random_point(system: SymbolicSystem, rng: np.random.Generator, m: int = 4,
                 max_period: int = 3) -> TwoSidedPoint:
    """Random admissible point with window radius m and short periodic tails."""
    cycles = [w for p in range(1, max_period + 1) for w in enumerate_words(system, p)
              if system.allowed(w[-1], w[0])]
    for _ in range(1000):
        left = cycles[rng.integers(len(cycles))]
        right = cycles[rng.integers(len(cycles))]
        window = [left[-1]]
        for _i in range(2 * m + 1):
            nxt = np.flatnonzero(system.matrix[window[-1]])
            window.append(int(rng.choice(nxt)))
        window = window[1:]
        x = TwoSidedPoint(tuple(window), left, right)
        if x.is_admissible(system):
            return x
    raise RuntimeError("failed to sample an admissible point")


def iter_fillers(system: SymbolicSystem, length: int, before: int | None,
                 after: int | None) -> Iterable[Word]:
    """Admissible words of ``length`` that may sit between symbols before/after."""
    for w in enumerate_words(system, length):
        if before is not None and not system.allowed(before, w[0]):
            continue
        if after is not None and not system.allowed(w[-1], after):
            continue
        yield w
