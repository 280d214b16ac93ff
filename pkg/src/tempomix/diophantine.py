"""Continued fractions, Diophantine exponents and four-point lower bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BoundViolated, NoWitness, PreconditionUnmet, RationalTerminated, ValidationError
from .shift import CylinderFunction, SymbolicSystem, TwoSidedPoint
from .suspension import TemporalRange, temporal_range


def chord(x) -> np.ndarray | float:
    """|e^{ix} - 1| = 2|sin(x/2)|."""
    return np.abs(2.0 * np.sin(np.asarray(x, dtype=float) / 2.0))


# ---------------------------------------------------------------- continued fractions

def continued_fraction(theta, depth: int) -> list[int]:
    """First ``depth`` partial quotients [a0; a1, ...] of theta.

    Floats are expanded exactly (as the binary rational they store), so the
    quotients of an irrational are reliable for roughly 30 terms.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = Fraction(theta)
    quotients = []
    while len(quotients) < depth:
        a = math.floor(x)
        quotients.append(int(a))
        frac = x - a
        if frac == 0:
            if len(quotients) < depth:
                raise RationalTerminated(f"expansion of {theta} ends after {len(quotients)} terms",
                                         quotients)
            break
        x = 1 / frac
    return quotients


def convergents(quotients: Sequence[int]) -> list[tuple[int, int]]:
    p_prev, p = 1, quotients[0]
    q_prev, q = 0, 1
    out = [(p, q)]
    for a in quotients[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append((p, q))
    return out


# ---------------------------------------------------------------- exponent fit

@dataclass(frozen=True)
class DiophantineCertificate:
    """|q theta - p| >= C q^-gamma for every 1 <= q <= Q (checked, not assumed)."""

    theta: float
    partial_quotients: tuple[int, ...]
    C: float
    gamma: float
    Q: int
    worst_q: int
    records: tuple[tuple[int, float], ...] = field(repr=False, default=())

    def bound(self, q):
        return self.C * np.asarray(q, dtype=float) ** (-self.gamma)


def approximation_distances(theta: float, Q: int) -> np.ndarray:
    """min_p |q theta - p| for q = 1..Q."""
    q = np.arange(1, Q + 1, dtype=float)
    prod = q * float(theta)
    return np.abs(prod - np.rint(prod))


def diophantine_exponent(theta: float, Q: int = 10_000) -> DiophantineCertificate:
    """Fit (C, gamma) with |q theta - p| >= C q^-gamma over 1 <= q <= Q.

    gamma is the running maximum, over prefixes of the record minima of
    |q theta - p|, of the log-log regression slope (never below the Dirichlet
    exponent 1).  C is the running minimum of min_q dist_q q^gamma over the
    same prefixes.  Both are therefore monotone in Q, and the bound holds at
    every q <= Q by construction.
    """
    if Q < 2:
        raise ValidationError("Q must be >= 2")
    dist = approximation_distances(theta, Q)
    if np.any(dist == 0):
        q0 = int(np.flatnonzero(dist == 0)[0]) + 1
        raise RationalTerminated(f"theta is rational with denominator {q0} <= Q")
    running = np.minimum.accumulate(dist)
    is_record = np.concatenate([[True], dist[1:] < running[:-1]])
    rec_q = np.flatnonzero(is_record) + 1
    rec_d = dist[rec_q - 1]
    qs = np.arange(1, Q + 1, dtype=float)
    log_q, log_d = np.log(rec_q.astype(float)), np.log(rec_d)

    gamma, best_c, worst = 1.0, math.inf, 1
    # segment j covers Q' in [rec_q[j], rec_q[j+1]) and uses the records up to rec_q[j]
    for j in range(len(rec_q)):
        if j >= 2:
            slope = np.polyfit(log_q[:j + 1], log_d[:j + 1], 1)[0]
            gamma = max(gamma, -float(slope))
        end = int(rec_q[j + 1] - 1) if j + 1 < len(rec_q) else Q
        scaled = dist[:end] * qs[:end] ** gamma
        k = int(np.argmin(scaled))
        if scaled[k] < best_c:
            best_c, worst = float(scaled[k]), k + 1
    try:
        pq = continued_fraction(theta, 24)
    except RationalTerminated as exc:
        pq = exc.quotients
    return DiophantineCertificate(float(theta), tuple(pq), best_c, gamma, int(Q), worst,
                                  tuple(zip(rec_q.tolist(), rec_d.tolist())))


# ---------------------------------------------------------------- circle bound

def log_b_grid(b_min: float, b_max: float, per_decade: int = 64, n_points: int | None = None) -> np.ndarray:
    if n_points is None:
        n_points = max(2, int(round(per_decade * math.log10(b_max / b_min))) + 1)
    return np.geomspace(b_min, b_max, n_points)


@dataclass(frozen=True)
class CircleScan:
    b: np.ndarray
    value: np.ndarray
    bound: np.ndarray
    C5: float
    C6: float

    @property
    def slack(self) -> np.ndarray:
        return self.value - self.bound

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    def rows(self):
        for row in zip(self.b, self.value, self.bound, self.slack):
            yield tuple(float(v) for v in row)


def circle_pair_scan(alpha: float, beta: float, b_grid, C5: float | None = None,
                     C6: float | None = None, Q: int = 10_000, check: bool = True) -> CircleScan:
    """max(|e^{i b alpha} - 1|, |e^{i b beta} - 1|) against (C6/2) b^-C5 on a b-grid.

    Constants default to diophantine_exponent(alpha / beta, Q).
    """
    if alpha == 0 or beta == 0:
        raise ValidationError("alpha and beta must be nonzero")
    if C5 is None or C6 is None:
        cert = diophantine_exponent(alpha / beta, Q)
        C5 = cert.gamma if C5 is None else C5
        C6 = cert.C if C6 is None else C6
    b = np.abs(np.asarray(b_grid, dtype=float))
    c4 = 2 * math.pi / abs(beta)
    if np.any(b < c4 * (1 - 1e-12)):
        raise PreconditionUnmet(f"grid must satisfy |b| >= 2 pi / |beta| = {c4:.6g}")
    value = np.maximum(chord(b * alpha), chord(b * beta))
    bound = C6 / 2 * b ** (-C5)
    scan = CircleScan(b, value, bound, float(C5), float(C6))
    if check and np.any(scan.slack < 0):
        bad = float(b[int(np.argmin(scan.slack))])
        raise BoundViolated(f"circle bound fails at b = {bad}", at=bad)
    return scan


# ---------------------------------------------------------------- four-point witness

@dataclass(frozen=True)
class FourPointWitness:
    """Rectangle w0 -> w1 (unstable) -> w3 -> w2 (stable) -> w0 with a large phase chord.

    Here w1 shares w0's past, w2 shares w0's future, and w3 carries w2's past
    and w1's future; all of them agree with w0 outside |i| <= n0.  The loop
    sum Delta^u(w0,w1) + Delta^s(w1,w3) + Delta^u(w3,w2) + Delta^s(w2,w0)
    equals -H(w2, w1) in the temporal-distance convention.
    """

    w0: TwoSidedPoint
    w1: TwoSidedPoint
    w2: TwoSidedPoint
    w3: TwoSidedPoint
    b: float
    loop_sum: float
    value: float
    n0: int
    C2: float
    C3: float
    C4: float

    @property
    def bound(self) -> float:
        return self.C3 * abs(self.b) ** (-self.C2)

    def to_json(self) -> dict:
        return {"b": self.b, "value": self.value, "bound": self.bound, "loop_sum": self.loop_sum,
                "n0": self.n0, "C2": self.C2, "C3": self.C3, "C4": self.C4,
                "w0": self.w0.to_json(), "w1": self.w1.to_json(),
                "w2": self.w2.to_json(), "w3": self.w3.to_json()}


def range_pair(table: TemporalRange, targets: Sequence[float] | None = None) -> tuple[float, float]:
    """The two realized range values used as (alpha, beta)."""
    positive = [v for v in table.values if v > 0]
    if len(positive) < 2:
        raise NoWitness(f"temporal range {table.values} has fewer than two positive values")
    if targets:
        return tuple(min(positive, key=lambda v, t=abs(t): abs(v - t)) for t in targets[:2])
    return positive[0], positive[1]


def four_point_certificate(system: SymbolicSystem, r: CylinderFunction, b: float,
                           window: int | None = None, x0: TwoSidedPoint | None = None,
                           cert: DiophantineCertificate | None = None,
                           table: TemporalRange | None = None, Q: int = 10_000) -> FourPointWitness:
    """Rectangle within the window maximizing |e^{ibH} - 1|, checked against C3 |b|^-C2."""
    if table is None:
        table = temporal_range(system, r, x0, window)
    h = table.h_values
    if h.size == 0 or np.all(h == 0):
        raise NoWitness("temporal distance vanishes on every rectangle")
    targets = getattr(r, "meta", {}).get("targets") if hasattr(r, "meta") else None
    alpha, beta = range_pair(table, targets)
    if cert is None:
        cert = diophantine_exponent(alpha / beta, Q)
    c2, c3 = cert.gamma, cert.C / 2
    c4 = 2 * math.pi / min(abs(alpha), abs(beta))
    if abs(b) < c4:
        raise PreconditionUnmet(f"|b| must be at least 2 pi / min(alpha, beta) = {c4:.6g}")
    vals = chord(b * h)
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    value = float(vals[i, j])
    if value < c3 * abs(b) ** (-c2):
        raise NoWitness(f"best rectangle value {value} is below the bound at b = {b}")
    x0 = table.base_point
    w = table.window
    x1 = x0.replaced({-w + k: s for k, s in enumerate(table.left_fillers[i])})
    x2 = x0.replaced({1 + k: s for k, s in enumerate(table.right_fillers[j])})
    x3 = TwoSidedPoint.splice(x1, x2)
    return FourPointWitness(w0=x0, w1=x2, w2=x1, w3=x3, b=float(b), loop_sum=-float(h[i, j]),
                            value=value, n0=w, C2=c2, C3=c3, C4=c4)
