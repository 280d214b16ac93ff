"""Twisted transfer operators L_b = L_{phi' + i b r}: b-norms, Lasota-Yorke, contraction, cancellation.

phi' is always a normalized potential (L_{phi'} 1 = 1).  Everything is
computed on depth-n locally constant functions, where the operators and the
Lipschitz seminorm are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds

from .errors import BoundViolated, NoPair, NoWitness, PreconditionUnmet, ValidationError
from .shift import CylinderFunction, SymbolicSystem, TwoSidedPoint, lipschitz_of_values, word_array
from .thermo import GibbsData, TransferMatrix, build_transfer_matrix, leading_eigenvalues, rpf_data

LATTICE_TOL = 1e-10


def iteration_count(b: float, c13: float = 4.0) -> int:
    """n_b = ceil(C_13 log|b|)."""
    return max(1, math.ceil(c13 * math.log(abs(b))))


# ---------------------------------------------------------------- norms

@dataclass(frozen=True)
class BNormContext:
    """Parameters of ||h||_b = max(|h|_inf, |h|_Lip / (C_10 |b|))."""

    b: float
    c10: float
    lam_prime: float

    def __post_init__(self):
        if self.c10 < 1:
            raise ValidationError("C_10 must be >= 1")
        if not 0 < self.lam_prime < 1:
            raise ValidationError("lambda' must lie in (0, 1)")

    def satisfies(self, c11: float, lam: float) -> bool:
        """C_11 / C_10 + lam <= lam'."""
        return c11 / self.c10 + lam <= self.lam_prime + 1e-15

    def with_b(self, b: float) -> "BNormContext":
        return BNormContext(b, self.c10, self.lam_prime)


def b_norm_values(system: SymbolicSystem, depth: int, values: np.ndarray, ctx: BNormContext) -> float:
    sup = float(np.abs(values).max())
    return max(sup, lipschitz_of_values(system, depth, values) / (ctx.c10 * abs(ctx.b)))


def b_norm(h: CylinderFunction, ctx: BNormContext) -> float:
    return b_norm_values(h.system, h.depth, h.values, ctx)


def c11_bound(phi_p: CylinderFunction, r: CylinderFunction, b: float) -> float:
    """A C_11 valid for every h and n, from the distortion estimate of the Lasota-Yorke proof.

    Pairing preimages y = a.x, y' = a.x' gives
    |e^{g_n(y)} - e^{g_n(y')}| <= e^{phi'_n(y)} |z| e^{|Re z|} with
    |z| <= (|phi'|_Lip + |b| |r|_Lip) d lam / (1 - lam).  Points with different
    first symbols are at distance 1, where 2 |h|_inf always suffices.
    """
    lam = phi_p.system.lam
    kappa = lam / (1 - lam)
    lp, lr = phi_p.lipschitz, r.lipschitz
    paired = (lp / abs(b) + lr) * kappa * math.exp(lp * kappa)
    full = all(all(row) for row in phi_p.system.transition)
    return paired if full else max(paired, 2.0 / abs(b))


def make_context(phi_p: CylinderFunction, r: CylinderFunction, b: float,
                 lam_prime: float | None = None, c10: float | None = None,
                 c11: float | None = None) -> BNormContext:
    """Context with C_10 = max(1, C_11 / (lam' - lam)), lam' = (1 + lam) / 2 by default."""
    lam = phi_p.system.lam
    lam_prime = (1 + lam) / 2 if lam_prime is None else lam_prime
    if not lam < lam_prime < 1:
        raise ValidationError("lambda' must lie in (lambda, 1)")
    if c11 is None:
        c11 = c11_bound(phi_p, r, b)
    if c10 is None:
        c10 = max(1.0, c11 / (lam_prime - lam))
    return BNormContext(float(b), float(c10), float(lam_prime))


def twisted_operator(system: SymbolicSystem, phi_p: CylinderFunction, r: CylinderFunction,
                     b: float, depth: int) -> TransferMatrix:
    return build_transfer_matrix(system, phi_p, r, s=1j * b, depth=depth)


def twisted_spectral_radius(system, phi_p, r, b: float) -> float:
    """Spectral radius of L_b, computed at the smallest exact depth.

    Nonzero eigenvalues do not depend on the depth once it is at least
    max(depth phi', depth r) - 1, so the small matrix suffices.
    """
    depth = max(phi_p.depth, r.depth, 2) - 1
    L = twisted_operator(system, phi_p, r, b, depth)
    return float(abs(leading_eigenvalues(L.matrix, 1)[0]))


# ---------------------------------------------------------------- Lasota-Yorke

@dataclass(frozen=True)
class LasotaYorke:
    lhs: float
    rhs: float
    c11: float
    needed: float


def lasota_yorke_needed(system, phi_p, r, h: CylinderFunction, n: int, b: float,
                        depth: int | None = None) -> tuple[float, float, float, float]:
    """(lhs, sup h, Lip h, smallest C_11 for this instance)."""
    depth = depth if depth is not None else max(h.depth, phi_p.depth - 1, r.depth - 1, 1)
    L = twisted_operator(system, phi_p, r, b, depth)
    vals = h.promote(depth).values.astype(complex)
    out = L.power_apply(vals, n)
    lhs = lipschitz_of_values(system, depth, out)
    sup, lip = float(np.abs(vals).max()), lipschitz_of_values(system, depth, vals)
    excess = lhs - system.lam ** n * lip
    if excess <= 1e-12 * max(lhs, 1.0):
        needed = 0.0
    elif b == 0 or sup == 0:
        needed = math.inf
    else:
        needed = excess / (abs(b) * sup)
    return lhs, sup, lip, needed


def lasota_yorke_verify(system, phi_p, r, h: CylinderFunction, n: int, b: float,
                        c11: float | None = None) -> LasotaYorke:
    """|L_b^n h|_Lip <= C_11 |b| |h|_inf + lam^n |h|_Lip at matrix level.

    Without c11 the instance's own smallest constant is used (the bound then
    holds with equality or slack).
    """
    lhs, sup, lip, needed = lasota_yorke_needed(system, phi_p, r, h, n, b)
    c = needed if c11 is None else c11
    rhs = c * abs(b) * sup + system.lam ** n * lip if math.isfinite(c) else math.inf
    if lhs > rhs * (1 + 1e-12) + 1e-12:
        raise BoundViolated(f"Lasota-Yorke fails: {lhs} > {rhs}", at=(n, b))
    return LasotaYorke(lhs, rhs, c, needed)


def fit_lasota_yorke(system, phi_p, r, instances: Sequence[tuple[CylinderFunction, int, float]]):
    """Smallest C_11 making the inequality hold on every (h, n, b) instance."""
    needed = [lasota_yorke_needed(system, phi_p, r, h, n, b) for h, n, b in instances]
    c11 = max(nd[3] for nd in needed)
    records = []
    for (lhs, sup, lip, nd), (h, n, b) in zip(needed, instances):
        rhs = c11 * abs(b) * sup + system.lam ** n * lip
        records.append(LasotaYorke(lhs, rhs, c11, nd))
    return c11, records


# ---------------------------------------------------------------- contraction

@dataclass(frozen=True)
class ContractionRow:
    b: float
    n_b: int
    spectral_radius: float
    factor: float
    factor_random: float
    factor_singular: float
    factor_constant: float
    mu_U: float = float("nan")
    gap: float = float("nan")


def _norm_columns(system, depth, block, ctx):
    sup = np.abs(block).max(axis=0)
    lip = np.array([lipschitz_of_values(system, depth, block[:, k]) for k in range(block.shape[1])])
    return np.maximum(sup, lip / (ctx.c10 * abs(ctx.b)))


def _random_family(system, depth, n_funcs, rng):
    """Complex Gaussian functions of depths cycling through 1..depth, promoted to depth."""
    cols = []
    for k in range(n_funcs):
        d = 1 + k % depth
        vals = rng.standard_normal(len(word_array(system, d))) + 1j * rng.standard_normal(len(word_array(system, d)))
        cols.append(CylinderFunction(system, d, vals).promote(depth).values)
    return np.stack(cols, axis=1)


def singular_function(L: TransferMatrix, n: int) -> np.ndarray:
    """Leading right singular vector of L^n (largest L2 amplification)."""
    size = L.size
    mat, mat_h = L.matrix, L.matrix.conj().T.tocsr()

    def mv(v):
        for _ in range(n):
            v = mat @ v
        return v

    def rmv(v):
        for _ in range(n):
            v = mat_h @ v
        return v

    op = LinearOperator((size, size), matvec=mv, rmatvec=rmv, dtype=complex)
    if size <= 3:
        dense = mv(np.eye(size, dtype=complex))
        _, _, vh = np.linalg.svd(dense)
        return vh[0].conj()
    _, _, vh = svds(op, k=1, v0=np.ones(size, dtype=complex), random_state=0)
    return vh[0].conj()


def contraction_factor(system: SymbolicSystem, phi_p: CylinderFunction, r: CylinderFunction,
                       b: float, depth: int = 10, c13: float = 4.0, ctx: BNormContext | None = None,
                       n_random: int = 64, seed: int = 0) -> ContractionRow:
    """max ||L_b^{n_b} h||_b / ||h||_b over the test family, plus the spectral radius of L_b."""
    ctx = make_context(phi_p, r, b) if ctx is None else ctx.with_b(b)
    n_b = iteration_count(b, c13)
    L = twisted_operator(system, phi_p, r, b, depth)
    rng = np.random.default_rng(seed)
    fam = _random_family(system, depth, n_random, rng)
    before = _norm_columns(system, depth, fam, ctx)
    after = _norm_columns(system, depth, L.power_apply(fam, n_b), ctx)
    f_random = float((after / before).max())

    sing = singular_function(L, n_b)[:, None]
    f_sing = float(_norm_columns(system, depth, L.power_apply(sing, n_b), ctx)[0]
                   / _norm_columns(system, depth, sing, ctx)[0])
    one = np.ones((L.size, 1), dtype=complex)
    f_one = float(_norm_columns(system, depth, L.power_apply(one, n_b), ctx)[0])
    factor = max(f_random, f_sing, f_one)
    return ContractionRow(float(b), n_b, twisted_spectral_radius(system, phi_p, r, b),
                          factor, f_random, f_sing, f_one)


def fit_c9(rows: Sequence[ContractionRow]) -> float:
    """Smallest C_9 with factor <= 1 - b^-C_9 on every row (inf if some factor reaches 1)."""
    worst = 0.0
    for row in rows:
        if row.factor >= 1 - LATTICE_TOL:
            return math.inf
        worst = max(worst, -math.log(1 - row.factor) / math.log(row.b))
    return worst


def flat_case_contraction(system, phi_p, r, h: CylinderFunction, b: float, n: int,
                          ctx: BNormContext) -> float:
    """||L_b^n h||_b / ||h||_b for h with |h|_Lip >= 2 C_10 |b| |h|_inf; must not exceed lam'."""
    ctx = ctx.with_b(b)
    sup, lip = h.sup_norm, h.lipschitz
    if lip < 2 * ctx.c10 * abs(b) * sup * (1 - 1e-12):
        raise PreconditionUnmet("flat case needs |h|_Lip >= 2 C_10 |b| |h|_inf")
    depth = max(h.depth, phi_p.depth - 1, r.depth - 1)
    L = twisted_operator(system, phi_p, r, b, depth)
    vals = h.promote(depth).values.astype(complex)
    factor = b_norm_values(system, depth, L.power_apply(vals, n), ctx) / b_norm_values(system, depth, vals, ctx)
    if factor > ctx.lam_prime * (1 + 1e-12):
        raise BoundViolated(f"flat-case factor {factor} exceeds lambda' = {ctx.lam_prime}", at=b)
    return factor


# ---------------------------------------------------------------- cancellation

def cancellation_pair_bound(v1, v2):
    """Slack of |v1 + v2| <= (1 - eps^2/4)|v1| + |v2|, eps = |v1/|v1| - v2/|v2||, |v1| <= |v2|.

    Works elementwise on arrays; raises if any slack is negative.
    """
    v1, v2 = np.asarray(v1, dtype=complex), np.asarray(v2, dtype=complex)
    if np.any(v1 == 0) or np.any(v2 == 0):
        raise ValidationError("cancellation lemma needs nonzero vectors")
    swap = np.abs(v1) > np.abs(v2)
    small, big = np.where(swap, v2, v1), np.where(swap, v1, v2)
    eps = np.abs(small / np.abs(small) - big / np.abs(big))
    bound = (1 - eps ** 2 / 4) * np.abs(small) + np.abs(big)
    slack = bound - np.abs(small + big)
    if np.any(slack < 0):
        raise BoundViolated(f"cancellation inequality violated (min slack {slack.min()})")
    return slack if slack.ndim else float(slack)


@dataclass(frozen=True)
class CancellationPair:
    x: tuple[int, ...]
    y1: tuple[int, ...]
    y2: tuple[int, ...]
    gap: float
    n_b: int
    method: str


def _max_chord(angles: np.ndarray) -> tuple[float, int, int]:
    """Largest |e^{i a} - e^{i a'}| over pairs, via the nearest antipode in sorted order."""
    theta = np.mod(angles, 2 * np.pi)
    order = np.argsort(theta, kind="stable")
    srt = theta[order]
    target = np.mod(srt + np.pi, 2 * np.pi)
    pos = np.searchsorted(srt, target)
    best_sep, bi, bj = -1.0, 0, 0
    for shift in (-1, 0):
        cand = np.mod(pos + shift, len(srt))
        diff = np.abs(srt[cand] - srt)
        sep = np.minimum(diff, 2 * np.pi - diff)
        k = int(np.argmax(sep))
        if sep[k] > best_sep:
            best_sep, bi, bj = float(sep[k]), int(order[k]), int(order[cand[k]])
    return 2 * math.sin(best_sep / 2), bi, bj


def _phase(r: CylinderFunction, eta: CylinderFunction, y: Sequence[int], n: int, b: float) -> complex:
    d = r.depth
    total = math.fsum(float(r(tuple(y[i:i + d])).real) for i in range(n))
    return np.exp(1j * b * total) * complex(eta(tuple(y[:eta.depth])))


def pair_gap(r, eta, y1, y2, n, b) -> float:
    return float(abs(_phase(r, eta, y1, n, b) - _phase(r, eta, y2, n, b)))


def _exhaustive(system, r, eta, b, n, base_len):
    """Best pair among all preimages sigma^-n(x), for every admissible base word x."""
    d, m = r.depth, eta.depth
    keep = max(d - 1, m, 1)
    best = (-1.0, None)
    bases = word_array(system, base_len)
    for x in bases:
        words = x[None, :keep] if len(x) >= keep else None
        tail = np.array(x, dtype=np.int64)[None, :]
        sums = np.zeros(1)
        for _ in range(n):
            syms, parents = [], []
            for a in range(system.n_symbols):
                ok = np.flatnonzero(system.matrix[a, tail[:, 0]])
                syms.append(np.full(len(ok), a))
                parents.append(ok)
            syms, parents = np.concatenate(syms), np.concatenate(parents)
            head = tail[parents, :keep]
            new = np.concatenate([syms[:, None], head], axis=1)
            sums = sums[parents] + r.evaluate(new[:, :d]).real
            tail = new[:, :keep]
            words = (words, parents, syms)
        # rebuild full preimage words lazily only for the maximizing pair
        phase = b * sums + np.angle(eta.evaluate(tail[:, :m]))
        gap, i, j = _max_chord(phase)
        if gap > best[0]:
            best = (gap, (tuple(int(s) for s in x), words, i, j))
    return best


def _unwind(x, chain, idx):
    """Recover the preimage word for leaf ``idx`` from the (prev, parents, syms) chain."""
    syms_out = []
    node = chain
    while isinstance(node, tuple) and len(node) == 3:
        prev, parents, syms = node
        syms_out.append(int(syms[idx]))
        idx = int(parents[idx])
        node = prev
    return tuple(syms_out) + tuple(x)


def cancellation_search(system: SymbolicSystem, phi_p: CylinderFunction, r: CylinderFunction,
                        h: CylinderFunction, b: float, c13: float = 4.0,
                        ctx: BNormContext | None = None, witness=None,
                        exhaustive_limit: int = 1 << 22, n_samples: int = 1 << 15,
                        seed: int = 0) -> CancellationPair:
    """Base word x and preimages y1, y2 in sigma^{-n_b}(x) maximizing
    |e^{i b r_{n_b}(y1)} eta(y1) - e^{i b r_{n_b}(y2)} eta(y2)|, eta = h / |h|.

    Small n_b: exhaustive over all base words and preimages.  Otherwise the
    pairs shadowing a four-point witness, plus a seeded random sample of
    preimages of the witness base word.
    """
    sup = h.sup_norm
    if np.any(np.abs(h.values) < 0.75 * sup * (1 - 1e-12)):
        raise PreconditionUnmet("cancellation needs |h(x)| >= 3/4 |h|_inf everywhere")
    if ctx is not None and h.lipschitz > 2 * ctx.c10 * abs(b) * sup * (1 + 1e-12):
        raise PreconditionUnmet("cancellation needs |h|_Lip <= 2 C_10 |b| |h|_inf")
    eta = h / CylinderFunction(system, h.depth, np.abs(h.values))
    n = iteration_count(b, c13)
    base_len = max(r.depth - 1, eta.depth - n, 1)
    n_pre = len(word_array(system, base_len)) * system.n_symbols ** n
    if n_pre <= exhaustive_limit:
        gap, (x, chain, i, j) = _exhaustive(system, r, eta, b, n, base_len)
        y1, y2 = _unwind(x, chain, i), _unwind(x, chain, j)
        method = "exhaustive"
    else:
        y1, y2, x = _guided(system, r, eta, b, n, base_len, witness, n_samples, seed)
        method = "guided"
    gap = pair_gap(r, eta, y1, y2, n, b)
    if gap <= LATTICE_TOL:
        raise NoPair(f"all phases align at b = {b}")
    return CancellationPair(tuple(x), tuple(y1), tuple(y2), gap, n, method)


def _shadow(point: TwoSidedPoint, n: int, n0: int, length: int) -> tuple[int, ...]:
    """One-sided sequence starting at index n0 - n of ``point``."""
    return point.segment(n0 - n, length)


def _guided(system, r, eta, b, n, base_len, witness, n_samples, seed):
    length = n + base_len
    candidates = []
    if witness is not None:
        n0 = witness.n0
        for pa, pb in ((witness.w1, witness.w3), (witness.w0, witness.w2)):
            y1, y2 = _shadow(pa, n, n0, length), _shadow(pb, n, n0, length)
            if y1[n:] == y2[n:]:
                candidates.append((pair_gap(r, eta, y1, y2, n, b), y1, y2))
        x = _shadow(witness.w0, 0, n0, base_len)
    else:
        x = tuple(int(s) for s in word_array(system, base_len)[0])
    rng = np.random.default_rng(seed)
    pre = _random_preimages(system, x, n, n_samples, rng)
    if candidates:
        pre = np.concatenate([pre, np.array([c[1] for c in candidates] + [c[2] for c in candidates])])
    d = r.depth
    windows = np.lib.stride_tricks.sliding_window_view(pre, d, axis=1)[:, :n]
    sums = np.zeros(len(pre))
    vals = r.evaluate(windows).real
    for i in range(n):
        sums = sums + vals[:, i]
    phase = b * sums + np.angle(eta.evaluate(pre[:, :eta.depth]))
    gap, i, j = _max_chord(phase)
    best = (gap, tuple(int(s) for s in pre[i]), tuple(int(s) for s in pre[j]))
    for cand in candidates:
        if cand[0] > best[0]:
            best = cand
    return best[1], best[2], tuple(best[1][n:])


def _random_preimages(system, x, n, count, rng) -> np.ndarray:
    """Uniformly drawn admissible words a_1..a_n followed by x (backward random walk)."""
    a = system.matrix
    out = np.empty((count, n + len(x)), dtype=np.int64)
    out[:, n:] = np.array(x)
    nxt = np.full(count, x[0])
    for pos in range(n - 1, -1, -1):
        choices = [np.flatnonzero(a[:, s]) for s in range(system.n_symbols)]
        pick = np.empty(count, dtype=np.int64)
        for s in range(system.n_symbols):
            mask = nxt == s
            if mask.any():
                pick[mask] = rng.choice(choices[s], size=int(mask.sum()))
        out[:, pos] = pick
        nxt = pick
    return out


def fit_c18(b_values: Sequence[float], gaps: Sequence[float]) -> float:
    """Smallest C_18 with gap >= b^-C_18 on every sample."""
    return max(max(0.0, -math.log(g) / math.log(b)) for b, g in zip(b_values, gaps))


# ---------------------------------------------------------------- L1 to sup

@dataclass(frozen=True)
class L1SupReport:
    b: float
    n_b: int
    n_avg: int
    l1: float
    factor: float
    c16: float
    mu_U: float
    c12: float


def l1_to_sup_contraction(system, phi_p, r, h: CylinderFunction, b: float, c13: float = 4.0,
                          c17: float = 4.0, c14: float = 1.0, depth: int = 10,
                          gibbs: GibbsData | None = None) -> L1SupReport:
    """int |L_b^{n_b} h| dmu, then the averaged sup |L_{phi'}^{C_17 log b} |L_b^{n_b} h||_inf.

    Also reports mu(U) for U = {|L_b^{n_b} h| <= (1 - b^-C_14) |h|_inf}.
    """
    if gibbs is None:
        gibbs = rpf_data(build_transfer_matrix(system, phi_p, depth=max(phi_p.depth - 1, 1)), fit_gap=False)
    n_b = iteration_count(b, c13)
    n_avg = iteration_count(b, c17)
    depth = max(depth, h.depth, phi_p.depth - 1, r.depth - 1)
    Lb = twisted_operator(system, phi_p, r, b, depth)
    L0 = build_transfer_matrix(system, phi_p, depth=depth)
    sup = h.sup_norm
    v = np.abs(Lb.power_apply(h.promote(depth).values.astype(complex), n_b))
    mu = gibbs.measure_table(depth)
    l1 = float(v @ mu)
    if l1 > sup * (1 + 1e-12):
        raise BoundViolated("L1 norm exceeds the sup norm")
    avg = L0.power_apply(v, n_avg)
    factor = float(np.abs(avg).max() / sup)
    c16 = -math.log(1 - factor) / math.log(abs(b)) if factor < 1 - LATTICE_TOL else math.inf
    mu_u = float(mu[v <= (1 - abs(b) ** (-c14)) * sup].sum())
    c12 = -math.log(mu_u) / math.log(abs(b)) if mu_u > 0 else math.inf
    return L1SupReport(float(b), n_b, n_avg, l1, factor, c16, mu_u, c12)


# ---------------------------------------------------------------- report

@dataclass(frozen=True)
class ContractionReport:
    rows: tuple[ContractionRow, ...]
    c9: float
    c10: float
    c11: float
    c12: float = float("nan")
    c14: float = 1.0
    c16: float = float("nan")
    c18: float = float("nan")
    extras: dict = field(default_factory=dict)

    def running_c9(self) -> list[float]:
        return [fit_c9(self.rows[:k + 1]) for k in range(len(self.rows))]


def _report_row(b, system, phi_p, r, depth, c13, ctx, gibbs, table):
    from .diophantine import four_point_certificate

    row = contraction_factor(system, phi_p, r, b, depth=depth, c13=c13, ctx=ctx)
    one = CylinderFunction.constant(system, 1.0)
    l1 = l1_to_sup_contraction(system, phi_p, r, one, b, c13=c13, depth=depth, gibbs=gibbs)
    witness = None
    if table is not None:
        try:
            witness = four_point_certificate(system, r, b, table=table)
        except (NoWitness, PreconditionUnmet):
            witness = None
    try:
        gap = cancellation_search(system, phi_p, r, one, b, c13=c13, ctx=ctx.with_b(b), witness=witness).gap
    except NoPair:
        gap = 0.0
    return ContractionRow(row.b, row.n_b, row.spectral_radius, row.factor, row.factor_random,
                          row.factor_singular, row.factor_constant, l1.mu_U, gap), l1


def contraction_report(system: SymbolicSystem, phi_p: CylinderFunction, r: CylinderFunction,
                       b_grid: Sequence[float], depth: int = 10, c13: float = 4.0,
                       gibbs: GibbsData | None = None, threads: int | None = 1,
                       window: int | None = None, c10: float | None = None) -> ContractionReport:
    """Contraction, mu(U) and cancellation gap at every b of the grid.

    Unless given, C_10 comes from the analytic C_11 at the smallest |b|; that
    bound decreases in |b|, so one constant serves the whole grid.
    """
    from functools import partial

    from ._parallel import parallel_map
    from .suspension import temporal_range

    b_grid = [float(b) for b in b_grid]
    if not b_grid or min(abs(b) for b in b_grid) <= 1:
        raise ValidationError("contraction needs |b| > 1 on the whole grid")
    b0 = min(b_grid, key=abs)
    c11 = c11_bound(phi_p, r, b0)
    ctx = make_context(phi_p, r, b0, c11=c11, c10=c10)
    if gibbs is None:
        gibbs = rpf_data(build_transfer_matrix(system, phi_p, depth=max(phi_p.depth - 1, 1)), fit_gap=False)
    table = temporal_range(system, r, window=window)
    if all(v == 0 for v in table.values):
        table = None
    work = partial(_report_row, system=system, phi_p=phi_p, r=r, depth=depth, c13=c13,
                   ctx=ctx, gibbs=gibbs, table=table)
    results = parallel_map(work, b_grid, threads)
    rows = tuple(res[0] for res in results)
    l1s = [res[1] for res in results]
    gaps = [row.gap for row in rows]
    c18 = fit_c18(b_grid, gaps) if all(g > 0 for g in gaps) else math.inf
    return ContractionReport(rows, fit_c9(rows), ctx.c10, c11,
                             c12=min(l.c12 for l in l1s), c14=1.0,
                             c16=max(l.c16 for l in l1s), c18=c18,
                             extras={"lam_prime": ctx.lam_prime})
