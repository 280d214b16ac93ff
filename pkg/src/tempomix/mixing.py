"""Correlation functions of the suspension flow and decay-exponent fitting.

Observables are products E(x, u) = coeff(x) psi(u / r(x)) with a polynomial
bump psi vanishing to order k at 0 and 1, so that E is C^k across the
identification (x, r(x)) ~ (sigma x, 0).  The flow measure is
mu x Leb / int r dmu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from ._parallel import parallel_map
from .errors import InsufficientSignal, ValidationError, WindowExhausted
from .shift import CylinderFunction, SymbolicSystem, word_array, word_index
from .thermo import GibbsData


def bump(k: int) -> Polynomial:
    """(4 v (1 - v))^k, equal to 1 at v = 1/2; k = 0 gives psi = 1."""
    return Polynomial([0.0, 4.0, -4.0]) ** k if k > 0 else Polynomial([1.0])


class Observable:
    """E(x, u) = coeff(x) * profile(u / r(x))."""

    def __init__(self, coeff: CylinderFunction, k: int = 2, profile: Polynomial | None = None):
        if k < 0:
            raise ValidationError("smoothness order must be >= 0")
        self.coeff = coeff
        self.k = int(k)
        if profile is None:
            profile = bump(k)
        self.profile = profile if isinstance(profile, Polynomial) else Polynomial(profile)
        for j in range(self.k):
            der = self.profile.deriv(j) if j else self.profile
            if abs(der(0.0)) > 1e-12 or abs(der(1.0)) > 1e-12:
                raise ValidationError(f"profile derivative of order {j} must vanish at 0 and 1")

    @classmethod
    def constant(cls, system: SymbolicSystem, value=1.0) -> "Observable":
        return cls(CylinderFunction.constant(system, value), k=0)

    @classmethod
    def from_json(cls, system: SymbolicSystem, data: dict) -> "Observable":
        """{"depth": m, "coeff": [...] or {word: value}, "k": k}; lists follow word order."""
        try:
            depth = int(data.get("depth", 1))
            vals = data["coeff"]
            if isinstance(vals, dict):
                coeff = CylinderFunction.from_json(system, {"depth": depth, "values": vals})
            else:
                coeff = CylinderFunction(system, depth, [complex(*v) if isinstance(v, list) else v
                                                         for v in vals])
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed observable document: {exc}") from exc
        return cls(coeff, int(data.get("k", 2)))

    def to_json(self) -> dict:
        return {"depth": self.coeff.depth, "k": self.k, "coeff": self.coeff.to_json()["values"]}

    @property
    def depth(self) -> int:
        return self.coeff.depth

    def scaled(self, a) -> "Observable":
        return Observable(self.coeff * a, self.k, self.profile)

    def profile_integral(self, other: "Observable | None" = None) -> float:
        f = self.profile if other is None else self.profile * other.profile
        val, _ = quad(f, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10)
        return val

    def __call__(self, word, u: float, r: CylinderFunction):
        height = float(np.real(r(tuple(word[:r.depth]))))
        return self.coeff(tuple(word[:self.depth])) * self.profile(u / height)


def standard_observable(system: SymbolicSystem, k: int = 2) -> Observable:
    """coeff(x) = 1 + x_0 with the order-k bump."""
    return Observable(CylinderFunction(system, 1, np.arange(1, system.n_symbols + 1, dtype=float)), k)


def ck_norm(obs: Observable, r: CylinderFunction) -> float:
    """(|coeff|_inf + |coeff|_Lip) * max_j sup|psi^(j)| / r_min^j, j <= k."""
    grid = np.linspace(0.0, 1.0, 2001)
    r_min = float(np.real(r.values).min())
    worst = 0.0
    for j in range(obs.k + 1):
        der = obs.profile.deriv(j) if j else obs.profile
        worst = max(worst, float(np.abs(der(grid)).max()) / r_min ** j)
    return (obs.coeff.sup_norm + obs.coeff.lipschitz) * worst


def _roof_mass(gibbs: GibbsData, r: CylinderFunction) -> float:
    mu = gibbs.measure_table(r.depth)
    return float(np.real(r.values) @ mu)


def suspension_integral(obs: Observable, gibbs: GibbsData, r: CylinderFunction):
    """int E dmu_r = sum_w mu[w] coeff(w) r(w) int psi / int r dmu."""
    depth = max(obs.depth, r.depth)
    words = word_array(obs.coeff.system, depth)
    mu = gibbs.measure_table(depth)
    rv = np.real(r.evaluate(words[:, :r.depth]))
    cv = obs.coeff.evaluate(words[:, :obs.depth])
    total = (cv * rv) @ mu * obs.profile_integral()
    out = total / _roof_mass(gibbs, r)
    return complex(out) if np.iscomplexobj(out) else float(out)


# ---------------------------------------------------------------- deterministic estimator

def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def correlation_deterministic(E: Observable, F: Observable, t: float, gibbs: GibbsData,
                              r: CylinderFunction, depth: int | None = None):
    """Exact cylinder sum over depth-D words with piecewise Gauss-Legendre in the height.

    The integrand is a polynomial in u on each piece between roof crossings,
    so the quadrature is exact up to rounding.  Raises WindowExhausted when
    some point of a depth-D cylinder leaves the enumerated window by time t.
    """
    if t < 0:
        raise ValidationError("t must be >= 0")
    system = E.coeff.system
    reach = max(E.depth, r.depth)
    if depth is None:
        r_min = float(np.real(r.values).min())
        depth = max(F.depth, reach + math.ceil((t + float(np.real(r.values).max())) / r_min))
    words = word_array(system, depth)
    mu = gibbs.measure_table(depth)
    n_pos = depth - reach + 1
    if n_pos < 1:
        raise WindowExhausted(f"depth {depth} cannot hold one roof window")
    rv = np.stack([np.real(r.evaluate(words[:, j:j + r.depth])) for j in range(n_pos)], axis=1)
    ce = np.stack([E.coeff.evaluate(words[:, j:j + E.depth]) for j in range(n_pos)], axis=1)
    cf = F.coeff.evaluate(words[:, :F.depth])
    cum = np.concatenate([np.zeros((len(words), 1)), np.cumsum(rv, axis=1)], axis=1)
    r0 = rv[:, 0]
    if np.any(cum[:, -1] < r0 + t):
        raise WindowExhausted(f"flow time {t} exceeds the depth-{depth} window")
    nodes, weights = _gl(2 * (E.profile.degree() + F.profile.degree()) + 4)
    acc = np.zeros(len(words), dtype=complex)
    for k in range(n_pos):
        lo = np.clip(cum[:, k] - t, 0.0, r0)
        hi = np.clip(cum[:, k + 1] - t, 0.0, r0)
        width = hi - lo
        live = width > 0
        if not live.any():
            continue
        u = lo[live, None] + width[live, None] * (nodes[None, :] + 1) / 2
        fval = F.profile(u / r0[live, None])
        eval_ = E.profile((u + t - cum[live, k][:, None]) / rv[live, k][:, None])
        acc[live] += ce[live, k] * ((eval_ * fval) @ weights) * width[live] / 2
    acc *= cf
    total = (acc @ mu) / float(r0 @ mu)
    rho = total - suspension_integral(E, gibbs, r) * suspension_integral(F, gibbs, r)
    return rho


# ---------------------------------------------------------------- Monte Carlo estimator

def _sampler_tables(gibbs: GibbsData):
    system = gibbs.system
    phi = gibbs.normalized
    p = phi.depth
    tail = gibbs._base_len()
    if p >= 2:
        words = word_array(system, p)
        sfx = word_index(system, words[:, 1:])
        table = np.zeros((system.n_symbols, int(sfx.max()) + 1))
        table[words[:, 0], sfx] = np.exp(np.real(phi.values))
    else:
        table = None
    return tail, gibbs.measure_table(tail), table


def sample_gibbs(gibbs: GibbsData, count: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """Words x_0..x_{L-1} drawn from mu, built right to left.

    mu[a w] = e^{phi'(a w)} mu[w] for the normalized potential, so each new
    left symbol is drawn from e^{phi'(. w)} given the already drawn suffix.
    """
    system = gibbs.system
    tail, tail_mu, table = _sampler_tables(gibbs)
    tail_words = word_array(system, tail)
    out = np.empty((count, length), dtype=np.int64)
    cdf = np.cumsum(tail_mu)
    pick = np.minimum(np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right"), len(cdf) - 1)
    out[:, length - tail:] = tail_words[pick]
    p = gibbs.normalized.depth
    if table is None:
        probs = np.exp(np.real(gibbs.normalized.values))
        cdf1 = np.cumsum(probs)
        out[:, :length - tail] = np.minimum(
            np.searchsorted(cdf1, rng.random((count, length - tail)) * cdf1[-1], side="right"),
            len(cdf1) - 1)
        return out
    for pos in range(length - tail - 1, -1, -1):
        sfx = word_index(system, out[:, pos + 1:pos + p])
        probs = table[:, sfx].T
        cdf2 = np.cumsum(probs, axis=1)
        draw = rng.random(count)[:, None] * cdf2[:, -1:]
        out[:, pos] = np.minimum((draw >= cdf2).sum(axis=1), system.n_symbols - 1)
    return out


def _mc_batch(args, E, F, t_grid, gibbs, r, mean_e, mean_f, length):
    seed, count = args
    rng = np.random.default_rng(seed)
    words = sample_gibbs(gibbs, count, length, rng)
    n_pos = length - max(E.depth, r.depth) + 1
    rv = np.stack([np.real(r.evaluate(words[:, j:j + r.depth])) for j in range(n_pos)], axis=1)
    r_max = float(np.real(r.values).max())
    keep = rng.random(count) < rv[:, 0] / r_max
    words, rv = words[keep], rv[keep]
    m = len(words)
    u = rng.random(m) * rv[:, 0]
    ce = np.stack([E.coeff.evaluate(words[:, j:j + E.depth]) for j in range(n_pos)], axis=1)
    fc = F.coeff.evaluate(words[:, :F.depth]) * F.profile(u / rv[:, 0]) - mean_f
    cum = np.concatenate([np.zeros((m, 1)), np.cumsum(rv, axis=1)], axis=1)
    rows = np.arange(m)
    k = np.zeros(m, dtype=np.int64)
    sums = np.zeros(len(t_grid), dtype=complex)
    sq = np.zeros(len(t_grid))
    for i, t in enumerate(t_grid):
        target = u + t
        while True:
            adv = cum[rows, k + 1] <= target
            if not adv.any():
                break
            k[adv] += 1
        if k.max() >= n_pos:
            raise WindowExhausted("sample window too short")
        e = ce[rows, k] * E.profile((target - cum[rows, k]) / rv[rows, k]) - mean_e
        prod = e * fc
        sums[i] = prod.sum()
        sq[i] = float((np.abs(prod) ** 2).sum())
    return m, sums, sq


def correlation_montecarlo(E: Observable, F: Observable, t_grid, gibbs: GibbsData,
                           r: CylinderFunction, samples: int = 10 ** 6, seed: int = 0,
                           batch: int = 100_000, threads: int | None = 1):
    """Empirical mean of (E o g_t - int E)(F - int F) over mu_r-distributed (x, u).

    Base points come from the stationary chain, heights by rejection with
    acceptance r(x)/r_max.  Batches use seeds spawned from the root seed, so
    the result does not depend on the thread count.  Returns (rho, stderr, n).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0):
        raise ValidationError("t must be >= 0")
    r_min, r_max = float(np.real(r.values).min()), float(np.real(r.values).max())
    length = math.ceil((t_grid.max() + r_max) / r_min) + max(E.depth, F.depth, r.depth) + 2
    mean_e = suspension_integral(E, gibbs, r)
    mean_f = suspension_integral(F, gibbs, r)
    n_batches = max(1, math.ceil(samples / batch))
    seeds = np.random.SeedSequence(seed).spawn(n_batches)
    sizes = [batch] * (n_batches - 1) + [samples - batch * (n_batches - 1)]
    work = partial(_mc_batch, E=E, F=F, t_grid=t_grid, gibbs=gibbs, r=r,
                   mean_e=mean_e, mean_f=mean_f, length=length)
    parts = parallel_map(work, list(zip(seeds, sizes)), threads)
    n = sum(p[0] for p in parts)
    total = np.zeros(len(t_grid), dtype=complex)
    total_sq = np.zeros(len(t_grid))
    for _, s, q in parts:
        total += s
        total_sq += q
    mean = total / n
    var = np.maximum(total_sq / n - np.abs(mean) ** 2, 0.0)
    return mean, np.sqrt(var / n), n


# ---------------------------------------------------------------- series and fit

@dataclass
class CorrelationSeries:
    t: np.ndarray
    rho: np.ndarray
    stderr: np.ndarray
    estimator: str
    samples: int = 0
    noise_floor: np.ndarray = field(default=None)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.rho = np.asarray(self.rho)
        self.stderr = np.broadcast_to(np.asarray(self.stderr, dtype=float), self.t.shape).copy()
        if self.noise_floor is None:
            self.noise_floor = 3.0 * self.stderr
        self.noise_floor = np.broadcast_to(np.asarray(self.noise_floor, dtype=float), self.t.shape).copy()

    def rows(self):
        for t, rho, se in zip(self.t, self.rho, self.stderr):
            rho = complex(rho)
            yield float(t), rho.real, rho.imag, float(se)


def correlation(E: Observable, F: Observable, t, gibbs: GibbsData, r: CylinderFunction,
                method: str = "deterministic", **kw) -> CorrelationSeries:
    """rho_{E,F}(t) = int E o g_t . F dmu_r - int E int F on a scalar t or a t-grid."""
    t_grid = np.atleast_1d(np.asarray(t, dtype=float))
    if method == "deterministic":
        rho = np.array([correlation_deterministic(E, F, tt, gibbs, r, kw.get("depth")) for tt in t_grid])
        return CorrelationSeries(t_grid, rho, np.zeros(len(t_grid)), "deterministic")
    if method == "montecarlo":
        rho, se, n = correlation_montecarlo(E, F, t_grid, gibbs, r, **kw)
        return CorrelationSeries(t_grid, rho, se, "montecarlo", n)
    raise ValidationError(f"unknown estimator {method!r}")


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    t_below_floor: float
    n_points: int
    flag: str
    envelope: np.ndarray = field(repr=False)
    early_exponent: float = float("nan")
    late_exponent: float = float("nan")


def upper_envelope(values) -> np.ndarray:
    """max_{s >= t} |rho(s)|."""
    a = np.abs(np.asarray(values))
    return np.maximum.accumulate(a[::-1])[::-1]


def decay_fit(series: CorrelationSeries, t_min: float | None = None, t_max: float | None = None,
              nonmixing_below: float = 0.5, steepening: float = 1.5) -> DecayFit:
    """Log-log regression of the upper envelope of |rho| over points above the noise floor.

    Flags: "non-mixing" when the exponent is below ``nonmixing_below``,
    "super-polynomial" when the late half of the fit window decays at least
    ``steepening`` times faster than the early half, otherwise "polynomial".
    """
    if len(series.t) < 20:
        raise ValidationError("decay_fit needs at least 20 grid points")
    env = upper_envelope(series.rho)
    floor = np.maximum(series.noise_floor, 1e-300)
    below = np.flatnonzero(env < floor)
    t_below = float(series.t[below[0]]) if below.size else math.inf
    sel = (series.t > 0) & (env > floor)
    if t_min is not None:
        sel &= series.t >= t_min
    if t_max is not None:
        sel &= series.t <= t_max
    idx = np.flatnonzero(sel)
    if idx.size < 5:
        raise InsufficientSignal(f"only {idx.size} points above the noise floor")
    lt, le = np.log(series.t[idx]), np.log(env[idx])
    slope, intercept = np.polyfit(lt, le, 1)
    half = idx.size // 2
    early = -np.polyfit(lt[:half + 1], le[:half + 1], 1)[0] if half >= 2 else math.nan
    late = -np.polyfit(lt[half:], le[half:], 1)[0] if idx.size - half >= 3 else math.nan
    exponent = -float(slope)
    if exponent < nonmixing_below:
        flag = "non-mixing"
    elif late > 1.0 and late >= steepening * max(early, 1e-12):
        flag = "super-polynomial"
    else:
        flag = "polynomial"
    return DecayFit(exponent, float(intercept), t_below, int(idx.size), flag, env, float(early), float(late))
