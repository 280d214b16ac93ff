"""Transfer operators, pressure, normalized potentials and Gibbs measures.

All operators act on locally constant functions of a fixed depth n, stored
as coefficient vectors over the admissible depth-n words.  For potentials
and roofs of depth <= n + 1 this restriction is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateSpectrum, DepthMismatch, ValidationError
from .shift import (CylinderFunction, SymbolicSystem, word_array, word_count,
                    word_index)

POWER_TOL = 1e-13
POWER_MAXITER = 100_000
SIMPLE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Matrix of L_{phi + s r} on depth-n functions: (L h)(w) = sum_a e^{(phi + s r)(a w)} h(a w)."""

    system: SymbolicSystem
    depth: int
    matrix: sp.csr_matrix
    s: complex
    phi: CylinderFunction
    roof: CylinderFunction | None

    def apply(self, h):
        """Apply to a coefficient vector, a (M, k) block, or a CylinderFunction."""
        if isinstance(h, CylinderFunction):
            vals = h.promote(self.depth).values if h.depth <= self.depth else None
            if vals is None:
                raise DepthMismatch(f"function depth {h.depth} exceeds operator depth {self.depth}")
            return CylinderFunction(self.system, self.depth, self.matrix @ vals)
        return self.matrix @ h

    def power_apply(self, h, n: int):
        for _ in range(n):
            h = self.apply(h)
        return h

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _preimage_structure(system: SymbolicSystem, n: int):
    """For each (row word w, symbol a) with A[a, w_0] = 1: rows, preimage words a.w (length n+1)."""
    words = word_array(system, n)
    a = system.matrix
    rows, exts = [], []
    for sym in range(system.n_symbols):
        ok = np.flatnonzero(a[sym, words[:, 0]])
        rows.append(ok)
        exts.append(np.concatenate([np.full((len(ok), 1), sym), words[ok]], axis=1))
    rows = np.concatenate(rows)
    exts = np.concatenate(exts)
    order = np.lexsort((exts[:, 0], rows))
    return rows[order], exts[order]


def build_transfer_matrix(system: SymbolicSystem, phi: CylinderFunction,
                          roof: CylinderFunction | None = None, s: complex = 0.0,
                          depth: int | None = None) -> TransferMatrix:
    """Matrix of L_{phi + s r} acting on depth-n locally constant functions.

    Weights are read on the preimage word a.w of length n + 1, so potentials
    and roofs of depth up to n + 1 are represented exactly.
    """
    n = depth if depth is not None else max(phi.depth, roof.depth if roof is not None else 1)
    if phi.depth > n + 1 or (roof is not None and roof.depth > n + 1):
        raise DepthMismatch(f"potential or roof deeper than operator depth {n} + 1")
    rows, exts = _preimage_structure(system, n)
    expo = phi.evaluate(exts).astype(complex)
    if roof is not None and s != 0:
        expo = expo + s * roof.evaluate(exts)
    weights = np.exp(expo)
    if np.all(weights.imag == 0):
        weights = weights.real
    cols = word_index(system, exts[:, :n])
    m = word_count(system, n)
    mat = sp.csr_matrix((weights, (rows, cols)), shape=(m, m))
    return TransferMatrix(system, n, mat, complex(s), phi, roof)


def _perron_vector(mat, tol: float = POWER_TOL, maxiter: int = POWER_MAXITER):
    """Power iteration from the all-ones vector; returns (eigenvalue, max-normalized vector)."""
    v = np.ones(mat.shape[0])
    lam = 0.0
    for _ in range(maxiter):
        w = mat @ v
        lam = float(w.max())
        if lam <= 0:
            raise DegenerateSpectrum("operator annihilates the positive cone")
        w = w / lam
        if np.max(np.abs(w - v)) <= tol:
            return lam, w
        v = w
    raise DegenerateSpectrum("power iteration did not converge; leading eigenvalue not simple")


def leading_eigenvalues(mat, k: int = 2) -> np.ndarray:
    """The k eigenvalues of largest modulus, sorted by decreasing modulus."""
    size = mat.shape[0]
    if size <= 2500:
        ev = np.linalg.eigvals(mat.toarray() if sp.issparse(mat) else mat)
    else:
        from scipy.sparse.linalg import eigs
        ev = eigs(sp.csr_matrix(mat), k=min(k, size - 2), which="LM", return_eigenvectors=False)
    ev = ev[np.argsort(-np.abs(ev), kind="stable")]
    if len(ev) < k:
        ev = np.concatenate([ev, np.zeros(k - len(ev))])
    return ev[:k]


def spectral_radius(L: TransferMatrix) -> float:
    return float(np.abs(leading_eigenvalues(L.matrix, 1)[0]))


@dataclass(frozen=True, eq=False)
class GibbsData:
    """Perron data of L_phi at depth n together with the equilibrium measure."""

    system: SymbolicSystem
    depth: int
    pressure: float
    eigenfunction: CylinderFunction
    eigenmeasure: np.ndarray
    weights: np.ndarray
    normalized: CylinderFunction
    delta: float
    rate: float = float("nan")
    c15: float = float("nan")
    gibbs_constant: float = float("nan")
    extras: dict = field(default_factory=dict)

    @property
    def gap(self) -> tuple[float, float]:
        return self.delta, self.c15

    @property
    def cylinder_weights(self) -> dict:
        from .shift import enumerate_words, format_word
        return {format_word(w, self.system.n_symbols): float(v)
                for w, v in zip(enumerate_words(self.system, self.depth), self.weights)}

    def _base_len(self) -> int:
        return min(max(self.normalized.depth - 1, 1), self.depth)

    def log_measure(self, words) -> np.ndarray:
        """log mu[w] for an (M, L) array of words.

        Short cylinders aggregate the stored depth-n weights; long ones use
        mu[a w] = e^{phi'(a w)} mu[w], summed left to right.
        """
        words = np.asarray(words, dtype=np.int64)
        length = words.shape[-1]
        if length <= self.depth:
            base = self.measure_table(length)
            return np.log(base[word_index(self.system, words)])
        k = self._base_len()
        p = self.normalized.depth
        total = np.zeros(words.shape[:-1])
        for i in range(length - k):
            total = total + self.normalized.evaluate(words[..., i:i + p])
        tail = np.log(self.measure_table(k)[word_index(self.system, words[..., length - k:])])
        return total + tail

    def measure_table(self, length: int) -> np.ndarray:
        """mu of every admissible cylinder of the given length, lexicographic."""
        if length == self.depth:
            return self.weights
        if length < self.depth:
            idx = word_index(self.system, word_array(self.system, self.depth)[:, :length])
            out = np.zeros(word_count(self.system, length))
            np.add.at(out, idx, self.weights)
            return out
        return np.exp(self.log_measure(word_array(self.system, length)))

    def measure(self, word) -> float:
        return float(np.exp(self.log_measure(np.array([word]))[0]))

    def integrate(self, h: CylinderFunction):
        """Integral of a locally constant function against mu."""
        vals = h.values @ self.measure_table(h.depth)
        return vals.item() if hasattr(vals, "item") else vals


def rpf_data(L: TransferMatrix, fit_gap: bool = True, seed: int = 0) -> GibbsData:
    """Pressure, eigenfunction, eigenmeasure and equilibrium weights of L_phi (s = 0)."""
    if L.s != 0:
        raise ValidationError("rpf_data needs the operator at s = 0")
    mat = L.matrix
    if np.iscomplexobj(mat.data) or (mat.data < 0).any():
        raise ValidationError("rpf_data needs a real nonnegative matrix")
    top = leading_eigenvalues(mat, 2)
    lam, g = _perron_vector(mat)
    if abs(top[1]) >= lam * (1 - SIMPLE_RTOL):
        raise DegenerateSpectrum("leading eigenvalue is not simple")
    _, nu = _perron_vector(mat.T.tocsr())
    nu = nu / nu.sum()
    g = g / (g @ nu)
    weights = g * nu
    weights = weights / weights.sum()
    system, n = L.system, L.depth
    pressure = float(np.log(lam))
    eig = CylinderFunction(system, n, g)
    words = word_array(system, n + 1)
    logg = np.log(g)
    phi_n = L.phi.evaluate(words)
    norm_vals = phi_n + logg[word_index(system, words[:, :n])] - logg[word_index(system, words[:, 1:])] - pressure
    normalized = CylinderFunction(system, n + 1, norm_vals).reduced()
    gibbs = GibbsData(system, n, pressure, eig, nu, weights, normalized, float(abs(top[1]) / lam))
    if fit_gap:
        Ln = build_transfer_matrix(system, normalized, depth=max(n, normalized.depth - 1))
        delta, c15, rate = _fit_gap(Ln, gibbs, seed=seed)
        gibbs = GibbsData(system, n, pressure, eig, nu, weights, normalized, delta, rate, c15)
    return gibbs


def gibbs_for(system: SymbolicSystem, phi: CylinderFunction | None = None, depth: int | None = None,
              **kw) -> GibbsData:
    """Convenience: Gibbs data of phi (default phi = 0) at its natural depth."""
    if phi is None:
        phi = CylinderFunction.constant(system, 0.0)
    n = depth if depth is not None else max(phi.depth - 1, 1)
    return rpf_data(build_transfer_matrix(system, phi, depth=n), **kw)


def pressure(system: SymbolicSystem, phi: CylinderFunction) -> float:
    L = build_transfer_matrix(system, phi, depth=max(phi.depth - 1, 1))
    lam, _ = _perron_vector(L.matrix)
    return float(np.log(lam))


def normalize_potential(phi: CylinderFunction, gibbs: GibbsData) -> CylinderFunction:
    """phi' = phi + log g - log g o sigma - P(phi), so that L_{phi'} 1 = 1."""
    if phi.system != gibbs.system:
        raise ValidationError("potential and Gibbs data live on different systems")
    return gibbs.normalized


def verify_gibbs(gibbs: GibbsData, phi_prime: CylinderFunction, n_max: int) -> float:
    """Max over cylinders of length <= n_max of mu[w] / e^{phi'_n(x)} and its reciprocal."""
    system = gibbs.system
    p = phi_prime.depth
    worst = 0.0
    for length in range(1, n_max + 1):
        ext = word_array(system, length + p - 1)
        total = np.zeros(len(ext))
        for i in range(length):
            total = total + phi_prime.evaluate(ext[:, i:i + p])
        log_ratio = gibbs.log_measure(ext[:, :length]) - total
        worst = max(worst, float(np.max(np.abs(log_ratio))))
    c7 = float(np.exp(worst))
    if not np.isfinite(c7):
        raise DegenerateSpectrum("Gibbs ratio is not finite")
    return c7


def _fit_gap(L: TransferMatrix, gibbs: GibbsData, k_max: int = 50, n_funcs: int = 16,
             seed: int = 0) -> tuple[float, float, float]:
    """delta = |second eigenvalue| and the fitted C_15 (see spectral_gap)."""
    top = leading_eigenvalues(L.matrix, 2)
    if abs(top[0] - 1) > 1e-9:
        raise ValidationError("spectral_gap needs a normalized operator (leading eigenvalue 1)")
    if abs(top[1]) >= 1 - SIMPLE_RTOL:
        raise DegenerateSpectrum("leading eigenvalue is not simple")
    delta = float(abs(top[1]))
    # on the Lipschitz space the essential radius is lam, so that is the slowest
    # rate a finite-depth restriction can certify uniformly
    rate = max(delta, L.system.lam)
    rng = np.random.default_rng(seed)
    system, n = L.system, L.depth
    mu = gibbs.measure_table(n)
    c15 = 0.0
    for _ in range(n_funcs):
        h = rng.standard_normal(L.size) + 1j * rng.standard_normal(L.size)
        norm_h = np.abs(h).max() + _lip(system, n, h)
        mean = h @ mu
        cur = h
        for k in range(k_max + 1):
            resid = cur - mean
            size = np.abs(resid).max() + _lip(system, n, resid)
            if size > 1e-12 * norm_h:
                c15 = max(c15, size / (rate ** k * norm_h))
            cur = L.apply(cur)
    return delta, c15, rate


def _lip(system, n, values):
    from .shift import lipschitz_of_values
    return lipschitz_of_values(system, n, values)


def spectral_gap(L: TransferMatrix, gibbs: GibbsData | None = None, seed: int = 0) -> tuple[float, float]:
    """(delta, C_15) for a normalized operator.

    C_15 is the smallest constant with |L^k h - int h dmu|_Lip-norm <= C_15 rate^k |h|
    over random h and k <= 50, where rate = max(delta, lam).
    """
    if gibbs is None:
        gibbs = rpf_data(L, fit_gap=False)
    delta, c15, _ = _fit_gap(L, gibbs, seed=seed)
    return delta, c15
