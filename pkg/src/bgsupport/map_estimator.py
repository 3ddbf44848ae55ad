"""MAP support-set objective and its cardinality-constrained minimizers.

The objective for a candidate support ``S`` is

    gamma(S) = 1/2 ln det Phi(S) + 1/2 w' Phi(S)^{-1} w + |S| ln((1-p)/p),

with ``Phi(S) = sigma1^2 A_S A_S' + sigma_e^2 I`` and ``w = y - mu1 A_S 1``.
Both the log-determinant and the quadratic form are reduced to |S| x |S|
systems, so no M x M matrix is ever factorized.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError, EnumerationLimitError
from .linalg import (
    cho_solve_batched,
    cholesky_batched,
    logdet_from_cholesky,
    logdet_psd,
    solve_psd,
    thin_svd,
)

ENUMERATION_LIMIT = 2_000_000
_CHUNK = 4096


@dataclass(frozen=True)
class GammaBreakdown:
    gamma1: float
    gamma2: float
    gamma3: float
    total: float

    @classmethod
    def from_terms(cls, g1, g2, g3):
        g1, g2, g3 = float(g1), float(g2), float(g3)
        return cls(g1, g2, g3, 0.5 * g1 + 0.5 * g2 + g3)


@dataclass(frozen=True)
class SupportEstimate:
    support: tuple
    cost: GammaBreakdown
    solver: str
    supports_evaluated: int


def prior_weight(p):
    """Per-index cost ``ln((1-p)/p)``; infinite when p == 0."""
    return math.inf if p == 0 else math.log((1.0 - p) / p)


def _prior_term(size, p):
    return 0.0 if size == 0 else size * prior_weight(p)


def _normalize_support(S, N):
    S = tuple(sorted({int(i) for i in S}))
    if S and not (S[0] >= 0 and S[-1] < N):
        raise DomainError(f"support {S} not contained in 0..{N - 1}")
    return S


def gamma_cost(S, inst):
    """Evaluate gamma(S) term by term.

    The log-determinant uses the matrix determinant lemma,
    ``ln det Phi = M ln sigma_e^2 + ln det(I + r A_S' A_S)`` with
    ``r = sigma1^2 / sigma_e^2``.  For the quadratic form, with
    ``G = I + r A_S' A_S`` and ``u = G^{-1} A_S' w``,

        w' Phi^{-1} w = (||w - r A_S u||^2 + r ||u||^2) / sigma_e^2,

    a sum of two nonnegative terms.
    """
    prm = inst.params
    S = _normalize_support(S, prm.N)
    se2 = prm.sigma_e**2
    r = prm.snr_ratio
    y = inst.observation
    base = prm.M * math.log(se2)
    if not S:
        return GammaBreakdown.from_terms(base, y @ y / se2, 0.0)
    As = inst.matrix[:, list(S)]
    G = np.eye(len(S)) + r * (As.T @ As)
    G = 0.5 * (G + G.T)
    try:
        g1 = base + logdet_psd(G)
    except DomainError as exc:
        raise DomainError(f"I + r A_S'A_S not positive definite for S={S}", exc.pivot) from exc
    w = y - prm.mu1 * As.sum(axis=1)
    u = solve_psd(G, As.T @ w)
    z = w - r * (As @ u)
    g2 = (z @ z + r * (u @ u)) / se2
    return GammaBreakdown.from_terms(g1, g2, _prior_term(len(S), prm.p))


def gamma_terms_batched(supports, inst):
    """Vectorized ``gamma_cost`` over an integer array of supports, shape (B, k).

    Returns ``(gamma1, gamma2, gamma3)`` arrays of length B.
    """
    prm = inst.params
    supports = np.asarray(supports, dtype=np.intp)
    B, k = supports.shape
    se2 = prm.sigma_e**2
    r = prm.snr_ratio
    y = inst.observation
    base = prm.M * math.log(se2)
    g3 = np.full(B, _prior_term(k, prm.p))
    if k == 0:
        return np.full(B, base), np.full(B, y @ y / se2), g3
    As = np.moveaxis(inst.matrix[:, supports], 1, 0)  # (B, M, k)
    G = r * np.einsum("bmi,bmj->bij", As, As)
    G[:, np.arange(k), np.arange(k)] += 1.0
    L = cholesky_batched(G)
    g1 = base + logdet_from_cholesky(L)
    w = y[None, :] - prm.mu1 * As.sum(axis=2)
    u = cho_solve_batched(L, np.einsum("bmi,bm->bi", As, w))
    z = w - r * np.einsum("bmi,bi->bm", As, u)
    g2 = (np.einsum("bm,bm->b", z, z) + r * np.einsum("bi,bi->b", u, u)) / se2
    return g1, g2, g3


def _batched_totals(supports, inst):
    g1, g2, g3 = gamma_terms_batched(supports, inst)
    return 0.5 * g1 + 0.5 * g2 + g3


def _chunks(it, k, size):
    while True:
        flat = [i for _, s in zip(range(size), it) for i in s]
        if not flat and k > 0:
            return
        arr = np.array(flat, dtype=np.intp).reshape(-1, k) if k else np.zeros((1, 0), np.intp)
        yield arr
        if k == 0:
            return


def count_supports(N, cap):
    return sum(math.comb(N, k) for k in range(min(cap, N) + 1))


def default_cap(params, q=2.0):
    """``floor(q N p)``, the cardinality constraint on the estimate."""
    return params.cardinality_cap(q)


def exhaustive_map(inst, cap=None, *, limit=ENUMERATION_LIMIT):
    """Global minimizer of gamma over all supports with ``|S| <= cap``.

    Ties resolve to the smaller support, then the lexicographically
    smallest one.
    """
    prm = inst.params
    if cap is None:
        cap = default_cap(prm)
    cap = min(int(cap), prm.N)
    if cap < 0:
        raise DomainError("cardinality cap must be nonnegative")
    n_total = count_supports(prm.N, cap)
    if n_total > limit:
        raise EnumerationLimitError(
            f"{n_total} supports of size <= {cap} exceed the enumeration limit "
            f"{limit}; use greedy_map instead"
        )
    best_cost = math.inf
    best = ()
    for k in range(cap + 1):
        for chunk in _chunks(combinations(range(prm.N), k), k, _CHUNK):
            totals = _batched_totals(chunk, inst)
            i = int(np.argmin(totals))
            if totals[i] < best_cost:
                best_cost = float(totals[i])
                best = tuple(int(j) for j in chunk[i])
    return SupportEstimate(best, gamma_cost(best, inst), "exhaustive", n_total)


def greedy_map(inst, cap=None):
    """Forward selection with swap / removal refinement.

    Starting from the empty set, the index whose addition lowers gamma the
    most is added; after every addition, single swaps and single removals
    are applied while they keep lowering the cost.  The search stops when
    no addition helps or the support reaches ``cap``.
    """
    prm = inst.params
    N = prm.N
    if cap is None:
        cap = default_cap(prm)
    cap = min(int(cap), N)
    if cap < 0:
        raise DomainError("cardinality cap must be nonnegative")
    cache = {}

    def evaluate(candidates):
        todo = sorted({c for c in candidates if c not in cache}, key=lambda c: (len(c), c))
        by_size = {}
        for c in todo:
            by_size.setdefault(len(c), []).append(c)
        for k, group in by_size.items():
            arr = np.array(group, dtype=np.intp).reshape(len(group), k)
            for c, t in zip(group, _batched_totals(arr, inst)):
                cache[c] = float(t)

    def best_of(candidates):
        evaluate(candidates)
        return min(candidates, key=lambda c: (cache[c], len(c), c), default=None)

    S = ()
    evaluate([S])
    while len(S) < cap:
        outside = [j for j in range(N) if j not in S]
        adds = [tuple(sorted(S + (j,))) for j in outside]
        cand = best_of(adds)
        if cand is None or not cache[cand] < cache[S]:
            break
        S = cand
        while True:
            inside = set(S)
            moves = [tuple(i for i in S if i != drop) for drop in S]
            moves += [
                tuple(sorted((inside - {drop}) | {j}))
                for drop in S
                for j in range(N)
                if j not in inside
            ]
            cand = best_of(moves)
            if cand is None or not cache[cand] < cache[S]:
                break
            S = cand
    return SupportEstimate(S, gamma_cost(S, inst), "greedy", len(cache))


def regress_on_support(inst, S):
    """Least-squares fit of ``y`` on the columns in ``S``; zeros elsewhere."""
    N = inst.params.N
    S = _normalize_support(S, N)
    x = np.zeros(N)
    if not S:
        return x
    As = inst.matrix[:, list(S)]
    if len(S) > As.shape[0]:
        raise DomainError(f"A_S is {As.shape} and cannot have full column rank")
    svd = thin_svd(As)
    if svd.singular_values[-1] <= 1e-10:
        raise DomainError(f"A_S is rank deficient for S={S}")
    coef = svd.right_vectors @ ((svd.left_vectors.T @ inst.observation) / svd.singular_values)
    x[list(S)] = coef
    return x
