"""Bernoulli-Gaussian signals, Gaussian measurement matrices and RIP estimates."""

import math
import zlib
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError, EnumerationLimitError
from .linalg import as_dense, singular_values_batched

RIP_ENUMERATION_CAP = 2_000_000
_RIP_CHUNK = 20_000


@dataclass(frozen=True)
class ModelParams:
    """Scalar constants of the observation model.

    ``p`` may be exactly 0 (a degenerate model with empty supports), but
    the bound formulas require ``0 < p < 1/2``.  ``epsilon`` is an optional
    RIP constant supplied by the user; measured values should be preferred.
    """

    N: int
    M: int
    p: float
    mu1: float
    sigma1: float
    sigma_e: float
    epsilon: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or int(self.M) != self.M or self.M < 1:
            raise DomainError("N and M must be positive integers")
        if not self.M < self.N:
            raise DomainError(f"need M < N, got M={self.M}, N={self.N}")
        if not 0.0 <= self.p < 0.5:
            raise DomainError(f"need 0 <= p < 1/2, got p={self.p}")
        if not (self.sigma1 > 0 and self.sigma_e > 0):
            raise DomainError("sigma1 and sigma_e must be strictly positive")
        if not math.isfinite(self.mu1):
            raise DomainError("mu1 must be finite")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise DomainError("epsilon must be nonnegative")

    @property
    def Np(self):
        return self.N * self.p

    @property
    def snr_ratio(self):
        """sigma1^2 / sigma_e^2."""
        return self.sigma1**2 / self.sigma_e**2

    def cardinality_cap(self, q=2.0):
        return int(math.floor(q * self.Np + 1e-12))

    def replace(self, **changes):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ModelParams(**fields)

    @classmethod
    def from_nominal_snr(cls, N, M, p, snr_db, sigma_e=1.0, mu1=0.0, epsilon=None):
        """Build params from ``10 log10(N p sigma1^2 / (M sigma_e^2))``."""
        ratio = 10 ** (snr_db / 10) * M / (N * p)
        return cls(N, M, p, mu1, sigma_e * math.sqrt(ratio), sigma_e, epsilon)


@dataclass(frozen=True)
class SparseSignal:
    support: tuple
    values: np.ndarray

    def __post_init__(self):
        s = tuple(int(i) for i in self.support)
        if list(s) != sorted(set(s)):
            raise DomainError("support must be sorted and duplicate-free")
        object.__setattr__(self, "support", s)
        off = np.ones(len(self.values), bool)
        off[list(s)] = False
        if np.any(self.values[off] != 0):
            raise DomainError("signal has nonzero entries off its support")


@dataclass(frozen=True)
class Instance:
    params: ModelParams
    matrix: np.ndarray
    signal: SparseSignal
    noise: np.ndarray
    observation: np.ndarray
    seed: int | None = None


@dataclass(frozen=True)
class RipEstimate:
    sparsity_level: int
    epsilon_hat: float
    exhaustive: bool
    supports_checked: int


def _label_rng(seed, label):
    key = zlib.crc32(label.encode())
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), key]))


def draw_support(params, rng):
    """Include each index independently with probability ``p``."""
    return tuple(int(i) for i in np.flatnonzero(rng.random(params.N) < params.p))


def draw_signal(support, params, rng):
    support = tuple(sorted(int(i) for i in support))
    if support and not (0 <= support[0] and support[-1] < params.N):
        raise DomainError("support index out of range")
    values = np.zeros(params.N)
    values[list(support)] = params.mu1 + params.sigma1 * rng.standard_normal(len(support))
    return SparseSignal(support, values)


def draw_matrix(params, rng):
    """M x N matrix with i.i.d. N(0, 1/M) entries (unit expected column norm)."""
    return rng.standard_normal((params.M, params.N)) / math.sqrt(params.M)


def generate_instance(params, seed):
    """One draw of ``y = A x + e``.

    Each component gets its own generator derived from ``seed`` and a fixed
    label, so the support, signal, matrix and noise streams do not depend on
    the order in which they are drawn.
    """
    support = draw_support(params, _label_rng(seed, "support"))
    signal = draw_signal(support, params, _label_rng(seed, "signal"))
    A = draw_matrix(params, _label_rng(seed, "matrix"))
    noise = params.sigma_e * _label_rng(seed, "noise").standard_normal(params.M)
    y = A @ signal.values + noise
    return Instance(params, A, signal, noise, y, seed)


def _gram_extremes(A, supports, method):
    """Extreme squared singular values of ``A[:, S]`` for each row of ``supports``."""
    sub = A[:, supports]  # (M, B, k)
    sub = np.moveaxis(sub, 1, 0)  # (B, M, k)
    if method == "jacobi":
        sv = singular_values_batched(sub)
        lo, hi = sv[:, -1] ** 2, sv[:, 0] ** 2
        if sub.shape[-1] > sub.shape[-2]:
            lo = np.zeros_like(lo)
        return lo, hi
    gram = np.swapaxes(sub, 1, 2) @ sub
    eig = np.linalg.eigvalsh(gram)
    return np.maximum(eig[:, 0], 0.0), eig[:, -1]


def _deviation(lo, hi):
    return float(max(np.max(hi - 1.0, initial=-np.inf), np.max(1.0 - lo, initial=-np.inf)))


def estimate_rip(A, k, mode="exhaustive", n_samples=1000, rng=None, *, method="lapack",
                 cap=RIP_ENUMERATION_CAP):
    """Estimate the RIP constant of ``A`` at sparsity level ``k``.

    Parameters
    ----------
    A : array_like, shape (M, N)
    k : int
        Sparsity level, ``0 <= k <= N``.
    mode : {"exhaustive", "sampled"}
        ``"exhaustive"`` visits every size-``k`` support and returns the exact
        constant; smaller supports are covered by eigenvalue interlacing.
        ``"sampled"`` checks ``n_samples`` uniformly random supports and
        returns a lower bound.
    method : {"lapack", "jacobi"}
        Eigen-solver for the per-support Gram matrices.

    Raises
    ------
    EnumerationLimitError
        When ``C(N, k)`` exceeds ``cap`` in exhaustive mode.
    """
    A = as_dense(A)
    N = A.shape[1]
    k = int(k)
    if not 0 <= k <= N:
        raise DomainError(f"sparsity level {k} outside [0, {N}]")
    if k == 0:
        return RipEstimate(0, 0.0, True, 1)
    if mode == "exhaustive":
        total = math.comb(N, k)
        if total > cap:
            raise EnumerationLimitError(
                f"C({N},{k}) = {total} supports exceeds the cap of {cap}; use sampled mode"
            )
        eps = -np.inf
        it = combinations(range(N), k)
        done = 0
        while done < total:
            chunk = np.fromiter(
                (i for s in _take(it, _RIP_CHUNK) for i in s), dtype=np.intp
            ).reshape(-1, k)
            done += len(chunk)
            eps = max(eps, _deviation(*_gram_extremes(A, chunk, method)))
        return RipEstimate(k, max(eps, 0.0), True, total)
    if mode == "sampled":
        if rng is None:
            rng = np.random.default_rng(0)
        keys = rng.random((int(n_samples), N))
        supports = np.sort(np.argsort(keys, axis=1)[:, :k], axis=1)
        eps = _deviation(*_gram_extremes(A, supports, method))
        return RipEstimate(k, max(eps, 0.0), False, int(n_samples))
    raise DomainError(f"unknown RIP mode {mode!r}")


def _take(it, n):
    for _, item in zip(range(n), it):
        yield item
