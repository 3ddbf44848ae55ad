"""Support-recovery metrics and operator-norm checks on the measurement matrix."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .linalg import as_dense, cho_solve_batched, cholesky_batched, extreme_singular_values, thin_svd

_REL_TOL = 1e-9
_ABS_TOL = 1e-12


@dataclass(frozen=True)
class SupportPartition:
    correct: tuple
    missed: tuple
    false_alarms: tuple
    true_rejections: tuple


@dataclass(frozen=True)
class ProjectionReport:
    subspace_support: tuple
    parallel_energy: float
    orthogonal_energy: float


@dataclass(frozen=True)
class BoundCheck:
    name: str
    measured: float
    bound: float
    relation: str  # "<=" or ">="
    binding: bool
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class PropositionReport:
    epsilon: float
    support_i: tuple
    support_j: tuple
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {
            "epsilon": self.epsilon,
            "support_i": list(self.support_i),
            "support_j": list(self.support_j),
            "passed": self.passed,
            "checks": [c.__dict__ for c in self.checks],
        }


def partition_supports(true_S, est_S, N):
    """Split ``0..N-1`` into correct / missed / false-alarm / rejected indices."""
    t = {int(i) for i in true_S}
    e = {int(i) for i in est_S}
    if any(not 0 <= i < N for i in t | e):
        raise DomainError(f"support indices must lie in 0..{N - 1}")
    everything = set(range(N))
    return SupportPartition(
        tuple(sorted(t & e)),
        tuple(sorted(t - e)),
        tuple(sorted(e - t)),
        tuple(sorted(everything - t - e)),
    )


def missed_energy(signal, part):
    idx = list(part.missed)
    return float(np.sum(signal.values[idx] ** 2))


def column_space_basis(A_S):
    """Orthonormal basis (M x rank) for the column span of ``A_S``."""
    A_S = as_dense(A_S)
    m, k = A_S.shape
    if k == 0:
        return np.zeros((m, 0))
    if m >= k:
        svd = thin_svd(A_S)
        U, sv = svd.left_vectors, svd.singular_values
    else:
        svd = thin_svd(A_S.T)
        U, sv = svd.right_vectors, svd.singular_values
    rank = int(np.sum(sv > sv[0] * max(m, k) * np.finfo(float).eps)) if sv[0] > 0 else 0
    return U[:, :rank]


def project_noise(A_S, e, support=()):
    """Energy of ``e`` inside and orthogonal to the column span of ``A_S``."""
    e = np.asarray(e, dtype=float)
    U = column_space_basis(A_S)
    if U.shape[0] != e.shape[0]:
        raise DomainError(f"noise length {e.shape[0]} does not match {U.shape[0]} rows")
    coords = U.T @ e
    par = float(coords @ coords)
    total = float(e @ e)
    return ProjectionReport(tuple(support), par, max(total - par, 0.0))


def _complement_apply(U_bar, X):
    # (I - U U^T) X shares its singular values with U_perp^T X
    return X - U_bar @ (U_bar.T @ X)


def _phi_inverse_apply(A_i, X, params):
    M = X.shape[0]
    Phi = params.sigma1**2 * (A_i @ A_i.T) + params.sigma_e**2 * np.eye(M)
    L = cholesky_batched(0.5 * (Phi + Phi.T))
    return cho_solve_batched(L, X.T).T


def _upper(name, measured, bound, binding, note=""):
    ok = (not binding) or measured <= bound * (1 + _REL_TOL) + _ABS_TOL
    return BoundCheck(name, measured, bound, "<=", binding, ok, note)


def _lower(name, measured, bound, binding, note=""):
    ok = (not binding) or measured >= bound * (1 - _REL_TOL) - _ABS_TOL
    return BoundCheck(name, measured, bound, ">=", binding, ok, note)


def check_propositions(A, S_i, S_j, params, epsilon):
    """Measure the five near-orthogonality quantities for disjoint column
    sets and compare each with its bound at RIP constant ``epsilon``.

    (a) ``||A_i' A_j||``                   <= eps
    (b) ``||Ubar_i' A_j||``                <= eps / sqrt(1 - eps)
    (c) ``sigma_min(Uperp_i' A_j)``        >= sqrt((1 - 2 eps) / (1 - eps))
    (d) ``sigma_min(Uperp_i' Ubar_j)``     >= sqrt((1 - 2 eps) / (1 - eps^2))
    (e) ``sigma_min(A_j' Phi(S_i)^-1 A_j)`` >= (1 - 2 eps) / ((1 - eps) sigma_e^2)

    Bounds that are undefined or nonpositive at the given ``epsilon``
    (eps >= 1 for (b), eps >= 1/2 for (c)-(e)) are reported as non-binding.
    The lower bounds are only meaningful when ``|S_j| <= M - |S_i|``.
    """
    A = as_dense(A)
    Si = tuple(sorted(int(i) for i in S_i))
    Sj = tuple(sorted(int(j) for j in S_j))
    if set(Si) & set(Sj):
        raise DomainError(f"supports overlap: {sorted(set(Si) & set(Sj))}")
    eps = float(epsilon)
    report = PropositionReport(eps, Si, Sj, [])
    names = ["cross_gram_norm", "parallel_projection_norm", "orthogonal_projection_min",
             "subspace_angle_min", "phi_inverse_quadratic_min"]
    if not Si or not Sj:
        for name in names:
            report.checks.append(BoundCheck(name, 0.0, 0.0, "-", False, True, "empty support"))
        return report

    A_i = A[:, list(Si)]
    A_j = A[:, list(Sj)]
    U_i = column_space_basis(A_i)
    U_j = column_space_basis(A_j)
    half_ok = eps < 0.5

    _, a = extreme_singular_values(A_i.T @ A_j)
    report.checks.append(_upper(names[0], a, eps, True))

    _, b = extreme_singular_values(U_i.T @ A_j)
    b_bound = eps / math.sqrt(1 - eps) if eps < 1 else math.inf
    report.checks.append(_upper(names[1], b, b_bound, eps < 1, "" if eps < 1 else "eps >= 1"))

    note = "" if half_ok else "eps >= 1/2: bound non-binding"
    c, _ = extreme_singular_values(_complement_apply(U_i, A_j))
    c_bound = math.sqrt((1 - 2 * eps) / (1 - eps)) if half_ok else 0.0
    report.checks.append(_lower(names[2], c, c_bound, half_ok, note))

    d, _ = extreme_singular_values(_complement_apply(U_i, U_j))
    d_bound = math.sqrt((1 - 2 * eps) / (1 - eps**2)) if half_ok else 0.0
    report.checks.append(_lower(names[3], d, d_bound, half_ok, note))

    K = A_j.T @ _phi_inverse_apply(A_i, A_j, params)
    e_min, _ = extreme_singular_values(0.5 * (K + K.T))
    e_bound = (1 - 2 * eps) / ((1 - eps) * params.sigma_e**2) if half_ok else 0.0
    report.checks.append(_lower(names[4], e_min, e_bound, half_ok, note))
    return report
