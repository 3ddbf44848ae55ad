"""Dense linear-algebra kernels.

Everything here works on float64 numpy arrays.  The factorizations are
written out explicitly (one-sided Jacobi for the SVD, column Cholesky for
SPD systems) and accept an optional leading batch axis so that exhaustive
searches can evaluate thousands of small problems per call.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

SVD_MAX_SWEEPS = 80
_JACOBI_TOL = 1e-15
_SYM_TOL = 1e-10


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD ``A = left_vectors @ diag(singular_values) @ right_vectors.T``.

    ``left_vectors`` is M x k, ``right_vectors`` is k x k and the singular
    values are sorted in descending order.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def as_dense(A, name="matrix"):
    """Validate and return ``A`` as a finite 2-D float64 array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DomainError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def _jacobi_sweeps(W, V=None):
    """Orthogonalize the columns of ``W`` (shape (..., m, n)) in place.

    Plane rotations are applied to column pairs until every pair is
    orthogonal to working precision.  When ``V`` is given the same rotations
    are accumulated into it.
    """
    n = W.shape[-1]
    # rows of Wt / Vt are the columns of W / V, contiguous in memory
    Wt = np.ascontiguousarray(np.swapaxes(W, -1, -2))
    Vt = None if V is None else np.ascontiguousarray(np.swapaxes(V, -1, -2))
    norms = np.einsum("...ij,...ij->...i", Wt, Wt)
    # columns this small relative to the whole matrix count as exact zeros
    floor = 1e-30 * norms.sum(axis=-1)
    converged = False
    for sweep in range(SVD_MAX_SWEEPS):
        if sweep % 4 == 3:
            # refresh against drift from the incremental updates
            norms = np.einsum("...ij,...ij->...i", Wt, Wt)
        worst = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp = Wt[..., p, :]
                wq = Wt[..., q, :]
                alpha = norms[..., p]
                beta = norms[..., q]
                gamma = np.einsum("...i,...i->...", wp, wq)
                with np.errstate(divide="ignore", invalid="ignore"):
                    off = np.where(
                        (alpha > floor) & (beta > floor),
                        np.abs(gamma) / np.sqrt(alpha * beta),
                        0.0,
                    )
                worst = max(worst, float(np.max(off, initial=0.0)))
                rotate = off > _JACOBI_TOL
                if not np.any(rotate):
                    continue
                safe_gamma = np.where(rotate, gamma, 1.0)
                zeta = (beta - alpha) / (2.0 * safe_gamma)
                t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                t = np.where(rotate, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                c_ = c[..., None]
                s_ = s[..., None]
                new_p = c_ * wp - s_ * wq
                Wt[..., q, :] = s_ * wp + c_ * wq
                Wt[..., p, :] = new_p
                norms[..., p] = alpha - t * gamma
                norms[..., q] = beta + t * gamma
                if Vt is not None:
                    vp = Vt[..., p, :]
                    vq = Vt[..., q, :]
                    new_vp = c_ * vp - s_ * vq
                    Vt[..., q, :] = s_ * vp + c_ * vq
                    Vt[..., p, :] = new_vp
        if worst <= _JACOBI_TOL:
            converged = True
            break
    W[...] = np.swapaxes(Wt, -1, -2)
    if V is not None:
        V[...] = np.swapaxes(Vt, -1, -2)
    if not converged:
        raise NumericalError(
            f"Jacobi SVD did not converge in {SVD_MAX_SWEEPS} sweeps "
            f"for matrix of shape {W.shape[-2:]}",
            shape=tuple(W.shape[-2:]),
        )


def _complete_basis(U, filled):
    """Replace columns of ``U`` not flagged in ``filled`` with orthonormal
    vectors orthogonal to the flagged ones."""
    m = U.shape[0]
    basis = [U[:, j] for j in range(U.shape[1]) if filled[j]]
    for j in np.flatnonzero(~filled):
        for e in np.eye(m):
            v = e.copy()
            for _ in range(2):
                for b in basis:
                    v -= (b @ v) * b
            norm = np.linalg.norm(v)
            if norm > 1e-6:
                U[:, j] = v / norm
                basis.append(U[:, j])
                break
    return U


def thin_svd(A):
    """Thin singular value decomposition of a tall matrix (rows >= cols).

    Parameters
    ----------
    A : array_like of shape (M, k)
        Finite matrix with ``M >= k``.

    Returns
    -------
    ThinSvd
        Left vectors (M x k), descending singular values and right
        vectors (k x k).

    Raises
    ------
    NumericalError
        If the Jacobi sweeps hit the iteration cap.
    """
    A = as_dense(A)
    m, n = A.shape
    if m < n:
        raise DomainError(f"thin_svd needs rows >= cols, got {A.shape}; transpose first")
    W = A.copy()
    V = np.eye(n)
    if n > 0:
        _jacobi_sweeps(W, V)
    sv = np.linalg.norm(W, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    W = W[:, order]
    V = V[:, order]
    tiny = sv <= sv[0] * 1e-14 if n else np.zeros(0, bool)
    U = np.zeros_like(W)
    U[:, ~tiny] = W[:, ~tiny] / sv[~tiny]
    if np.any(tiny):
        sv[tiny] = np.where(sv[tiny] > 0, sv[tiny], 0.0)
        U = _complete_basis(U, ~tiny)
    return ThinSvd(U, sv, V)


def singular_values_batched(A):
    """Singular values of a stack of tall matrices, shape (..., M, k).

    Returns an array of shape (..., k) sorted descending along the last axis.
    """
    W = np.array(A, dtype=float, copy=True)
    if W.shape[-2] < W.shape[-1]:
        W = np.swapaxes(W, -1, -2).copy()
    if W.shape[-1] > 0:
        _jacobi_sweeps(W)
    sv = np.linalg.norm(W, axis=-2)
    return -np.sort(-sv, axis=-1)


def extreme_singular_values(A):
    """Smallest and largest singular values of ``A`` (any shape)."""
    A = as_dense(A)
    if A.size == 0:
        return 0.0, 0.0
    if A.shape[0] < A.shape[1]:
        A = A.T
    sv = thin_svd(A).singular_values
    return float(sv[-1]), float(sv[0])


def cholesky_batched(G):
    """Lower Cholesky factor of a stack of SPD matrices, shape (..., n, n).

    Raises DomainError carrying the first failing pivot index.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[-1]
    L = np.zeros_like(G)
    for j in range(n):
        row = L[..., j, :j]
        d = G[..., j, j] - np.einsum("...i,...i->...", row, row)
        if not np.all(d > 0):
            raise DomainError(f"matrix is not positive definite (pivot {j})", pivot=j)
        ljj = np.sqrt(d)
        L[..., j, j] = ljj
        if j + 1 < n:
            below = G[..., j + 1 :, j] - np.einsum("...ik,...k->...i", L[..., j + 1 :, :j], row)
            L[..., j + 1 :, j] = below / ljj[..., None]
    return L


def _forward(L, b):
    x = np.zeros_like(b)
    for i in range(L.shape[-1]):
        acc = np.einsum("...k,...k->...", L[..., i, :i], x[..., :i])
        x[..., i] = (b[..., i] - acc) / L[..., i, i]
    return x


def _backward_t(L, b):
    # solves L^T x = b
    n = L.shape[-1]
    x = np.zeros_like(b)
    for i in range(n - 1, -1, -1):
        acc = np.einsum("...k,...k->...", L[..., i + 1 :, i], x[..., i + 1 :])
        x[..., i] = (b[..., i] - acc) / L[..., i, i]
    return x


def cho_solve_batched(L, b):
    """Solve ``(L L^T) x = b`` for stacked factors and right-hand sides."""
    b = np.asarray(b, dtype=float)
    return _backward_t(L, _forward(L, b))


def logdet_from_cholesky(L):
    return 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)


def _check_symmetric(G):
    G = as_dense(G)
    if G.shape[0] != G.shape[1]:
        raise DomainError(f"expected a square matrix, got {G.shape}")
    norm = np.linalg.norm(G)
    if np.linalg.norm(G - G.T) > _SYM_TOL * max(norm, 1.0):
        raise DomainError("matrix is not symmetric")
    return G


def logdet_psd(G):
    """Natural log-determinant of a symmetric positive definite matrix,
    computed from the diagonal of its Cholesky factor."""
    G = _check_symmetric(G)
    if G.shape[0] == 0:
        return 0.0
    return float(logdet_from_cholesky(cholesky_batched(G)))


def solve_psd(G, b):
    """Solve ``G v = b`` for SPD ``G`` with one step of iterative refinement."""
    G = _check_symmetric(G)
    b = np.asarray(b, dtype=float)
    if b.shape != (G.shape[0],):
        raise DomainError(f"right-hand side shape {b.shape} does not match {G.shape}")
    if G.shape[0] == 0:
        return np.zeros(0)
    L = cholesky_batched(G)
    v = cho_solve_batched(L, b)
    v = v + cho_solve_batched(L, b - G @ v)
    return v
