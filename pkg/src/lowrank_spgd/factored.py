"""Thin-SVD matrix representation and the algebra that stays in factored form.

Every iterate of the solver is a :class:`FactoredMatrix` ``U @ diag(sigma) @ V.T``
with column-orthonormal ``U`` (m x r) and ``V`` (n x r).  Nothing in this module
allocates an m x n buffer except the explicit dense bridges :func:`from_dense`
and :func:`to_dense`, which are fenced by :data:`DENSE_SIZE_CAP`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-10
DENSE_SIZE_CAP = 4_000_000


class DenseSizeError(ValueError):
    """A dense bridge was asked to materialize more than ``DENSE_SIZE_CAP`` entries."""


def _check_dense_size(m, n):
    if m * n > DENSE_SIZE_CAP:
        raise DenseSizeError(
            f"refusing to densify a {m}x{n} matrix ({m * n} entries > cap {DENSE_SIZE_CAP})"
        )


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FactoredMatrix:
    """An m x n matrix held as its thin SVD.

    ``sigma`` is strictly positive and non-increasing; rank 0 (the zero matrix)
    is represented by empty blocks of shape (m, 0), (0,), (n, 0).
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        V = np.asarray(self.V, dtype=float)
        s = np.asarray(self.sigma, dtype=float).reshape(-1)
        if U.ndim != 2 or V.ndim != 2:
            raise ValueError("U and V must be 2-D blocks")
        r = s.shape[0]
        if U.shape[1] != r or V.shape[1] != r:
            raise ValueError(f"block widths {U.shape[1]}, {V.shape[1]} do not match rank {r}")
        if r > min(U.shape[0], V.shape[0]):
            raise ValueError("rank exceeds min(m, n)")
        if r and not s.min() > 0:
            raise ValueError("singular values must be strictly positive")
        if r > 1 and np.any(s[1:] > s[:-1]):
            order = np.argsort(-s, kind="stable")
            s, U, V = s[order], U[:, order], V[:, order]
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "V", _frozen(V))
        object.__setattr__(self, "sigma", _frozen(s))

    @property
    def m(self):
        return self.U.shape[0]

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def rank(self):
        return self.sigma.shape[0]

    def __repr__(self):
        return f"FactoredMatrix(m={self.m}, n={self.n}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class LowRankGradient:
    """Stochastic gradient sketch ``A @ B.T`` with A (m x c) and B (n x c); never densified."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if B.ndim == 1:
            B = B[:, None]
        if A.shape[1] != B.shape[1]:
            raise ValueError(f"sketch widths differ: A has {A.shape[1]}, B has {B.shape[1]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def c(self):
        return self.A.shape[1]

    @property
    def shape(self):
        return (self.A.shape[0], self.B.shape[0])

    def frobenius_norm_sq(self):
        # ||A B^T||_F^2 = tr((A^T A)(B^T B)), computed on c x c blocks
        return float(np.sum((self.A.T @ self.A) * (self.B.T @ self.B)))


def zeros(m, n):
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    return FactoredMatrix(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))


def from_dense(D, tol=1e-12):
    """Thin SVD of a dense matrix, dropping singular values below ``tol * sigma_max``.

    Test-only bridge; refuses inputs above the dense-size cap.
    """
    D = np.asarray(D, dtype=float)
    m, n = D.shape
    _check_dense_size(m, n)
    if D.size == 0 or not np.any(D):
        return zeros(m, n)
    U, s, Vt = np.linalg.svd(D, full_matrices=False)
    keep = s > tol * s[0]
    return FactoredMatrix(U[:, keep], s[keep], Vt[keep].T)


def to_dense(F):
    _check_dense_size(F.m, F.n)
    return (F.U * F.sigma) @ F.V.T


def nuclear_norm(F):
    return float(np.sum(F.sigma))


def frobenius_norm(F):
    return float(np.sqrt(np.sum(F.sigma**2)))


def multiply_right(F, Y):
    """``F @ Y`` for a dense n x k block, at O((m + n) r k) cost."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != F.n:
        raise ValueError(f"Y has {Y.shape[0]} rows, expected {F.n}")
    if F.rank == 0:
        return np.zeros((F.m, Y.shape[1]))
    return F.U @ (F.sigma[:, None] * (F.V.T @ Y))


def multiply_left(F, X):
    """``F.T @ X`` for a dense m x k block."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != F.m:
        raise ValueError(f"X has {X.shape[0]} rows, expected {F.m}")
    if F.rank == 0:
        return np.zeros((F.n, X.shape[1]))
    return F.V @ (F.sigma[:, None] * (F.U.T @ X))


def inner(F1, F2):
    """Frobenius inner product <F1, F2> via r1 x r2 blocks."""
    if F1.shape != F2.shape:
        raise ValueError("shape mismatch")
    if F1.rank == 0 or F2.rank == 0:
        return 0.0
    cu = F1.U.T @ F2.U
    cv = F1.V.T @ F2.V
    return float(np.sum((F1.sigma[:, None] * cu * F2.sigma[None, :]) * cv))


def frobenius_distance(F1, F2):
    """``||F1 - F2||_F`` without densifying.

    Orthonormalizes the stacked bases so that small distances between large
    matrices are not lost to cancellation.
    """
    if F1.shape != F2.shape:
        raise ValueError("shape mismatch")
    if F1.rank == 0:
        return frobenius_norm(F2)
    if F2.rank == 0:
        return frobenius_norm(F1)
    _, Ru = np.linalg.qr(np.hstack([F1.U, F2.U]))
    _, Rv = np.linalg.qr(np.hstack([F1.V, F2.V]))
    core = Ru @ (np.concatenate([F1.sigma, -F2.sigma])[:, None] * Rv.T)
    return float(np.linalg.norm(core))


def scale(F, alpha):
    """``alpha * F``; a negative ``alpha`` flips the sign of ``U``."""
    if alpha == 0 or F.rank == 0:
        return zeros(F.m, F.n)
    U = F.U if alpha > 0 else -F.U
    return FactoredMatrix(U, abs(alpha) * F.sigma, F.V)


def orthonormality_error(F):
    """Max-entry deviation of ``U.T U`` and ``V.T V`` from the identity."""
    if F.rank == 0:
        return 0.0
    eye = np.eye(F.rank)
    return float(max(np.max(np.abs(F.U.T @ F.U - eye)), np.max(np.abs(F.V.T @ F.V - eye))))


def validate(F, tol=ORTHO_TOL):
    """Raise ``AssertionError`` if ``F`` breaks any representation invariant."""
    err = orthonormality_error(F)
    if err > tol:
        raise AssertionError(f"factors not orthonormal: max deviation {err:.3e} > {tol:.1e}")
    if F.rank and not np.all(np.isfinite(F.sigma)):
        raise AssertionError("non-finite singular values")
    if F.rank and (np.any(F.sigma <= 0) or np.any(np.diff(F.sigma) > 0)):
        raise AssertionError("singular values must be positive and non-increasing")
    return F
