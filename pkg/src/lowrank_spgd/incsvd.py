"""Thin SVD of ``X + A B^T`` from the thin SVD of ``X``.

The update never forms an m x n matrix: the new directions of ``A`` and ``B``
are orthonormalized against the current bases, a small core matrix ``K`` of
size (r + p) x (r + q) is decomposed, and the bases are rotated by its singular
vectors.  Cost is O((m + n)(r + c)^2 + (r + c)^3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factored import FactoredMatrix, LowRankGradient, zeros

CORE_SIZE_CAP = 512
COMPLEMENT_TOL = 1e-12
TRUNC_TOL = 1e-12


class CoreSizeError(RuntimeError):
    """The core matrix outgrew ``CORE_SIZE_CAP``; the iterate rank is running away."""


@dataclass(frozen=True)
class UpdateDecomposition:
    """Intermediate blocks of one update, kept for inspection and tests."""

    P: np.ndarray
    R_A: np.ndarray
    Q: np.ndarray
    R_B: np.ndarray
    K: np.ndarray


def _complement(U, A, tol):
    """Two-pass projection of A off span(U), then rank-revealing Gram-Schmidt.

    Returns (coef, P, R_A) with ``A ~= U @ coef + P @ R_A``.
    """
    m, c = A.shape
    coef = U.T @ A
    resid = A - U @ coef
    corr = U.T @ resid
    resid -= U @ corr
    coef += corr

    thresh = tol * np.sqrt(np.sum(A * A))
    P = np.empty((m, c))
    p = 0
    has_u = U.shape[1] > 0
    for j in range(c):
        v = resid[:, j].copy()
        for _ in range(2):
            if has_u:
                v -= U @ (U.T @ v)
            if p:
                Pj = P[:, :p]
                v -= Pj @ (Pj.T @ v)
        nrm = np.sqrt(v @ v)
        if nrm > thresh and nrm > 0.0:
            P[:, p] = v / nrm
            p += 1
    P = P[:, :p]
    return coef, P, P.T @ resid


def orthogonal_complement_basis(U, A, tol=COMPLEMENT_TOL):
    """Orthonormal basis ``P`` of the column space of ``(I - U U^T) A`` and ``R_A = P^T (I - U U^T) A``.

    Residual directions with norm below ``tol * ||A||_F`` are treated as lying
    in span(U), so ``P`` may have fewer than ``c`` columns, or none.
    """
    U = np.asarray(U, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if U.shape[0] != A.shape[0]:
        raise ValueError(f"U has {U.shape[0]} rows but A has {A.shape[0]}")
    _, P, R_A = _complement(U, A, tol)
    return P, R_A


def jacobi_svd(K, tol=1e-15, max_sweeps=60):
    """One-sided (Hestenes) Jacobi SVD of a small dense matrix.

    Returns (Uh, s, Vh) with ``K = Uh @ diag(s) @ Vh.T``, ``s`` non-increasing,
    economy shapes (min(a, b) columns).
    """
    K = np.asarray(K, dtype=float)
    a, b = K.shape
    if a < b:
        Vt, s, Ut = jacobi_svd(K.T, tol, max_sweeps)
        return Ut, s, Vt
    W = K.copy()
    V = np.eye(b)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(b - 1):
            for j in range(i + 1, b):
                alpha = W[:, i] @ W[:, i]
                beta = W[:, j] @ W[:, j]
                gamma = W[:, i] @ W[:, j]
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta)) if zeta else 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                wi = W[:, i].copy()
                W[:, i] = cs * wi - sn * W[:, j]
                W[:, j] = sn * wi + cs * W[:, j]
                vi = V[:, i].copy()
                V[:, i] = cs * vi - sn * V[:, j]
                V[:, j] = sn * vi + cs * V[:, j]
        if not rotated:
            break
    s = np.linalg.norm(W, axis=0)
    order = np.argsort(-s, kind="stable")
    s, W, V = s[order], W[:, order], V[:, order]
    Uh = np.zeros_like(W)
    nz = s > 0
    Uh[:, nz] = W[:, nz] / s[nz]
    if not np.all(nz):
        # complete the left basis for zero singular values
        q, _ = np.linalg.qr(np.hstack([Uh[:, nz], np.eye(a)]))
        Uh[:, ~nz] = q[:, nz.sum(): b]
    return Uh, s, V


def core_svd(K, method="lapack", cap=CORE_SIZE_CAP):
    """Economy SVD of the small core matrix, keeping only nonzero singular values.

    ``method`` is ``"lapack"`` (default) or ``"jacobi"``.
    """
    K = np.asarray(K, dtype=float)
    if max(K.shape) > cap:
        raise CoreSizeError(f"core matrix {K.shape} exceeds cap {cap}; iterate rank is running away")
    if K.size == 0:
        return np.zeros((K.shape[0], 0)), np.zeros(0), np.zeros((K.shape[1], 0))
    if method == "lapack":
        Uh, s, Vht = np.linalg.svd(K, full_matrices=False)
        Vh = Vht.T
    elif method == "jacobi":
        Uh, s, Vh = jacobi_svd(K)
    else:
        raise ValueError(f"unknown core SVD method {method!r}")
    keep = s > 0
    return Uh[:, keep], s[keep], Vh[:, keep]


def decompose_update(F, A, B, tol=COMPLEMENT_TOL):
    """Build the blocks ``P, R_A, Q, R_B, K`` for ``F + A B^T``."""
    cu, P, R_A = _complement(F.U, A, tol)
    cv, Q, R_B = _complement(F.V, B, tol)
    r = F.rank
    K = np.zeros((r + P.shape[1], r + Q.shape[1]))
    K[:r, :r] = np.diag(F.sigma)
    K += np.vstack([cu, R_A]) @ np.vstack([cv, R_B]).T
    return UpdateDecomposition(P, R_A, Q, R_B, K)


def incremental_update(F, G, scale=1.0, trunc_tol=TRUNC_TOL, core_method="lapack",
                       complement_tol=COMPLEMENT_TOL):
    """Thin SVD of ``F + scale * G.A @ G.B.T``.

    Singular values below ``trunc_tol * sigma_max`` are dropped, where
    ``sigma_max`` is the larger of the input's and the result's leading singular
    value (so exact cancellations leave no roundoff directions behind).
    ``scale == 0`` returns ``F`` itself.
    """
    if not isinstance(G, LowRankGradient):
        G = LowRankGradient(*G)
    if G.shape != F.shape:
        raise ValueError(f"update shape {G.shape} does not match matrix shape {F.shape}")
    if not (np.all(np.isfinite(G.A)) and np.all(np.isfinite(G.B))):
        raise ValueError("non-finite entries in the update factors")
    if not np.isfinite(scale):
        raise ValueError("non-finite update scale")
    if scale == 0 or G.c == 0:
        return F
    d = decompose_update(F, scale * G.A, G.B, complement_tol)
    Uh, s, Vh = core_svd(d.K, method=core_method)
    if s.size == 0:
        return zeros(F.m, F.n)
    ref = max(s[0], F.sigma[0]) if F.rank else s[0]
    keep = s > trunc_tol * ref
    if not keep.any():
        return zeros(F.m, F.n)
    Uh, s, Vh = Uh[:, keep], s[keep], Vh[:, keep]
    r = F.rank
    U = F.U @ Uh[:r] + d.P @ Uh[r:]
    V = F.V @ Vh[:r] + d.Q @ Vh[r:]
    return FactoredMatrix(U, s, V)


def _orthonormalize(X):
    """Two passes of modified Gram-Schmidt; returns (Q, R) with X = Q R."""
    Q = X.copy()
    k = Q.shape[1]
    R = np.eye(k)
    for _ in range(2):
        Rp = np.zeros((k, k))
        for j in range(k):
            for i in range(j):
                Rp[i, j] = Q[:, i] @ Q[:, j]
                Q[:, j] -= Rp[i, j] * Q[:, i]
            Rp[j, j] = np.linalg.norm(Q[:, j])
            Q[:, j] /= Rp[j, j]
        R = Rp @ R
    return Q, R


def reorthogonalize(F):
    """Re-orthonormalize drifted bases, folding the correction into a small core SVD."""
    if F.rank == 0:
        return F
    Qu, Ru = _orthonormalize(F.U)
    Qv, Rv = _orthonormalize(F.V)
    Uh, s, Vh = core_svd(Ru @ (F.sigma[:, None] * Rv.T))
    return FactoredMatrix(Qu @ Uh, s, Qv @ Vh)
