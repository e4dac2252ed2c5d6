"""Verification suites exposed through ``lowrank-spgd check``.

Each check compares the factored code path against an independent dense
computation and returns one :class:`CheckResult` per property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import factored as fm
from .incsvd import incremental_update
from .probing import Distribution, check_isotropy
from .problems import random_factored
from .prox import DomainSpec, kkt_dual_check, prox_nuclear

ISOTROPY_TOL = {Distribution.RADEMACHER: 0.05, Distribution.SCALED_IDENTITY: 0.05, Distribution.GAUSSIAN: 0.08}


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float

    @property
    def passed(self):
        return bool(self.value <= self.tol)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.value:.3e} (tol {self.tol:.1e})"


def dense_prox(Y, lam, radius=None):
    """Brute-force prox: full dense SVD, shrink, then project onto the ball."""
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    X = (U * np.maximum(s - lam, 0.0)) @ Vt
    if radius is not None:
        nrm = np.linalg.norm(X)
        if nrm > radius:
            X *= radius / nrm
    return X


def prox_oracle(trials=100, seed=0, m=20, n=15, tol=1e-9):
    """Max relative deviation of the factored prox from :func:`dense_prox`."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        D = rng.standard_normal((m, n)) * rng.uniform(0.5, 3.0)
        F = fm.from_dense(D, tol=0.0)
        s = np.linalg.svd(D, compute_uv=False)
        lam_eta = rng.uniform(0.0, s[0])
        eta = rng.uniform(0.1, 1.0)
        shrunk_norm = np.sqrt(np.sum(np.maximum(s - lam_eta, 0.0) ** 2))
        radius = None if rng.random() < 0.3 else rng.uniform(0.2, 1.5) * max(shrunk_norm, 1e-3)
        domain = DomainSpec(radius)
        got = fm.to_dense(prox_nuclear(F, lam_eta / eta, eta, domain))
        want = dense_prox(D, lam_eta, radius)
        denom = np.linalg.norm(want)
        err = np.linalg.norm(got - want) / denom if denom > 0 else np.linalg.norm(got)
        worst = max(worst, err)
    return [CheckResult(f"prox-oracle max relative error over {trials} trials", worst, tol)]


def isotropy(distribution="rademacher", n=8, k=8, samples=100_000, seed=0, tol=None):
    dist = Distribution.parse(distribution)
    tol = ISOTROPY_TOL[dist] if tol is None else tol
    dev = check_isotropy(dist, n, k, samples, seed)
    return [CheckResult(f"isotropy {dist.value} n={n} k={k} samples={samples}", dev, tol)]


def kkt(active=True, trials=100, seed=0, m=12, n=10):
    """Dual certificate on random ball-constrained prox instances."""
    rng = np.random.default_rng(seed)
    worst_boundary = 0.0
    worst_gap = 0.0
    worst_mu = 0.0
    for _ in range(trials):
        r = int(rng.integers(1, min(m, n) + 1))
        F = random_factored(m, n, rng.uniform(0.1, 5.0, size=r), rng)
        lam = rng.uniform(0.0, 0.5 * F.sigma[0])
        shrunk = np.sqrt(np.sum(np.maximum(F.sigma - lam, 0.0) ** 2))
        if active:
            R = rng.uniform(0.05, 0.95) * shrunk
        else:
            R = shrunk * rng.uniform(1.0, 3.0) + 1e-12
        rep = kkt_dual_check(F, lam, R)
        if active:
            worst_boundary = max(worst_boundary, abs(rep.scale * rep.shrunk_norm - R))
            # independent dual: evaluate the Lagrangian at its closed-form minimizer, densely
            Y = fm.to_dense(F)
            mu = rep.mu_star
            X = dense_prox(Y / (1 + 2 * mu), lam / (1 + 2 * mu))
            lagr = (0.5 * np.sum((X - Y) ** 2) + lam * np.linalg.svd(X, compute_uv=False).sum()
                    + mu * (np.sum(X**2) - R * R))
            Xs = dense_prox(Y, lam, R)
            primal = 0.5 * np.sum((Xs - Y) ** 2) + lam * np.linalg.svd(Xs, compute_uv=False).sum()
            worst_gap = max(worst_gap, abs(primal - lagr) / (1 + abs(primal)),
                            abs(rep.primal_dual_gap) / (1 + abs(rep.primal)))
        else:
            worst_mu = max(worst_mu, rep.mu_star)
    if active:
        return [
            CheckResult(f"kkt boundary |scale*||D(Y)|| - R| over {trials} active trials", worst_boundary, 1e-12),
            CheckResult(f"kkt relative primal-dual gap over {trials} active trials", worst_gap, 1e-9),
        ]
    return [CheckResult(f"kkt mu_star on {trials} inactive trials", worst_mu, 0.0)]


def incsvd_reconstruction(chains=100, length=50, seed=0, m=30, n=25, max_rank=8, max_width=4):
    """Chains of updates inside a fixed rank-``max_rank`` subspace against dense accumulation.

    Every fifth step uses an update lying entirely in the current spans
    (the p = 0 / q = 0 branch).
    """
    rng = np.random.default_rng(seed)
    worst_rec = 0.0
    worst_orth = 0.0
    degenerate = 0
    for _ in range(chains):
        Ub, _ = np.linalg.qr(rng.standard_normal((m, max_rank)))
        Vb, _ = np.linalg.qr(rng.standard_normal((n, max_rank)))
        r0 = int(rng.integers(0, max_rank + 1))
        F = fm.zeros(m, n) if r0 == 0 else fm.from_dense(
            Ub[:, :r0] @ rng.standard_normal((r0, r0)) @ Vb[:, :r0].T, tol=0.0)
        dense = fm.to_dense(F)
        for step in range(length):
            c = int(rng.integers(1, max_width + 1))
            if step % 5 == 4 and F.rank:
                A = F.U @ rng.standard_normal((F.rank, c))
                B = F.V @ rng.standard_normal((F.rank, c))
                degenerate += 1
            else:
                A = Ub @ rng.standard_normal((max_rank, c))
                B = Vb @ rng.standard_normal((max_rank, c))
            s = rng.uniform(-2.0, 2.0)
            F = incremental_update(F, (A, B), s)
            dense = dense + s * A @ B.T
        worst_rec = max(worst_rec, np.linalg.norm(fm.to_dense(F) - dense) / max(np.linalg.norm(dense), 1e-300))
        worst_orth = max(worst_orth, fm.orthonormality_error(F))
    return [
        CheckResult(f"incsvd relative reconstruction over {chains} chains x {length} updates", worst_rec, 1e-8),
        CheckResult("incsvd factor orthonormality (max entry)", worst_orth, 1e-9),
        CheckResult(f"incsvd degenerate in-span updates exercised ({degenerate})", 0.0 if degenerate else 1.0, 0.0),
    ]


CHECKS = {
    "prox-oracle": prox_oracle,
    "isotropy": isotropy,
    "kkt": kkt,
    "incsvd-reconstruction": incsvd_reconstruction,
}
