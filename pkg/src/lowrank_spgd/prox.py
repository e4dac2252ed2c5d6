"""Proximal operators of the nuclear norm acting on factored matrices.

* :func:`svs` -- singular value shrinkage, the prox of ``lam * ||.||_*``.
* :func:`project_frobenius` -- metric projection onto ``{X : ||X||_F <= R}``.
* :func:`prox_nuclear` -- shrink then project; exact prox over either domain.
* :func:`kkt_dual_check` -- closed-form dual certificate for the ball case.

All of them touch only ``sigma`` (and select columns), so they cost O(r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factored import FactoredMatrix, frobenius_norm, zeros


@dataclass(frozen=True)
class DomainSpec:
    """Feasible set: all of R^{m x n} (``radius=None``) or a Frobenius ball."""

    radius: float | None = None

    def __post_init__(self):
        if self.radius is not None and not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @classmethod
    def unbounded(cls):
        return cls(None)

    @classmethod
    def frobenius_ball(cls, radius):
        return cls(float(radius))

    @property
    def kind(self):
        return "unbounded" if self.radius is None else "frobenius_ball"

    @property
    def bounded(self):
        return self.radius is not None

    def contains(self, F, slack=0.0):
        return self.radius is None or frobenius_norm(F) <= self.radius + slack


@dataclass(frozen=True)
class KktReport:
    mu_star: float
    shrunk_norm: float
    scale: float
    primal_dual_gap: float
    primal: float
    dual: float

    @property
    def active(self):
        return self.mu_star > 0


def svs(F, lam):
    """Singular value shrinkage ``D_lam[F]``.

    Directions with ``sigma_i <= lam`` are dropped (a tie shrinks to exactly
    zero and is not stored).
    """
    if lam < 0:
        raise ValueError(f"shrinkage threshold must be non-negative, got {lam}")
    if lam == 0 or F.rank == 0:
        return F
    keep = int(np.count_nonzero(F.sigma > lam))
    if keep == 0:
        return zeros(F.m, F.n)
    return FactoredMatrix(F.U[:, :keep], F.sigma[:keep] - lam, F.V[:, :keep])


def project_frobenius(F, R):
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    norm = frobenius_norm(F)
    if norm <= R:
        return F
    return FactoredMatrix(F.U, F.sigma * (R / norm), F.V)


def prox_nuclear(F, lam, eta, domain=DomainSpec()):
    """Solve ``argmin_{X in domain} 1/2 ||X - F||_F^2 + lam * eta * ||X||_*``."""
    if not eta > 0:
        raise ValueError(f"step size must be positive, got {eta}")
    out = svs(F, lam * eta)
    if domain.bounded:
        out = project_frobenius(out, domain.radius)
    return out


def _shrink_objective(sigma, x, lam):
    return 0.5 * float(np.sum((sigma - x) ** 2)) + lam * float(np.sum(x))


def dual_value(sigma, lam, R, mu):
    """Lagrange dual ``L(mu)`` of the ball-constrained prox, from the singular values of Y."""
    shrunk_sq = float(np.sum(np.maximum(sigma - lam, 0.0) ** 2))
    return -shrunk_sq / (2.0 * (1.0 + 2.0 * mu)) - mu * R * R + 0.5 * float(np.sum(sigma**2))


def kkt_dual_check(F, lam, R):
    """Optimal dual variable and primal-dual gap for ``min_{||X||_F <= R} 1/2||X-F||^2 + lam||X||_*``.

    When the constraint is inactive the dual variable is zero and the gap is
    reported as zero.
    """
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    if lam < 0:
        raise ValueError(f"shrinkage threshold must be non-negative, got {lam}")
    sigma = F.sigma
    shrunk = np.maximum(sigma - lam, 0.0)
    s = float(np.sqrt(np.sum(shrunk**2)))
    if s <= R:
        primal = _shrink_objective(sigma, shrunk, lam)
        return KktReport(0.0, s, 1.0, 0.0, primal, primal)
    mu = 0.5 * (s / R - 1.0)
    scale = R / s
    primal = _shrink_objective(sigma, scale * shrunk, lam)
    dual = dual_value(sigma, lam, R, mu)
    return KktReport(mu, s, scale, primal - dual, primal, dual)
