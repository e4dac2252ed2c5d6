"""Stochastic gradient oracles returning low-rank sketches.

An oracle only has to produce ``LowRankGradient`` objects whose expectation is
a subgradient of ``f`` at ``W``.  Problems that can apply their gradient to a
thin block (``gradient_times``) get an unbiased sketch ``(G Y) Y^T`` for free
through :func:`sketch_subgradient`, without ever forming ``G``.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from . import factored as fm
from .factored import FactoredMatrix, LowRankGradient
from .probing import DEFAULT_SKETCH_WIDTH, Distribution, ProbingMatrix, generate
from .prox import DomainSpec, prox_nuclear


@runtime_checkable
class Oracle(Protocol):
    shape: tuple
    strong_convexity: float

    def stochastic_grad(self, W, seed=None, k=None) -> LowRankGradient: ...

    def exact_objective(self, W) -> float: ...


def random_factored(m, n, sigma, seed=None):
    """Random matrix with Haar-like singular vectors and prescribed singular values."""
    rng = np.random.default_rng(seed)
    sigma = np.sort(np.asarray(sigma, dtype=float))[::-1]
    r = sigma.size
    U, _ = np.linalg.qr(rng.standard_normal((m, r)))
    V, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return FactoredMatrix(U, sigma, V)


def _diff_factors(W, M):
    """Stacked (U, s, V) with ``W - M = U diag(s) V^T``; not orthonormal."""
    return (np.hstack([W.U, M.U]), np.concatenate([W.sigma, -M.sigma]), np.hstack([W.V, M.V]))


def sketch_subgradient(problem, W, probe):
    """``A = G Y``, ``B = Y`` for a probing matrix ``Y``; unbiased for ``G``."""
    Y = probe.Y if isinstance(probe, ProbingMatrix) else np.asarray(probe, dtype=float)
    if Y.shape[0] != W.n:
        raise ValueError(f"probing matrix has {Y.shape[0]} rows, expected {W.n}")
    if (isinstance(probe, ProbingMatrix) and probe.indices is not None
            and hasattr(problem, "gradient_columns")):
        A = problem.gradient_columns(W, probe.indices) * np.sqrt(W.n / probe.k)
    else:
        A = problem.gradient_times(W, Y)
    return LowRankGradient(A, Y)


class FactoredLeastSquares:
    """``f(W) = 1/2 ||W - M||_F^2`` with a factored target ``M``.

    Strongly convex with ``mu = 1``; the regularized optimum is ``D_lam[M]``
    (projected onto the ball when constrained).
    """

    strong_convexity = 1.0
    smoothness = 1.0

    def __init__(self, target, distribution=Distribution.RADEMACHER, k=DEFAULT_SKETCH_WIDTH):
        self.target = target
        self.distribution = Distribution.parse(distribution)
        self.k = int(k)

    @classmethod
    def random(cls, m, n, rank, sigma=None, seed=None, **kwargs):
        if sigma is None:
            sigma = np.arange(rank, 0, -1, dtype=float)
        if len(sigma) != rank:
            raise ValueError("need one singular value per target rank")
        return cls(random_factored(m, n, sigma, seed), **kwargs)

    @property
    def shape(self):
        return self.target.shape

    def gradient_times(self, W, Y):
        return fm.multiply_right(W, Y) - fm.multiply_right(self.target, Y)

    def gradient_columns(self, W, idx):
        """Columns ``idx`` of ``G = W - M``."""
        out = np.zeros((W.m, len(idx)))
        for F, sign in ((W, 1.0), (self.target, -1.0)):
            if F.rank:
                out += sign * (F.U @ (F.sigma[:, None] * F.V[idx].T))
        return out

    def stochastic_grad(self, W, seed=None, k=None):
        probe = generate(self.distribution, W.n, k or self.k, seed)
        return sketch_subgradient(self, W, probe)

    def exact_objective(self, W):
        # 1/2 (||W||^2 - 2 <W, M> + ||M||^2), all on r x r blocks
        val = 0.5 * (np.sum(W.sigma**2) - 2.0 * fm.inner(W, self.target) + np.sum(self.target.sigma**2))
        return float(max(val, 0.0))

    def dense_gradient(self, W):
        return np.asarray(W, dtype=float) - fm.to_dense(self.target)

    def dense_objective(self, W):
        return 0.5 * float(np.sum((np.asarray(W) - fm.to_dense(self.target)) ** 2))

    def optimum(self, lam, domain=DomainSpec()):
        """Closed-form minimizer of ``f + lam ||.||_*`` over ``domain``."""
        if lam == 0 and not domain.bounded:
            return self.target
        return prox_nuclear(self.target, lam, 1.0, domain)

    def estimate_grad_bound(self, W=None, samples=200, seed=None):
        """``sqrt(mean ||G_hat||_F^2)`` over fresh sketches at ``W`` (default zero)."""
        return _estimate_grad_bound(self, W, samples, seed)


class MultivariateRegression:
    """``f(W) = E 1/2 ||W^T x - y||^2`` with ``y = W_bar^T x + noise``, ``x ~ N(0, diag(s))``.

    Each stochastic gradient ``x (W^T x - y)^T`` is exactly rank one.
    """

    def __init__(self, w_bar, feature_scale=1.0, noise=0.0):
        self.w_bar = w_bar
        scale = np.broadcast_to(np.asarray(feature_scale, dtype=float), (w_bar.m,)).copy()
        if np.any(scale <= 0):
            raise ValueError("feature variances must be positive")
        if noise < 0:
            raise ValueError("noise level must be non-negative")
        self.feature_var = scale
        self.noise = float(noise)

    @classmethod
    def random(cls, m, n, rank, sigma=None, seed=None, **kwargs):
        if sigma is None:
            sigma = np.arange(rank, 0, -1, dtype=float)
        return cls(random_factored(m, n, sigma, seed), **kwargs)

    @property
    def shape(self):
        return self.w_bar.shape

    @property
    def strong_convexity(self):
        return float(self.feature_var.min())

    @property
    def smoothness(self):
        return float(self.feature_var.max())

    def stochastic_grad(self, W, seed=None, k=None):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(W.m) * np.sqrt(self.feature_var)
        y = fm.multiply_left(self.w_bar, x)[:, 0]
        if self.noise:
            y = y + self.noise * rng.standard_normal(W.n)
        resid = fm.multiply_left(W, x)[:, 0] - y
        return LowRankGradient(x[:, None], resid[:, None])

    def gradient_times(self, W, Y):
        return self.feature_var[:, None] * (fm.multiply_right(W, Y) - fm.multiply_right(self.w_bar, Y))

    def population_gradient(self, W):
        return self.feature_var[:, None] * (fm.to_dense(W) - fm.to_dense(self.w_bar))

    def dense_gradient(self, W):
        return self.feature_var[:, None] * (np.asarray(W, dtype=float) - fm.to_dense(self.w_bar))

    def exact_objective(self, W):
        # 1/2 tr(D^T S D) + 1/2 n noise^2 with D = W - W_bar in stacked factors
        U, s, V = _diff_factors(W, self.w_bar)
        if s.size == 0:
            quad = 0.0
        else:
            gu = U.T @ (self.feature_var[:, None] * U)
            gv = V.T @ V
            quad = float(np.sum((s[:, None] * gu * s[None, :]) * gv))
        return 0.5 * max(quad, 0.0) + 0.5 * W.n * self.noise**2

    def dense_objective(self, W):
        D = np.asarray(W, dtype=float) - fm.to_dense(self.w_bar)
        return 0.5 * float(np.sum(self.feature_var[:, None] * D * D)) + 0.5 * D.shape[1] * self.noise**2

    def estimate_grad_bound(self, W=None, samples=200, seed=None):
        return _estimate_grad_bound(self, W, samples, seed)


def _estimate_grad_bound(problem, W, samples, seed):
    if W is None:
        W = fm.zeros(*problem.shape)
    ss = np.random.SeedSequence(seed)
    sq = [problem.stochastic_grad(W, child).frobenius_norm_sq() for child in ss.spawn(samples)]
    return float(np.sqrt(np.mean(sq)))


def stochastic_grad(problem, W, seed=None, k=None):
    return problem.stochastic_grad(W, seed, k)


def exact_objective(problem, W):
    return problem.exact_objective(W)
