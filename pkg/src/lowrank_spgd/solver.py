"""Stochastic proximal gradient descent with factored iterates.

Starting from ``W_1 = 0``, each step draws a low-rank gradient sketch, folds
``-eta_t * G_hat`` into the thin SVD of the iterate and applies the exact
nuclear-norm prox.  The last iterate ``W_{T+1}`` is returned, never an average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import factored as fm
from .incsvd import TRUNC_TOL, incremental_update, reorthogonalize
from .prox import DomainSpec, prox_nuclear


class NumericalAbort(RuntimeError):
    """The run cannot continue: non-finite values or an exhausted rank budget."""


class RankBudgetExceeded(NumericalAbort):
    def __init__(self, t, rank, budget, lam):
        self.t, self.rank, self.budget = t, rank, budget
        super().__init__(
            f"iterate rank {rank} exceeds rank_budget {budget} at t={t} "
            f"(lambda={lam:g} may be too small for this budget)"
        )


class NoConvergence(RuntimeError):
    pass


CONSTANT_OVER_SQRT_T = "constant_over_sqrt_t"
INVERSE_MU_T = "inverse_mu_t"


@dataclass(frozen=True)
class StepSchedule:
    """``eta_t = c / sqrt(T)`` (constant) or ``eta_t = 1 / (mu t)``."""

    kind: str
    horizon: int
    c: float | None = None
    mu: float | None = None

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if self.kind == CONSTANT_OVER_SQRT_T:
            if self.c is None or not self.c > 0:
                raise ValueError("constant_over_sqrt_t needs c > 0")
        elif self.kind == INVERSE_MU_T:
            if self.mu is None or not self.mu > 0:
                raise ValueError("inverse_mu_t needs mu > 0")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant_over_sqrt_t(cls, c, horizon):
        return cls(CONSTANT_OVER_SQRT_T, int(horizon), c=float(c))

    @classmethod
    def inverse_mu_t(cls, mu, horizon):
        return cls(INVERSE_MU_T, int(horizon), mu=float(mu))

    def with_horizon(self, horizon):
        return StepSchedule(self.kind, int(horizon), self.c, self.mu)


def step_size(schedule, t):
    if not 1 <= t <= schedule.horizon:
        raise ValueError(f"t={t} outside 1..{schedule.horizon}")
    if schedule.kind == CONSTANT_OVER_SQRT_T:
        return schedule.c / math.sqrt(schedule.horizon)
    return 1.0 / (schedule.mu * t)


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    schedule: StepSchedule
    domain: DomainSpec = DomainSpec()
    sketch_width: int | None = None
    rank_budget: int | None = None
    seed: int = 0
    trace_every: int = 10
    trunc_tol: float = TRUNC_TOL
    reortho_every: int = 256
    trace_objective: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        if self.rank_budget is not None and self.rank_budget < 0:
            raise ValueError("rank_budget must be non-negative")


@dataclass
class TraceRecord:
    t: int
    eta: float
    objective: float
    rank: int
    grad_sq_norm: float
    dist_to_ref: float


@dataclass
class SolveResult:
    final: fm.FactoredMatrix
    trace: list = field(default_factory=list)

    @property
    def max_rank(self):
        return max((rec.rank for rec in self.trace), default=self.final.rank)

    @property
    def max_grad_sq_norm(self):
        vals = [rec.grad_sq_norm for rec in self.trace if not math.isnan(rec.grad_sq_norm)]
        return max(vals, default=float("nan"))


def composite_objective(problem, W, lam):
    return problem.exact_objective(W) + lam * fm.nuclear_norm(W)


def step_seed(seed, t):
    """Independent, reproducible stream for iteration ``t`` of run ``seed``."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(t,))


def _traced(t, horizon, every):
    return (t - 1) % every == 0 or t == horizon + 1


def spgd_solve(problem, config, reference=None):
    """Run ``config.schedule.horizon`` SPGD steps and return the last iterate.

    ``reference`` (a FactoredMatrix, e.g. the closed-form optimum) enables the
    ``dist_to_ref`` trace column.  Trace rows are taken at t = 1, 1 + s,
    1 + 2s, ... and at the returned iterate t = T + 1.
    """
    m, n = problem.shape
    T = config.schedule.horizon
    budget = min(m, n) if config.rank_budget is None else min(config.rank_budget, m, n)
    lam, domain = config.lam, config.domain
    W = fm.zeros(m, n)
    trace = []

    def record(t, W, eta, gsq):
        obj = composite_objective(problem, W, lam) if config.trace_objective else float("nan")
        if config.trace_objective and not math.isfinite(obj):
            raise NumericalAbort(f"non-finite objective at t={t}")
        dist = fm.frobenius_distance(W, reference) if reference is not None else float("nan")
        trace.append(TraceRecord(t, eta, obj, W.rank, gsq, dist))

    for t in range(1, T + 1):
        eta = step_size(config.schedule, t)
        G = problem.stochastic_grad(W, step_seed(config.seed, t), config.sketch_width)
        if _traced(t, T, config.trace_every):
            record(t, W, eta, G.frobenius_norm_sq())
        W = prox_nuclear(incremental_update(W, G, -eta, config.trunc_tol), lam, eta, domain)
        if config.reortho_every and t % config.reortho_every == 0:
            W = reorthogonalize(W)
        if W.rank and not np.isfinite(W.sigma[0]):
            raise NumericalAbort(f"non-finite iterate at t={t}")
        if W.rank > budget:
            raise RankBudgetExceeded(t, W.rank, budget, lam)
    if T >= 1:
        record(T + 1, W, float("nan"), float("nan"))
    return SolveResult(W, trace)


def dense_baseline_solve(problem, config, tol=1e-10, max_iter=100_000):
    """Deterministic full-gradient proximal descent on dense matrices (desk scale only).

    Uses step ``1 / L`` and the same prox as the stochastic solver; stops when
    successive iterates differ by at most ``tol`` in Frobenius norm.
    """
    m, n = problem.shape
    fm._check_dense_size(m, n)
    step = 1.0 / problem.smoothness
    W = np.zeros((m, n))
    for _ in range(max_iter):
        point = fm.from_dense(W - step * problem.dense_gradient(W), tol=0.0)
        W_next = fm.to_dense(prox_nuclear(point, config.lam, step, config.domain))
        if np.linalg.norm(W_next - W) <= tol:
            return W_next
        W = W_next
    raise NoConvergence(f"dense baseline did not converge within {max_iter} iterations")
