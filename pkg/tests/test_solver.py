import math

import numpy as np
import pytest

from lowrank_spgd import factored as fm
from lowrank_spgd.factored import LowRankGradient
from lowrank_spgd.incsvd import incremental_update
from lowrank_spgd.problems import FactoredLeastSquares, MultivariateRegression
from lowrank_spgd.prox import DomainSpec, kkt_dual_check, prox_nuclear
from lowrank_spgd.solver import (
    RankBudgetExceeded,
    SolverConfig,
    StepSchedule,
    composite_objective,
    dense_baseline_solve,
    spgd_solve,
    step_size,
)


@pytest.fixture
def lsq():
    return FactoredLeastSquares.random(20, 20, 2, sigma=[0.5, 0.25], seed=1)


def test_step_sizes():
    sch = StepSchedule.constant_over_sqrt_t(1.0, 100)
    assert {step_size(sch, t) for t in (1, 50, 100)} == {0.1}
    assert step_size(StepSchedule.inverse_mu_t(2.0, 10), 5) == pytest.approx(0.1)
    assert step_size(StepSchedule.inverse_mu_t(1.0, 10), 1) == 1.0
    inv = StepSchedule.inverse_mu_t(1.0, 10)
    etas = [step_size(inv, t) for t in range(1, 11)]
    assert all(a > b > 0 for a, b in zip(etas, etas[1:]))
    with pytest.raises(ValueError):
        step_size(inv, 0)
    with pytest.raises(ValueError):
        step_size(inv, 11)
    with pytest.raises(ValueError):
        StepSchedule("adaptive", 10)


def test_zero_horizon(lsq):
    res = spgd_solve(lsq, SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 0)))
    assert res.final.rank == 0 and res.trace == []


def test_over_regularized_stays_zero(lsq):
    res = spgd_solve(lsq, SolverConfig(1e6, StepSchedule.inverse_mu_t(1, 50)))
    assert res.final.rank == 0
    assert all(rec.rank == 0 for rec in res.trace)


def test_trace_rows(lsq):
    res = spgd_solve(lsq, SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 95), trace_every=10))
    assert [r.t for r in res.trace] == [1, 11, 21, 31, 41, 51, 61, 71, 81, 91, 96]
    assert math.isnan(res.trace[-1].eta)
    assert res.trace[-1].rank == res.final.rank
    assert res.trace[0].rank == 0 and res.trace[0].eta == 1.0


def test_deterministic(lsq):
    cfg = SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 200), seed=5)
    a, b = spgd_solve(lsq, cfg), spgd_solve(lsq, cfg)
    np.testing.assert_array_equal(a.final.sigma, b.final.sigma)
    np.testing.assert_array_equal(a.final.U, b.final.U)
    assert [r.objective for r in a.trace] == [r.objective for r in b.trace]
    c = spgd_solve(lsq, SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 200), seed=6))
    assert fm.frobenius_distance(a.final, c.final) > 1e-12


def test_inverse_schedule_prefix_property(lsq):
    """With eta_t = 1/(mu t) the T = 100 run is exactly the first 100 steps of a longer run."""
    ref = lsq.optimum(0.1)
    short = spgd_solve(lsq, SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 100), seed=2), reference=ref)
    long = spgd_solve(lsq, SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 200), seed=2), reference=ref)
    rec = next(r for r in long.trace if r.t == 101)
    assert rec.dist_to_ref == short.trace[-1].dist_to_ref


def test_ball_feasibility(lsq):
    R = 0.3
    res = spgd_solve(lsq, SolverConfig(0.01, StepSchedule.constant_over_sqrt_t(1.0, 300), DomainSpec(R),
                                       trace_every=1, trace_objective=False))
    assert fm.frobenius_norm(res.final) <= R + 1e-10
    # the objective is off, so check feasibility through the distance to zero
    res = spgd_solve(lsq, SolverConfig(0.01, StepSchedule.constant_over_sqrt_t(1.0, 300), DomainSpec(R),
                                       trace_every=1), reference=fm.zeros(20, 20))
    assert max(rec.dist_to_ref for rec in res.trace) <= R + 1e-10


class _InjectLast:
    """Wraps a problem and replaces the gradient on call ``T`` with a huge spike."""

    def __init__(self, inner, T):
        self.inner, self.T, self.calls = inner, T, 0
        self.shape, self.strong_convexity = inner.shape, inner.strong_convexity
        self.before_last = None

    def stochastic_grad(self, W, seed=None, k=None):
        self.calls += 1
        if self.calls == self.T:
            self.before_last = W
            e = np.zeros((W.m, 1))
            e[0] = 1.0
            f = np.zeros((W.n, 1))
            f[-1] = 1.0
            return LowRankGradient(-1000.0 * e, f)
        return self.inner.stochastic_grad(W, seed, k)

    def exact_objective(self, W):
        return self.inner.exact_objective(W)


def test_returns_last_iterate(lsq):
    T = 50
    prob = _InjectLast(lsq, T)
    cfg = SolverConfig(0.1, StepSchedule.constant_over_sqrt_t(1.0, T), seed=0)
    res = spgd_solve(prob, cfg)
    eta = 1.0 / math.sqrt(T)
    G = LowRankGradient(np.eye(20)[:, :1] * -1000.0, np.eye(20)[:, -1:])
    want = prox_nuclear(incremental_update(prob.before_last, G, -eta), 0.1, eta)
    assert fm.frobenius_distance(res.final, want) <= 1e-12 * fm.frobenius_norm(want)
    assert fm.to_dense(res.final)[0, -1] > 100 * eta - 1


def test_rank_budget_abort():
    p = MultivariateRegression.random(15, 15, 3, seed=0, noise=1.0)
    with pytest.raises(RankBudgetExceeded) as info:
        spgd_solve(p, SolverConfig(0.0, StepSchedule.constant_over_sqrt_t(1.0, 50), rank_budget=3))
    assert info.value.rank == 4


def test_strongly_convex_bound_short(lsq):
    ref = lsq.optimum(0.1)
    dists, gsq, ranks = [], [], []
    T = 2000
    for seed in range(5):
        res = spgd_solve(lsq, SolverConfig(0.1, StepSchedule.inverse_mu_t(1, T), seed=seed), reference=ref)
        dists.append(res.trace[-1].dist_to_ref ** 2)
        gsq.append(res.max_grad_sq_norm)
        ranks.append(res.max_rank)
    G, r, lam = math.sqrt(max(gsq)), max(ranks), 0.1
    bound = 4 * (G * G + 16 * r * lam**2 + 4 * lam * G * math.sqrt(r)) / T
    assert np.mean(dists) <= bound


def test_dense_baseline_lsq(lsq):
    cfg = SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 1))
    W = dense_baseline_solve(lsq, cfg)
    assert np.linalg.norm(W - fm.to_dense(lsq.optimum(0.1))) <= 1e-8
    W0 = dense_baseline_solve(lsq, SolverConfig(0.0, StepSchedule.inverse_mu_t(1, 1)))
    assert np.linalg.norm(W0 - fm.to_dense(lsq.target)) <= 1e-8


def test_dense_baseline_ball_boundary(lsq):
    R = 0.5 * fm.frobenius_norm(lsq.optimum(0.1))
    W = dense_baseline_solve(lsq, SolverConfig(0.1, StepSchedule.inverse_mu_t(1, 1), DomainSpec(R)))
    assert abs(np.linalg.norm(W) - R) <= 1e-8
    rep = kkt_dual_check(lsq.target, 0.1, R)
    assert rep.active and abs(rep.scale * rep.shrunk_norm - np.linalg.norm(W)) <= 1e-8


def test_dense_baseline_regression_and_spgd():
    p = MultivariateRegression.random(8, 6, 2, sigma=[2.0, 1.0], seed=3,
                                      feature_scale=np.linspace(0.5, 1.5, 8), noise=0.1)
    cfg = SolverConfig(0.05, StepSchedule.inverse_mu_t(p.strong_convexity, 4000), seed=1)
    W_ref = dense_baseline_solve(p, cfg)
    # optimality: no random perturbation improves the dense objective
    base = p.dense_objective(W_ref) + 0.05 * np.linalg.svd(W_ref, compute_uv=False).sum()
    rng = np.random.default_rng(0)
    for _ in range(200):
        X = W_ref + 1e-3 * rng.standard_normal(W_ref.shape)
        assert p.dense_objective(X) + 0.05 * np.linalg.svd(X, compute_uv=False).sum() >= base - 1e-12
    res = spgd_solve(p, cfg, reference=fm.from_dense(W_ref))
    assert res.trace[-1].dist_to_ref < 0.2 * res.trace[1].dist_to_ref


def test_composite_objective(lsq):
    W = lsq.optimum(0.1)
    assert composite_objective(lsq, W, 0.1) == pytest.approx(
        lsq.exact_objective(W) + 0.1 * fm.nuclear_norm(W))
