import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowrank_spgd import factored as fm
from lowrank_spgd.checks import dense_prox
from lowrank_spgd.factored import FactoredMatrix
from lowrank_spgd.problems import random_factored
from lowrank_spgd.prox import DomainSpec, dual_value, kkt_dual_check, project_frobenius, prox_nuclear, svs


def _diag(sigma, m=5, n=4):
    r = len(sigma)
    return FactoredMatrix(np.eye(m)[:, :r], sigma, np.eye(n)[:, :r])


def _objective(X, Y, lam):
    return 0.5 * np.sum((X - Y) ** 2) + lam * np.linalg.svd(X, compute_uv=False).sum()


def test_svs_examples():
    F = _diag([3.0, 2.0, 0.5])
    out = svs(F, 1.0)
    assert out.rank == 2
    np.testing.assert_allclose(out.sigma, [2.0, 1.0])
    assert svs(F, 0.0) is F
    with pytest.raises(ValueError):
        svs(F, -0.1)


def test_svs_exact_tie(rng):
    D = rng.standard_normal((10, 8))
    F = fm.from_dense(D)
    lam = F.sigma[1]
    out = svs(F, lam)
    assert out.rank == 1
    want = dense_prox(D, lam)
    assert np.linalg.norm(fm.to_dense(out) - want) <= 1e-10 * np.linalg.norm(want)


def test_svs_preserves_columns_exactly(rng):
    F = fm.from_dense(rng.standard_normal((6, 5)))
    out = svs(F, 0.5 * F.sigma[2])
    np.testing.assert_array_equal(out.U, F.U[:, : out.rank])
    np.testing.assert_array_equal(out.V, F.V[:, : out.rank])


def test_project_examples():
    F = _diag([4.0])
    assert project_frobenius(F, 5.0) is F
    G = _diag([8.0, 6.0])
    out = project_frobenius(G, 5.0)
    np.testing.assert_allclose(out.sigma, [4.0, 3.0])
    np.testing.assert_array_equal(out.U, G.U)
    with pytest.raises(ValueError):
        project_frobenius(G, 0.0)


def test_project_is_closest_point(rng):
    D = rng.standard_normal((6, 5)) * 3
    F = fm.from_dense(D)
    R = 0.5 * fm.frobenius_norm(F)
    P = fm.to_dense(project_frobenius(F, R))
    best = np.linalg.norm(P - D)
    for _ in range(1000):
        X = rng.standard_normal(D.shape)
        X *= R * rng.uniform() ** (1 / X.size) / np.linalg.norm(X)
        assert np.linalg.norm(X - D) >= best - 1e-12


def test_prox_unbounded_reduces_to_svs():
    out = prox_nuclear(_diag([3.0, 2.0, 0.5]), 2.0, 0.5)
    np.testing.assert_allclose(out.sigma, [2.0, 1.0])


def test_prox_large_ball_matches_unbounded(rng):
    F = fm.from_dense(rng.standard_normal((5, 4)))
    a = prox_nuclear(F, 0.3, 1.0, DomainSpec.frobenius_ball(100.0))
    b = prox_nuclear(F, 0.3, 1.0, DomainSpec.unbounded())
    np.testing.assert_array_equal(a.sigma, b.sigma)


def _dual_search_prox(Y, lam, R):
    """Primal recovered from the best mu on a 1-D dual search (no closed-form mu)."""
    s = np.linalg.svd(Y, compute_uv=False)
    mus = np.linspace(0.0, 10.0, 200_001)
    vals = [dual_value(s, lam, R, mu) for mu in mus]
    mu = mus[int(np.argmax(vals))]
    return dense_prox(Y / (1 + 2 * mu), lam / (1 + 2 * mu)), mu


def test_prox_ball_example():
    F = _diag([3.0, 2.0])
    out = prox_nuclear(F, 1.0, 1.0, DomainSpec.frobenius_ball(1.0))
    np.testing.assert_allclose(out.sigma, [2 / np.sqrt(5), 1 / np.sqrt(5)], rtol=1e-14)
    X, mu = _dual_search_prox(fm.to_dense(F), 1.0, 1.0)
    assert mu == pytest.approx((np.sqrt(5) - 1) / 2, abs=1e-4)
    np.testing.assert_allclose(fm.to_dense(out), X, atol=1e-4)


def test_kkt_examples():
    F = _diag([11.0], 3, 3)
    rep = kkt_dual_check(F, 1.0, 5.0)
    assert rep.shrunk_norm == pytest.approx(10.0)
    assert rep.mu_star == pytest.approx(0.5)
    assert rep.scale == pytest.approx(0.5)
    rep = kkt_dual_check(F, 1.0, 20.0)
    assert rep.mu_star == 0 and rep.primal_dual_gap == 0 and not rep.active
    with pytest.raises(ValueError):
        kkt_dual_check(F, 1.0, -1.0)


def test_kkt_gap_against_dense_lagrangian(rng):
    for _ in range(20):
        F = random_factored(8, 6, rng.uniform(0.5, 4.0, size=4), rng)
        lam = rng.uniform(0, 0.4)
        s = np.sqrt(np.sum(np.maximum(F.sigma - lam, 0) ** 2))
        R = 0.5 * s
        rep = kkt_dual_check(F, lam, R)
        assert abs(rep.scale * rep.shrunk_norm - R) <= 1e-12
        Y = fm.to_dense(F)
        X = dense_prox(Y, lam, R)
        primal = _objective(X, Y, lam)
        mu = rep.mu_star
        Xl = dense_prox(Y / (1 + 2 * mu), lam / (1 + 2 * mu))
        dual = _objective(Xl, Y, lam) + mu * (np.sum(Xl**2) - R * R)
        assert abs(primal - dual) <= 1e-9 * (1 + primal)
        assert abs(rep.primal - primal) <= 1e-9 * (1 + primal)
        assert rep.primal_dual_gap <= 1e-9 * (1 + primal)


@given(st.integers(0, 2**31), st.booleans())
def test_prox_optimality_property(seed, ball):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((6, 5)) * 2
    F = fm.from_dense(D)
    lam_eta = rng.uniform(0, F.sigma[0])
    R = rng.uniform(0.2, 2.0) if ball else None
    out = fm.to_dense(prox_nuclear(F, lam_eta, 1.0, DomainSpec(R)))
    best = _objective(out, D, lam_eta)
    for _ in range(50):
        X = out + rng.standard_normal(D.shape) * rng.choice([1e-3, 1e-1, 1.0])
        if R is not None and np.linalg.norm(X) > R:
            X *= R / np.linalg.norm(X)
        assert _objective(X, D, lam_eta) >= best - 1e-10


@given(st.integers(0, 2**31), st.booleans())
def test_prox_nonexpansive(seed, ball):
    rng = np.random.default_rng(seed)
    D1, D2 = rng.standard_normal((2, 7, 5))
    lam = rng.uniform(0, 1.5)
    dom = DomainSpec(rng.uniform(0.3, 3.0) if ball else None)
    p1 = prox_nuclear(fm.from_dense(D1), lam, 1.0, dom)
    p2 = prox_nuclear(fm.from_dense(D2), lam, 1.0, dom)
    assert fm.frobenius_distance(p1, p2) <= np.linalg.norm(D1 - D2) + 1e-12


@given(st.integers(0, 2**31))
def test_shrink_then_project_matches_dense(seed):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((6, 6)) * 2
    lam = rng.uniform(0, 2)
    R = rng.uniform(0.1, 3)
    out = fm.to_dense(prox_nuclear(fm.from_dense(D), lam, 1.0, DomainSpec(R)))
    want = dense_prox(D, lam, R)
    assert np.linalg.norm(out - want) <= 1e-10 * max(np.linalg.norm(want), 1)


@given(st.integers(0, 2**31))
def test_kkt_invariants(seed):
    rng = np.random.default_rng(seed)
    F = random_factored(5, 5, rng.uniform(0.1, 3, size=3), rng)
    lam, R = rng.uniform(0, 1), rng.uniform(0.1, 4)
    rep = kkt_dual_check(F, lam, R)
    assert (rep.mu_star == 0) == (rep.shrunk_norm <= R)
    assert rep.scale * rep.shrunk_norm <= R + 1e-12


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec.frobenius_ball(0.0)
    assert DomainSpec().kind == "unbounded"
    assert DomainSpec.frobenius_ball(2).kind == "frobenius_ball"
