import json
import math

import numpy as np
import pytest

from certlab import curvature as curv
from certlab import regularizers as reg
from certlab import solvers
from certlab.losses import GLMLoss, QuadraticLoss, penalty_level_lambda


def _circle_min(H, cone, k=400_001):
    # fine angular scan of 2·dᵀHd on the unit circle, restricted to the cone
    th = np.linspace(0, 2 * np.pi, k)
    D = np.c_[np.cos(th), np.sin(th)]
    ok = cone.constraint(D) <= 0
    return float(np.min(2 * np.einsum("ij,jk,ik->i", D[ok], H, D[ok])))


def _sphere_points(k=1500):
    th = np.linspace(0, np.pi, k)
    ph = np.linspace(0, 2 * np.pi, 2 * k)
    T, P = np.meshgrid(th, ph, indexing="ij")
    return np.c_[(np.sin(T) * np.cos(P)).ravel(), (np.sin(T) * np.sin(P)).ravel(), np.cos(T).ravel()]


def test_identity_design_gives_two():
    F = reg.certificate_frame(reg.lasso(1.0), np.array([1.0, 0, -1.0, 0, 0]), 0.5)
    for seed in range(3):
        est = curv.rsc_estimate(QuadraticLoss(np.eye(5), np.zeros(5)), curv.ConeSpec.certificate(F), seed=seed)
        assert est.upper == pytest.approx(2.0, abs=1e-9)
        assert est.certified and est.lower == pytest.approx(2.0, abs=2e-2)


def test_empty_cone_reports_infinity():
    # empty support: every direction pays λ‖d‖₁ > ⟨0.3·1, −d⟩
    F = reg.certificate_frame(reg.lasso(1.0, 3), np.zeros(3))
    cone = curv.ConeSpec(F, 0.3 * np.ones(3), 1.0)
    est = curv.rsc_estimate(QuadraticLoss(np.eye(3), np.zeros(3)), cone)
    assert math.isinf(est.upper) and "empty_cone" in est.flags
    d = json.loads(est.to_json())
    assert d["certified"] is True and "empty_cone" in d["flags"]


def test_cone_validation():
    F = reg.certificate_frame(reg.lasso(1.0), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        curv.ConeSpec(F, F.sign, -0.1)
    with pytest.raises(ValueError):
        curv.rsc_estimate(QuadraticLoss(np.eye(2), np.zeros(2)), curv.ConeSpec.certificate(F), budget=50)


def test_two_dim_certified_matches_grid():
    rng = np.random.default_rng(0)
    for _ in range(5):
        X = rng.standard_normal((6, 2))
        F = reg.certificate_frame(reg.lasso(rng.uniform(0.5, 2.0)), np.array([1.0, 0.0]), rng.uniform(0.2, 0.9))
        cone = curv.ConeSpec.certificate(F)
        est = curv.rsc_estimate(QuadraticLoss(X, np.zeros(6)), cone)
        ref = _circle_min(X.T @ X, cone)
        assert est.certified
        assert abs(est.upper - ref) <= 1e-2 * max(1.0, ref)
        assert est.lower <= ref + 1e-9


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_scale_covariance(c):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((10, 6))
    F = reg.certificate_frame(reg.lasso(1.0), np.r_[1.0, -1.0, 0, 0, 0, 0], 0.6)
    cone = curv.ConeSpec.certificate(F)
    a = curv.rsc_estimate(QuadraticLoss(X, np.zeros(10)), cone, certify_dim=0)
    b = curv.rsc_estimate(QuadraticLoss(c * X, np.zeros(10)), cone, certify_dim=0)
    assert b.upper == pytest.approx(c * c * a.upper, rel=1e-6)
    g1 = curv.compatibility_constant(X, F, 0.6, certify_dim=0)
    g2 = curv.compatibility_constant(c * X, F, 0.6, certify_dim=0)
    assert g2.upper == pytest.approx(c * c * g1.upper, rel=1e-6)


def test_compatibility_identity_three_dim_grid():
    F = reg.certificate_frame(reg.lasso(1.0), np.array([1.0, 0.0, 0.0]), 0.5)
    est = curv.compatibility_constant(np.eye(3), F, 0.5)
    D = _sphere_points()
    D = D[D[:, 0] + 0.5 * (np.abs(D[:, 1]) + np.abs(D[:, 2])) <= 0]
    ref = float(np.min(1.0 / np.sum(np.abs(D), axis=1) ** 2))
    assert est.certified
    assert abs(est.upper - ref) <= 1e-2
    # ‖Δ‖₂²/‖Δ‖₁² ≥ 1/3 in three dimensions
    assert est.upper >= 1 / 3 - 1e-9


def test_sign_cone_dominates_l1_cone():
    rng = np.random.default_rng(2)
    for seed in range(3):
        X = rng.standard_normal((8, 6))
        F = reg.certificate_frame(reg.lasso(1.0), np.r_[1.0, -1.0, 0, 0, 0, 0], 0.5)
        s = curv.compatibility_constant(X, F, 0.5, seed=seed, cone="sign", certify_dim=0)
        l1 = curv.compatibility_constant(X, F, 0.5, seed=seed, cone="l1", certify_dim=0)
        assert s.upper >= l1.upper


def test_nested_cones_ordered():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((9, 6))
    F = reg.certificate_frame(reg.lasso(1.0), np.r_[1.0, 0, 0, -1.0, 0, 0], 0.8)
    L = QuadraticLoss(X, np.zeros(9))
    small = curv.ConeSpec(F, F.sign, 0.8)
    big = curv.ConeSpec(F, F.sign, 0.3)   # lower weight admits more directions
    a = curv.rsc_estimate(L, small, seed=4, certify_dim=0)
    b = curv.rsc_estimate(L, big, seed=4, certify_dim=0, candidates=a.direction[None, :])
    assert b.upper <= a.upper


def test_sparse_eigs_identity_and_duplicate():
    G = reg.GroupStructure.contiguous(6, 1)
    for k in (1, 2, 3):
        se = curv.sparse_eigs(np.eye(6), G, k, S=(0,))
        assert se.rho_plus == pytest.approx(1.0) and se.gamma_sk == pytest.approx(1.0)
    X = np.random.default_rng(4).standard_normal((8, 5))
    X[:, 4] = X[:, 1]
    se = curv.sparse_eigs(X, None, 2, S=(1,))
    assert se.gamma_sk == pytest.approx(0.0, abs=1e-10) and set(se.gamma_pattern) == {1, 4}


def test_sparse_eigs_monotone_in_k():
    X = np.random.default_rng(5).standard_normal((10, 7))
    r = [curv.sparse_eigs(X, None, k, S=(0,)) for k in (1, 2, 3, 4)]
    assert all(a.rho_plus <= b.rho_plus + 1e-12 for a, b in zip(r, r[1:]))
    assert all(a.gamma_sk >= b.gamma_sk - 1e-12 for a, b in zip(r, r[1:]))


def test_sparse_eigs_sampling_oracle():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((10, 12))
    G = reg.GroupStructure.contiguous(6, 2)
    se = curv.sparse_eigs(X, G, 2, S=(0,))
    H = X.T @ X
    tol = 1e-2 * np.linalg.norm(H, 2)
    hi, lo = -np.inf, np.inf
    for pat in [(a, b) for a in range(6) for b in range(a + 1, 6)]:
        cols = G.index[list(pat)].ravel()
        Z = rng.standard_normal((100_000, cols.size))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        q = np.einsum("ij,jk,ik->i", Z, H[np.ix_(cols, cols)], Z)
        hi = max(hi, q.max())
        if 0 in pat:
            lo = min(lo, q.min())
    assert hi <= se.rho_plus + 1e-9 and se.rho_plus - hi <= tol
    assert lo >= se.gamma_sk - 1e-9 and lo - se.gamma_sk <= tol


def test_sparse_eigs_budget():
    with pytest.raises(curv.CombinatorialBudgetError):
        curv.sparse_eigs(np.ones((2, 40)), None, 10)


def test_correlation_orthonormal_and_zero_radius():
    Q, _ = np.linalg.qr(np.random.default_rng(7).standard_normal((10, 5)))
    F = reg.certificate_frame(reg.lasso(1.0), np.r_[1.0, 1.0, 0, 0, 0])
    L = QuadraticLoss(Q, np.zeros(10))
    assert curv.correlation_T(L, F.tangent, F, 2.0).upper == pytest.approx(0.0, abs=1e-12)
    X = np.random.default_rng(8).standard_normal((10, 5))
    est = curv.correlation_T(QuadraticLoss(X, np.zeros(10)), F.tangent, F, 0.0)
    assert est.upper == 0.0 and est.sense == "sup"


def test_correlation_three_dim_grid():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((6, 3))
    lam, dp = 1.5, 0.7
    F = reg.certificate_frame(reg.lasso(lam), np.array([1.0, -1.0, 0.0]))
    est = curv.correlation_T(QuadraticLoss(X, np.zeros(6)), F.tangent, F, dp)
    # β = (a, b₂) with |b₂| = δ′/λ on the ball boundary; scan the direction of a
    H = X.T @ X
    th = np.linspace(0, 2 * np.pi, 200_001)
    A = np.c_[np.cos(th), np.sin(th)]
    num = np.abs(A @ H[:2, 2]) * dp / lam
    den = np.sqrt(np.einsum("ij,jk,ik->i", A, H[:2, :2], A))
    ref = float(np.max(num / den))
    assert abs(est.upper - ref) <= 1e-2 * max(1.0, ref)
    assert est.extra["crude"] == pytest.approx(dp / lam * np.linalg.norm(X[:, 2]))


def test_param_error_bound_trivial():
    X = np.random.default_rng(10).standard_normal((12, 5))
    bb = np.r_[1.0, 0, -1.0, 0, 0]
    F = reg.certificate_frame(reg.lasso(1.0), bb)
    L = QuadraticLoss(X, X @ bb)
    pb = curv.param_error_bound(0.0, 0.5, F, L, beta_star=bb)
    assert pb.delta_prime == 0.0 and pb.tangent_energy == 0.0
    pb = curv.param_error_bound(0.3, 0.5, F, L, cor=0.0)
    assert pb.tangent_energy == pytest.approx(math.sqrt(0.5 * 0.6))
    with pytest.raises(ValueError):
        curv.param_error_bound(0.3, 1.0, F, L)


def test_param_error_bound_end_to_end():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((40, 12))
    bb = np.zeros(12)
    bb[[2, 7]] = [1.5, -1.0]
    eta = 0.5
    L = QuadraticLoss(X, X @ bb + 0.3 * rng.standard_normal(40))
    lam = 2.0 * float(np.max(np.abs(L.gradient(bb)))) / eta
    R = reg.lasso(lam)
    F = reg.certificate_frame(R, bb, eta)
    bh = solvers.solve_regularized(L, R).beta
    # the tightest δ in D_L(β̂, β*) + (1 − η)‖β̂‖_B ≤ δ, with β* = β̄
    delta = L.bregman(bh, bb) + (1 - eta) * F.b_norm(bh)
    pb = curv.param_error_bound(delta, eta, F, L, beta_star=bb)
    d = bh - bb
    assert F.b_norm(d) <= pb.delta_prime + 1e-6
    dT = F.tangent.project(d)
    energy = math.sqrt(float(dT @ L.H_matrix() @ dT))
    assert energy <= pb.tangent_energy + 1e-6
    assert np.linalg.norm(dT) <= pb.l2_tangent + 1e-6


def test_glm_gamma_squared_identity_grid():
    L = GLMLoss(np.eye(2), "squared", np.zeros(2))
    F = reg.certificate_frame(reg.lasso(1.0), np.array([1.0, 0.0]))
    cone = curv.ConeSpec.certificate(F)
    est = curv.glm_gamma(L, np.array([1.0, 0.0]), cone, 0.0)
    # r = 0: the min is z², so γ₂ = (2/(2e))·inf ‖d‖² = 1/e
    assert est.certified and est.upper == pytest.approx(1 / math.e, abs=1e-2)
    th = np.linspace(0, 2 * np.pi, 200_001)
    D = np.c_[np.cos(th), np.sin(th)]
    ok = cone.constraint(D) <= 0
    ref = float(np.min(np.sum(D[ok] ** 2 / math.e, axis=1)))
    assert abs(est.upper - ref) <= 1e-2


def test_glm_gamma_limits_and_monotone():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((30, 3))
    L = GLMLoss(X, "logistic", np.where(rng.random(30) < 0.5, 1.0, -1.0))
    F = reg.certificate_frame(reg.lasso(0.5), np.array([0.5, 0.0, 0.0]))
    cone = curv.ConeSpec.glm(F, L.gradient(np.array([0.5, 0.0, 0.0])))
    big = curv.glm_gamma(L, F.anchor, cone, 1e9, certify_dim=0)
    assert big.upper <= 1e-6
    near = curv.glm_gamma(L, np.array([0.5, 0.0, 0.0]), cone, 1.0, certify_dim=0)
    far = curv.glm_gamma(L, np.array([20.0, 0.0, 0.0]), cone, 1.0, certify_dim=0)
    w_near = L.curvature_weights(np.array([0.5, 0.0, 0.0]))
    w_far = L.curvature_weights(np.array([20.0, 0.0, 0.0]))
    assert np.sum(w_far) < np.sum(w_near)
    assert far.upper < near.upper


def test_glm_bound_zero_lambda():
    # anchor 0: ∂R(0) is the dual ball and contains −∇L(β*) when η(β*) < 1
    L = GLMLoss(np.eye(2), "squared", np.array([0.2, -0.1]))
    z = np.zeros(2)
    rep = curv.glm_oracle_bound(L, z, z, reg.lasso(1.0, 2))
    assert rep.lam == 0.0 and rep.eta_star == pytest.approx(0.4)
    assert rep.bound == pytest.approx(rep.d_bar_star)


def test_glm_bound_at_truth_zero_noise():
    X = np.random.default_rng(14).standard_normal((20, 2))
    b = np.array([0.5, 0.0])
    L = GLMLoss(X, "squared", X @ b)
    R = reg.lasso(0.8, 2)
    rep = curv.glm_oracle_bound(L, b, b, R)
    # ∇L(β*) = 0 so λ is the distance from 0 to ∂R(β̄): the sign part only
    assert rep.lam == pytest.approx(0.8) == penalty_level_lambda(L, b, b, R)
    assert rep.d_bar_star == 0.0
    assert rep.bound == pytest.approx(0.64 / (4 * rep.gamma2))
    assert rep.gamma2_certified


def test_glm_bound_noise_level_check():
    X = np.eye(2)
    L = GLMLoss(X, "squared", np.array([10.0, 0.0]))
    with pytest.raises(ValueError):
        curv.glm_oracle_bound(L, np.zeros(2), np.zeros(2), reg.lasso(1.0, 2))


def test_glm_bound_empirical_slack():
    rng = np.random.default_rng(15)
    done = 0
    for t in range(20):
        p = 2 + t % 3
        X = rng.standard_normal((60, p))
        b = np.zeros(p)
        b[0] = 1.0
        y = np.where(rng.random(60) < 1 / (1 + np.exp(-(X @ b))), 1.0, -1.0)
        L = GLMLoss(X, "logistic", y)
        lam = 2.0 * float(np.max(np.abs(L.gradient(b))))
        R = reg.lasso(lam, p)
        rep = curv.glm_oracle_bound(L, b, b, R, seed=t)
        bh = solvers.solve_regularized(L, R).beta
        if rep.radius_ok(b, bh):
            assert L.bregman(bh, b) <= rep.bound + 1e-6
            done += 1
    assert done >= 10


def test_estimate_json_roundtrip():
    est = curv.CurvatureEstimate(0.5, 1.0, 100, "arc_sampling")
    d = json.loads(est.to_json())
    assert d["lower"] == 0.5 and d["certified"] is False
    with pytest.raises(ValueError):
        curv.CurvatureEstimate(2.0, 1.0, 100, "x")
