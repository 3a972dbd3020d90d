import json
import math

import numpy as np
import pytest

from certlab import certificates as cert
from certlab import gaussian as gw
from certlab import regularizers as reg
from tests._oracles import zoom_grid_min


def test_lambda_n_values():
    assert gw.lambda_n(1) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-6)
    assert gw.lambda_n(2) == pytest.approx(math.sqrt(math.pi / 2), abs=1e-6)
    with pytest.raises(ValueError):
        gw.lambda_n(0)


def test_lambda_n_monotone():
    v = [gw.lambda_n(n) for n in range(1, 2001)]
    assert all(a < b for a, b in zip(v, v[1:]))


def test_golden_min_vectorised():
    x, f = gw.golden_min(lambda t: (t - np.array([1.0, -2.0])) ** 2, np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
    assert np.allclose(x, [1.0, -2.0], atol=1e-6) and np.allclose(f, 0.0, atol=1e-12)


def test_inner_minimisation_matches_grid():
    # lasso frame on p=3 with S={0}: off-tangent u lives in a 2-d box
    F = reg.certificate_frame(reg.lasso(0.8), np.array([1.0, 0.0, 0.0]), 0.6)
    sp = cert.zero_split(F)
    rng = np.random.default_rng(0)
    r = F.eta * F.reg.lam
    for _ in range(100):
        eps = rng.standard_normal(3)
        gam = math.exp(rng.uniform(-2, 2))
        got = gw.width_sq_distances(F, sp, eps[None, :], np.array([gam]))[0]

        def f(P):
            U = np.clip(P, -r, r)
            res = np.c_[gam * F.sign[0] - eps[0] + 0 * U[:, 0], gam * U - eps[1:]]
            return np.sum(res * res, axis=1)

        _, ref = zoom_grid_min(f, np.zeros(2), r, levels=40)
        assert got == pytest.approx(ref, abs=1e-6)


def test_off_tangent_inside_ball_contributes_nothing():
    F = reg.certificate_frame(reg.lasso(1.0), np.array([1.0, 0.0, 0.0]), 1.0)
    eps = np.array([[0.0, 0.3, -0.2]])
    d = gw.width_sq_distances(F, cert.zero_split(F), eps, np.array([1.0]))[0]
    assert d == pytest.approx(1.0)   # only the tangent residual γ·e − 0 remains


@pytest.mark.parametrize("p", [8, 64])
def test_width_mc_trivial_frame(p):
    F = reg.trivial_frame(reg.lasso(1.0, p))
    est = gw.width_mc(F, trials=500, seed=3)
    assert abs(est.mean - gw.lambda_n(p)) <= 3 * est.se
    assert json.loads(est.to_json())["method"] == "monte_carlo"


def test_width_mc_reproducible():
    F = reg.certificate_frame(reg.lasso(1.0), np.r_[1.0, -1.0, np.zeros(10)], 0.8)
    a = gw.width_mc(F, trials=50, seed=11)
    b = gw.width_mc(F, trials=50, seed=11)
    assert a == b


def test_width_mc_group_and_nuclear_below_bounds():
    G = reg.GroupStructure.contiguous(16, 2)
    bb = np.zeros(32)
    bb[:2] = [0.6, 0.8]
    F = reg.certificate_frame(reg.group(1.0, G), bb, 1.0)
    est = gw.width_mc(F, trials=300, seed=1)
    assert est.sq_mean <= gw.width_bound_group(1, 16, 2, 1.0, 0.0, 1.0) + 3 * est.sq_se
    Fn = reg.certificate_frame(reg.nuclear(1.0, (6, 6)), np.outer(np.eye(6)[0], np.eye(6)[1]))
    en = gw.width_mc(Fn, trials=100, seed=2)
    assert 0 < en.mean < gw.lambda_n(36)


def test_width_bounds():
    assert gw.width_bound_lasso(8, 256, 1.0, 0.0, 8.0) == pytest.approx(70.9438, abs=1e-4)
    assert gw.width_bound_lasso(8, 256, 1.0, 0.0, 0.0) == 16.0
    assert gw.width_bound_lasso(4, 8, 1.0, 0.0, 4.0) == pytest.approx(8.0)
    assert gw.width_bound_group(4, 32, 4, 1.0, 0.0, 4.0) == pytest.approx(83.1316, abs=1e-4)
    assert gw.width_bound_group(4, 32, 4, 1.0, 0.0, 0.0) == 20.0
    with pytest.raises(ValueError):
        gw.width_bound_lasso(8, 256, 0.5, 0.5, 8.0)
    with pytest.raises(ValueError):
        gw.width_bound_group(4, 6, 4, 1.0, 0.0, 4.0)
    assert gw.bound_estimate(70.0, "bound_lasso").mean == pytest.approx(math.sqrt(70.0))


def test_gordon_tail():
    n = 50
    g = n / math.sqrt(n + 1)
    assert gw.gordon_tail(n, g, 0.0).prob == pytest.approx(0.5)
    t = gw.gordon_tail(n, n / math.sqrt(n + 1) - 2.0, 0.0)
    assert t.prob == pytest.approx(0.5 * math.exp(-2.0)) and t.guaranteed
    assert gw.gordon_tail(99, 0.0, 0.0).prob < 1e-20
    nog = gw.gordon_tail(10, 20.0, 0.0)
    assert nog.prob == 0.5 and not nog.guaranteed


def test_sample_complexity():
    assert gw.sample_complexity(0.0, 0.5 * math.exp(-2.0)) == 5
    assert gw.sample_complexity(3.0, 0.05) < gw.sample_complexity(6.0, 0.05)
    g = math.sqrt(gw.width_bound_lasso(8, 256, 1.0, 0.0, 8.0))
    assert g == pytest.approx(8.42, abs=0.01)
    assert gw.delta_for_alpha(0.05) == pytest.approx(2.146, abs=1e-3)
    n = gw.sample_complexity(g, 0.05)
    assert n == 113
    assert gw.gordon_tail(n, g, 0.0).prob <= 0.05 + 1e-12
    assert gw.gordon_tail(n - 1, g, 0.0).prob > 0.05
    with pytest.raises(ValueError):
        gw.delta_for_alpha(0.5)
