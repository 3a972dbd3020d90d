"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

Run with ``pytest -v tests/test_acceptance.py``; the lines are printed even
when output capture is on. Criterion 6 runs the full 100-trial grid and
takes several minutes on one core.
"""
import math
import time

import numpy as np

from certlab import experiments as ex
from certlab import gaussian as gw
from certlab import regularizers as reg
from certlab.losses import GLMLoss, QuadraticLoss
from tests._oracles import mixed_prox_bruteforce, mixed_value_bruteforce


def _report(capsys, num, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    with capsys.disabled():
        print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.1f}s, limit {limit:g}s)")
    return ok


def _cfg(**kw):
    return ex.load_config(None, kw)


def test_criterion_1_bregman_identity(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for fam in ("quadratic", "logistic", "poisson"):
        for _ in range(100):
            n, p = 12, 5
            X = rng.standard_normal((n, p))
            if fam == "quadratic":
                L = QuadraticLoss(X, rng.standard_normal(n))
            elif fam == "logistic":
                L = GLMLoss(X, "logistic", rng.choice([-1.0, 1.0], n))
            else:
                L = GLMLoss(0.3 * X, "poisson", rng.poisson(2.0, n).astype(float))
            a, b, c = (rng.standard_normal(p) for _ in range(3))
            lhs = L.bregman(a, b) + L.bregman(b, c) - L.bregman(a, c)
            rhs = float(np.sum((L.gradient(c) - L.gradient(b)) * (a - b)))
            worst = max(worst, abs(lhs - rhs) / (1 + abs(rhs)))
    ok = _report(capsys, 1, worst <= 1e-9, f"max |lhs-rhs|/(1+|rhs|) = {worst:.2e} (tol 1e-9)",
                 time.perf_counter() - t0, 1.0)
    assert ok


def test_criterion_2_prox(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    G = reg.GroupStructure.contiguous(4, 3)
    worst = 0.0
    for R in (reg.lasso(0.7, 12), reg.group(0.9, G), reg.nuclear(0.8, (4, 3)), reg.mixed(0.6, 1.1, G)):
        for _ in range(200):
            v = 2 * rng.standard_normal(R.shape)
            t = rng.uniform(0.1, 2.0)
            x = reg.prox(R, v, t)
            worst = max(worst, reg.subgradient_residual(R, x, (v - x) / t))
    G2 = reg.GroupStructure.contiguous(4, 2)
    gap = 0.0
    for _ in range(3):
        lam1, lamg, t = rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5), rng.uniform(0.5, 1.5)
        v = 2 * rng.standard_normal(8)
        R = reg.mixed(lam1, lamg, G2)
        x = reg.prox(R, v, t)
        fx = 0.5 * np.sum((x - v) ** 2) + t * reg.value(R, x)
        gap = max(gap, abs(fx - mixed_prox_bruteforce(lam1, lamg, 2, v, t)))
    ok = _report(capsys, 2, worst <= 1e-8 and gap <= 1e-6,
                 f"max inclusion residual {worst:.2e} (tol 1e-8); mixed prox vs grid {gap:.2e} (tol 1e-6)",
                 time.perf_counter() - t0, 30.0)
    assert ok


def test_criterion_3_certificate_recovery(capsys):
    t0 = time.perf_counter()
    cfgs = {"lasso": _cfg(n=60, p=128, s=4, trials=50, seed=3),
            "group": _cfg(regularizer="group", n=60, p=128, m=4, s=3, trials=50, seed=3),
            "nuclear": _cfg(regularizer="nuclear", shape=(10, 10), rank=1, obs_frac=0.8, trials=50, seed=3)}
    parts, violations = [], 0
    for name, cfg in cfgs.items():
        recs = ex.run_certify_recovery(cfg)
        checked = [r for r in recs if r.cert_pass and r.cert_margin is not None and r.cert_margin >= 0.1
                   and r.extra["injective"]]
        bad = [r for r in checked if not r.rel_err_l2 <= 1e-4]
        violations += len(bad)
        parts.append(f"{name}: {len(checked)}/{len(recs)} certified, {len(bad)} violations")
    ok = _report(capsys, 3, violations == 0, "; ".join(parts), time.perf_counter() - t0, 300.0)
    assert ok


def test_criterion_4_slacks(capsys):
    t0 = time.perf_counter()
    runs = [_cfg(n=30, p=6, s=2, sigma=0.5, trials=25, seed=4),
            _cfg(n=30, p=10, s=2, sigma=0.5, trials=25, seed=4),
            _cfg(family="logistic", n=60, p=6, s=2, trials=20, seed=4)]
    vals, counts = [], []
    for cfg in runs:
        recs = ex.run_oracle_audit(cfg)
        k = 0
        for r in recs:
            d = r.as_dict()
            for f in ex.SLACK_FIELDS:
                if d.get(f) is not None:
                    vals.append(float(d[f]))
                    k += 1
        counts.append(f"{cfg.family} p={cfg.p}: {len(recs)} trials, {k} slacks")
    lo = min(vals)
    ok = _report(capsys, 4, lo >= -1e-6, f"min slack {lo:.3e} (tol -1e-6); " + "; ".join(counts),
                 time.perf_counter() - t0, 180.0)
    assert ok


def test_criterion_5_width(capsys):
    t0 = time.perf_counter()
    sandwich = all(n / math.sqrt(n + 1) <= gw.lambda_n(n) <= math.sqrt(n) for n in range(1, 10_001))
    parts, mc_ok = [], True
    for p in (8, 64, 256):
        est = gw.width_mc(reg.trivial_frame(reg.lasso(1.0, p)), trials=2000, seed=p)
        z = abs(est.mean - gw.lambda_n(p)) / est.se
        mc_ok &= z <= 3
        parts.append(f"p={p}: |mc-lambda|/se={z:.2f}")
    b = np.zeros(256)
    b[:8] = np.random.default_rng(5).choice([-1.0, 1.0], 8)
    F = reg.certificate_frame(reg.lasso(1.0), b, 1.0)
    est = gw.width_mc(F, trials=2000, seed=5)
    bound = gw.width_bound_lasso(8, 256, 1.0, 0.0, 8.0)
    c_ok = est.sq_mean <= bound + 3 * est.se * 2 * est.mean and abs(bound - 70.95) < 0.01
    ok = _report(capsys, 5, sandwich and mc_ok and c_ok,
                 f"(a) sandwich {'ok' if sandwich else 'broken'}; (b) {', '.join(parts)}; "
                 f"(c) mc sq-width {est.sq_mean:.2f} vs bound {bound:.2f}",
                 time.perf_counter() - t0, 60.0)
    assert ok


def test_criterion_6_phase_transition(capsys):
    t0 = time.perf_counter()
    grid = list(range(40, 161, 8))
    cfg = _cfg(experiment="phase", p=256, s=8, sigma=0.0, trials=100, n_grid=[24] + grid, seed=6)
    res = ex.run_phase_transition(cfg)
    rate = {row["n"]: row["rate"] for row in res.table}
    cross, note = ex._crossing(grid, [rate[n] for n in grid])
    gn = res.gordon_n
    in_band = cross is not None and 0.7 * gn <= cross <= 1.3 * gn
    ok = _report(capsys, 6, in_band and rate[128] >= 0.9 and rate[24] <= 0.1,
                 f"Gordon n={gn} (width bound {res.width_bound:.2f}); crossing {cross} ({note}), "
                 f"band [{0.7 * gn:.1f}, {1.3 * gn:.1f}]; rate(24)={rate[24]:.2f}, rate(40)={rate[40]:.2f}, "
                 f"rate(128)={rate[128]:.2f}",
                 time.perf_counter() - t0, 900.0)
    assert ok


def test_criterion_7_glm_bound(capsys):
    t0 = time.perf_counter()
    recs = []
    for p, k in ((2, 7), (3, 7), (4, 6)):
        recs += ex.run_glm_bound(_cfg(experiment="glm-bound", n=60, p=p, s=1, trials=k, seed=7))
    slacks = [r.extra["bound_glm"] - r.extra["d_hat_star"] for r in recs]
    cert_all = all(r.extra["gamma2_certified"] for r in recs)
    eta_ok = all(r.extra["eta_star"] < 1 for r in recs)
    n_rad = sum(1 for r in recs if r.extra["radius_ok"])
    ok = _report(capsys, 7, len(recs) == 20 and min(slacks) >= -1e-6 and cert_all and eta_ok,
                 f"{len(recs)} instances; min bound - D_L(hat,star) = {min(slacks):.3e} (tol -1e-6); "
                 f"gamma2 certified: {cert_all}; eta(beta*)<1: {eta_ok}; radius condition met: {n_rad}/20",
                 time.perf_counter() - t0, 120.0)
    assert ok


def test_criterion_8_mixed_rule(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    rule_ok, supp_ok, gap = True, True, 0.0
    G = reg.GroupStructure.contiguous(2, 4)
    # dyadic weights put some groups exactly on the tie λ_Γ = 2λ₁√k
    for lam1, lamg in ((0.5, 1.0), (0.5, 2.0), (0.25, 1.0), (1.0, 1.5), (0.3, 2.2)):
        for _ in range(20):
            b = rng.standard_normal(8) * (rng.random(8) < 0.6)
            nnz = [int(np.count_nonzero(b[idx])) for idx in G.index]
            expect = np.array([lamg < 2 * lam1 * math.sqrt(k) for k in nnz])
            got = reg.mixed_group_rule(lam1, lamg, G, b)
            rule_ok &= np.array_equal(got, expect)
            F = reg.certificate_frame(reg.mixed(lam1, lamg, G), b)
            rule_ok &= np.array_equal(np.asarray(F.s_gamma, dtype=bool), expect)
            b1, b2 = reg.mixed_decompose(lam1, lamg, G, b)
            active = G.norms(b2) > 0
            supp_ok &= not np.any(active & ~expect)
            obj = lam1 * np.sum(np.abs(b1)) + lamg * np.sum(G.norms(b2))
            gap = max(gap, abs(obj - mixed_value_bruteforce(lam1, lamg, 4, b)))
    ok = _report(capsys, 8, rule_ok and supp_ok and gap <= 1e-6,
                 f"S_Gamma rule exact: {rule_ok}; supp(beta'') in S_Gamma: {supp_ok}; "
                 f"decomposition vs grid {gap:.2e} (tol 1e-6)", time.perf_counter() - t0, 60.0)
    assert ok


REPLAYS = {
    "phase": dict(experiment="phase", p=64, s=3, n_grid=[16, 32], trials=6),
    "certify": dict(n=40, p=64, s=3, trials=6),
    "oracle-audit": dict(n=30, p=6, s=2, sigma=0.5, trials=4, budget=200),
    "mixed-demo": dict(regularizer="mixed", p=32, m=4, n=40, sigma=0.5, trials=4),
    "matcomp-demo": dict(regularizer="nuclear", shape=(6, 6), sigma=0.1, trials=4),
    "glm-bound": dict(p=3, s=1, n=60, trials=3, budget=200),
}


def test_criterion_9_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    mismatches = []
    for kind, kw in REPLAYS.items():
        blobs = []
        for i, workers in enumerate((1, 1, 2)):
            cfg = _cfg(seed=9, workers=workers, **kw)
            out = tmp_path / f"{kind}_{i}"
            _, paths = ex.run_experiment(kind, cfg, str(out))
            blobs.append([open(p, "rb").read() for p in sorted(paths) if p.endswith(".csv")])
        if not blobs[0] == blobs[1] == blobs[2]:
            mismatches.append(kind)
    ok = _report(capsys, 9, not mismatches,
                 f"{len(REPLAYS)} experiments replayed at workers 1, 1, 2; mismatched: {mismatches or 'none'}",
                 time.perf_counter() - t0, math.inf)
    assert ok
