import json

import numpy as np
import pytest

from certlab import experiments as ex
from certlab import regularizers as reg
from certlab.losses import QuadraticLoss


def _cfg(**kw):
    return ex.load_config(None, kw)


def test_config_defaults_and_roundtrip(tmp_path):
    cfg = _cfg()
    assert cfg.schema_version == 1 and cfg.n_grid == list(range(40, 161, 8))
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert ex.load_config(str(path)) == cfg


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1,\n "p": }')
    with pytest.raises(ex.ConfigError, match="line 2"):
        ex.load_config(str(bad))
    bad.write_text('{"p": 10}')
    with pytest.raises(ex.ConfigError, match="field 'schema_version'"):
        ex.load_config(str(bad))
    bad.write_text('{"schema_version": 1, "colour": 1}')
    with pytest.raises(ex.ConfigError, match="colour"):
        ex.load_config(str(bad))
    with pytest.raises(ex.ConfigError, match="multiple"):
        _cfg(regularizer="group", p=10, m=4)
    with pytest.raises(ex.ConfigError, match="n_grid"):
        _cfg(n_grid=[])
    with pytest.raises(ex.ConfigError):
        ex.load_config(str(tmp_path / "missing.json"))


def test_csv_formatting():
    r = ex.TrialRecord(0, 7, 10, 4, "converged", 0.1, None, True, 0.5, extra={"k": 3})
    text = ex.records_to_csv([r])
    head, row = text.strip().split("\n")
    assert head.split(",")[-1] == "k"
    assert row.startswith("0,7,10,4,converged,0.1,,1,0.5,")
    assert json.loads(ex.records_to_json([r]))[0]["cert_pass"] is True


def test_derive_seed():
    a = ex.derive_seed(0, 40, 1)
    assert a == ex.derive_seed(0, 40, 1)
    assert len({a, ex.derive_seed(0, 40, 2), ex.derive_seed(0, 48, 1), ex.derive_seed(1, 40, 1)}) == 4
    assert 0 <= ex.derive_seed(2**64 - 1, 1, 0) < 2**64


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv("CERTLAB_THREADS", raising=False)
    assert ex.resolve_workers(3) == 3 and ex.resolve_workers(0) >= 1
    monkeypatch.setenv("CERTLAB_THREADS", "2")
    assert ex.resolve_workers(1) == 2
    monkeypatch.setenv("CERTLAB_THREADS", "many")
    with pytest.raises(ex.ConfigError):
        ex.resolve_workers(1)


def test_crossing():
    assert ex._crossing([10, 20, 30], [0.0, 0.4, 0.8]) == (22.5, "interpolated")
    assert ex._crossing([10, 20], [0.6, 1.0]) == (10.0, "below_grid")
    assert ex._crossing([10, 20], [0.0, 0.1]) == (None, "above_grid")


def test_phase_small_and_deterministic(tmp_path):
    cfg = _cfg(p=32, s=2, n_grid=[4, 24], trials=4, seed=5)
    res, paths = ex.run_experiment("phase", cfg, str(tmp_path / "a"))
    assert [row["n"] for row in res.table] == [4, 24]
    assert res.table[0]["rate"] <= res.table[1]["rate"]
    assert {p.rsplit("/", 1)[1] for p in paths} >= {"phase.csv", "phase_trials.csv", "phase.meta.json"}
    meta = json.loads((tmp_path / "a" / "phase.meta.json").read_text())
    assert meta["seed"] == 5 and "wall_ms_total" not in meta
    ex.run_experiment("phase", cfg.model_copy(update={"workers": 2}), str(tmp_path / "b"))
    for name in ("phase.csv", "phase_trials.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_phase_rejects_bad_support():
    with pytest.raises(ex.ConfigError):
        ex.run_phase_transition(_cfg(p=8, s=5))


def test_oracle_lambda_policy():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 6))
    b = np.r_[1.0, 0, 0, 0, 0, 0]
    L = QuadraticLoss(X, X @ b + rng.standard_normal(20))
    g = np.max(np.abs(L.gradient(b)))
    assert ex.oracle_lambda(_cfg(eta=0.5), L, reg.lasso(1.0, 6), b) == pytest.approx(2 * g / 0.5)
    assert ex.oracle_lambda(_cfg(lam=3.0), L, reg.lasso(1.0, 6), b) == 3.0
    assert ex.oracle_lambda(_cfg(), QuadraticLoss(X, X @ b), reg.lasso(1.0, 6), b) == 1.0


def test_audit_guaranteed_slacks():
    cfg = _cfg(experiment="oracle-audit", n=30, p=6, s=2, sigma=0.5, trials=3, budget=200)
    recs = ex.run_oracle_audit(cfg)
    assert all(r.status != "no_guarantee" for r in recs)
    assert ex.min_slack(recs) >= -1e-6
    assert all("slack_tangent" in r.extra for r in recs if r.cert_pass)


def test_audit_no_guarantee_branch():
    # a tiny penalty leaves the noise gradient far outside the dual ball: η̃ ≫ η
    recs = ex.run_oracle_audit(_cfg(n=30, p=6, s=2, sigma=0.5, trials=2, lam=0.01, budget=200))
    assert all(r.status == "no_guarantee" for r in recs)
    assert all("slack_tangent" not in r.extra and "slack_global" not in r.extra for r in recs)


def test_certify_nuclear_and_lasso():
    recs = ex.run_certify_recovery(_cfg(regularizer="nuclear", shape=(6, 6), n=30, trials=2))
    assert len(recs) == 2
    recs = ex.run_certify_recovery(_cfg(n=40, p=64, s=3, trials=3))
    for r in recs:
        if r.cert_pass and r.extra["injective"]:
            assert r.extra["recovered"]


def test_matcomp_limits():
    with pytest.raises(ex.ConfigError, match="30 x 30"):
        ex.run_matcomp_demo(_cfg(regularizer="nuclear", shape=(40, 10)))
    with pytest.raises(ex.ConfigError, match="rank"):
        ex.run_matcomp_demo(_cfg(regularizer="nuclear", rank=4))
    with pytest.raises(ex.ConfigError, match="obs_frac"):
        ex.run_matcomp_demo(_cfg(regularizer="nuclear", obs_frac=0.3))


def test_mixed_demo_support_rule():
    recs = ex.run_mixed_demo(_cfg(regularizer="mixed", p=32, m=4, n=40, sigma=0.5, trials=2))
    assert all(r.extra["supp_ok"] for r in recs)
    with pytest.raises(ex.ConfigError):
        ex.run_mixed_demo(_cfg(regularizer="mixed", m=1))


def test_glm_demo_runs():
    recs = ex.run_glm_bound(_cfg(p=3, s=1, n=60, trials=2, budget=200))
    for r in recs:
        assert r.extra["eta_star"] < 1
        if r.extra["slack_glm"] is not None:
            assert r.extra["slack_glm"] >= -1e-6
