"""Seeded experiment harness: phase transitions, inequality audits and demos.

Every trial draws from its own generator seeded by
``SeedSequence([seed, n, trial])`` and the derived 64-bit seed is written to
the output so a single trial can be replayed. Trials run with BLAS pinned
to one thread, so results do not depend on the worker count.
"""
import csv
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from threadpoolctl import threadpool_limits

from . import __version__
from . import certificates as cert
from . import curvature as curv
from . import gaussian as gw
from . import regularizers as reg
from . import solvers
from .losses import GLMLoss, QuadraticLoss, SaturationWarning, convexity_ratio_gamma, shifted_loss

EXPERIMENTS = ("phase", "oracle-audit", "mixed-demo", "matcomp-demo", "glm-bound", "certify")
BASE_COLUMNS = ["trial", "seed", "n", "p", "status", "rel_err_l2", "b_norm_err", "cert_pass", "cert_margin",
                "slack_thm1", "slack_oracle", "wall_ms"]


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class NumericalFailure(RuntimeError):
    """An experiment could not produce results."""


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1]
    experiment: Optional[Literal["phase", "oracle-audit", "mixed-demo", "matcomp-demo", "glm-bound", "certify"]] = None
    regularizer: Literal["lasso", "group", "nuclear", "mixed"] = "lasso"
    family: Literal["squared", "logistic"] = "squared"
    n: int = Field(60, ge=1)
    n_grid: List[int] = Field(default_factory=lambda: list(range(40, 161, 8)))
    p: int = Field(256, ge=1)
    m: int = Field(1, ge=1)
    s: int = Field(8, ge=0)
    rank: int = Field(1, ge=1)
    shape: Tuple[int, int] = (10, 10)
    obs_frac: float = Field(0.8, gt=0, le=1)
    sigma: float = Field(0.0, ge=0)
    eta: float = Field(0.5, gt=0, le=1)
    lam: Optional[float] = Field(None, gt=0)
    lam_scale: float = Field(2.0, gt=0)
    c1: float = Field(2.0, gt=0)
    c2: float = Field(2.0, gt=0)
    full_groups: int = Field(2, ge=0)
    singletons: int = Field(4, ge=0)
    alpha: float = Field(0.05, gt=0, lt=0.5)
    success_tol: float = Field(1e-4, gt=0)
    trials: int = Field(20, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    workers: int = Field(1, ge=0)
    budget: int = Field(500, ge=100)
    certify_dim: int = Field(6, ge=0)
    record_timing: bool = False

    @field_validator("n_grid")
    @classmethod
    def _grid(cls, v):
        if not v or any(x < 1 for x in v):
            raise ValueError("n_grid must be a non-empty list of positive counts")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.regularizer in ("group", "mixed") and self.p % self.m:
            raise ValueError(f"p={self.p} is not a multiple of the group size m={self.m}")
        return self

    def to_json(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True)


def format_validation_error(err: ValidationError):
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"field '{loc}': {e['msg']}")
    return "\n".join(lines)


def load_config(path=None, overrides=None):
    """Read a JSON config (if given) and apply overrides; raises ConfigError."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    else:
        data = {"schema_version": 1}
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc))


# --------------------------------------------------------------------------
# records

@dataclass
class TrialRecord:
    trial: int
    seed: int
    n: int
    p: int
    status: str
    rel_err_l2: Optional[float] = None
    b_norm_err: Optional[float] = None
    cert_pass: Optional[bool] = None
    cert_margin: Optional[float] = None
    slack_thm1: Optional[float] = None
    slack_oracle: Optional[float] = None
    wall_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        d = {c: getattr(self, c) for c in BASE_COLUMNS}
        d.update(self.extra)
        return d


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def records_to_csv(records, columns=None):
    if columns is None:
        extra = []
        for r in records:
            for k in r.extra:
                if k not in extra:
                    extra.append(k)
        columns = BASE_COLUMNS + extra
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        d = r.as_dict() if isinstance(r, TrialRecord) else r
        w.writerow([_fmt(d.get(c)) for c in columns])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def records_to_json(records):
    rows = [{k: _json_value(v) for k, v in (r.as_dict() if isinstance(r, TrialRecord) else r).items()}
            for r in records]
    return json.dumps(rows, indent=1, sort_keys=False) + "\n"


# --------------------------------------------------------------------------
# seeding and parallel execution

def derive_seed(master, n, trial):
    """64-bit per-trial seed mixed from ``(master, n, trial)``."""
    ss = np.random.SeedSequence([int(master), int(n), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def resolve_workers(requested):
    env = os.environ.get("CERTLAB_THREADS")
    if env is not None and env.strip() != "":
        try:
            requested = int(env)
        except ValueError:
            raise ConfigError(f"CERTLAB_THREADS must be an integer, got {env!r}")
    if requested < 0:
        raise ConfigError("worker count must be nonnegative")
    if requested == 0:
        requested = os.cpu_count() or 1
    return requested


def _trial_entry(args):
    kind, cfg_json, n, trial = args
    cfg = ExperimentConfig(**json.loads(cfg_json))
    seed = derive_seed(cfg.seed, n, trial)
    fn = TRIAL_FUNCS[kind]
    t0 = time.perf_counter()
    with threadpool_limits(limits=1), warnings.catch_warnings():
        warnings.simplefilter("ignore", SaturationWarning)
        try:
            rec = fn(cfg, n, trial, seed)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rec = TrialRecord(trial, seed, n, cfg.p, "error", extra={"error": type(exc).__name__})
    if cfg.record_timing:
        rec.wall_ms = round(1e3 * (time.perf_counter() - t0), 3)
    return rec


def run_trials(kind, cfg: ExperimentConfig, ns):
    """All ``(n, trial)`` pairs in a fixed order, possibly on several processes."""
    tasks = [(kind, cfg.to_json(), n, t) for n in ns for t in range(cfg.trials)]
    workers = resolve_workers(cfg.workers)
    if workers <= 1 or len(tasks) <= 1:
        return [_trial_entry(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_trial_entry, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# --------------------------------------------------------------------------
# instance generators

def _signal(rng, cfg, p):
    """Planted vector and regularizer structure for lasso/group instances."""
    b = np.zeros(p)
    if cfg.regularizer == "group":
        G = reg.GroupStructure.contiguous(p // cfg.m, cfg.m)
        act = rng.choice(G.q, cfg.s, replace=False)
        for j in act:
            v = rng.standard_normal(cfg.m)
            b[G.index[j]] = v / np.linalg.norm(v)
        return b, G
    S = rng.choice(p, cfg.s, replace=False)
    b[S] = rng.choice([-1.0, 1.0], cfg.s)
    return b, None


def _reg(cfg, lam, groups=None, shape=None):
    if cfg.regularizer == "group":
        return reg.group(lam, groups)
    if cfg.regularizer == "nuclear":
        return reg.nuclear(lam, shape)
    return reg.lasso(lam, cfg.p)


def _rel(a, b):
    nb = float(np.linalg.norm(b))
    d = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    return d / nb if nb > 0 else d


def oracle_lambda(cfg, L, R1, beta_star):
    """Penalty level: ``cfg.lam`` if set, else ``lam_scale·R°(∇L(β*))/η``.

    With the unit-λ regularizer ``R1`` this puts ``η̃ = η/lam_scale``, so the
    default ``lam_scale = 2`` stays inside the guaranteed branch.
    """
    if cfg.lam is not None:
        return cfg.lam
    d = float(reg.dual_norm(R1, L.gradient(beta_star)))
    return cfg.lam_scale * d / cfg.eta if d > 0 else 1.0


def _interior(X, F):
    try:
        rep = cert.build_interior_noisefree(X, F)
        return rep.passed, rep.margin, True
    except cert.NotInjectiveError:
        return False, None, False


# --------------------------------------------------------------------------
# phase transition

def _phase_trial(cfg, n, trial, seed):
    rng = np.random.default_rng(seed)
    p = cfg.p
    b, G = _signal(rng, cfg, p)
    X = rng.standard_normal((n, p))
    y = X @ b
    if cfg.sigma > 0:
        y = y + cfg.sigma * rng.standard_normal(n)
    R1 = _reg(cfg, 1.0, G)
    if cfg.sigma == 0:
        res = solvers.solve_basis_pursuit(X, y, R1)
    else:
        L = QuadraticLoss(X, y)
        res = solvers.solve_regularized(L, _reg(cfg, oracle_lambda(cfg, L, R1, b), G))
    F = reg.certificate_frame(R1, b, 1.0)
    passed, margin, inj = _interior(X, F)
    err = _rel(res.beta, b)
    return TrialRecord(trial, seed, n, p, res.status, err, float(F.b_norm(res.beta - b)), passed, margin,
                       extra={"success": err <= cfg.success_tol, "injective": inj})


@dataclass
class PhaseResult:
    table: list
    records: list
    crossing: Optional[float]
    crossing_note: str
    gordon_n: int
    width_bound: float


def _crossing(ns, rates, level=0.5):
    order = np.argsort(ns)
    ns = np.asarray(ns, dtype=float)[order]
    rates = np.asarray(rates, dtype=float)[order]
    if rates[0] >= level:
        return float(ns[0]), "below_grid"
    for i in range(1, len(ns)):
        if rates[i] >= level > rates[i - 1]:
            t = (level - rates[i - 1]) / (rates[i] - rates[i - 1])
            return float(ns[i - 1] + t * (ns[i] - ns[i - 1])), "interpolated"
    return None, "above_grid"


def phase_width_bound(cfg):
    if cfg.regularizer == "group":
        return gw.width_bound_group(cfg.s, cfg.p // cfg.m, cfg.m, 1.0, 0.0, float(cfg.s))
    return gw.width_bound_lasso(cfg.s, cfg.p, 1.0, 0.0, float(cfg.s))


def run_phase_transition(cfg: ExperimentConfig):
    if cfg.regularizer not in ("lasso", "group"):
        raise ConfigError("phase transition supports lasso and group regularizers")
    if cfg.s < 1:
        raise ConfigError("field 's': need a nonempty support")
    q = cfg.p // cfg.m if cfg.regularizer == "group" else cfg.p
    if q < 2 * cfg.s:
        raise ConfigError("field 's': need p >= 2|S| for the width bound")
    wb = phase_width_bound(cfg)
    g = math.sqrt(wb)
    gn = gw.sample_complexity(g, cfg.alpha)
    ns = sorted(set(cfg.n_grid))
    recs = run_trials("phase", cfg, ns)
    table = []
    rates = []
    for n in ns:
        rs = [r for r in recs if r.n == n]
        succ = sum(1 for r in rs if r.extra.get("success"))
        rate = succ / len(rs)
        rates.append(rate)
        pred = gw.gordon_tail(n, g, 0.0)
        table.append({"n": n, "trials": len(rs), "successes": succ, "rate": rate,
                      "pred_success_lower": (1.0 - pred.prob) if pred.guaranteed else 0.0,
                      "gordon_n": gn, "width_bound": wb})
    cross, note = _crossing(ns, rates)
    return PhaseResult(table, recs, cross, note, gn, wb)


# --------------------------------------------------------------------------
# certificate ⇒ recovery

def _certify_trial(cfg, n, trial, seed):
    rng = np.random.default_rng(seed)
    if cfg.regularizer == "nuclear":
        return _matcomp_instance(cfg, n, trial, seed, rng, noise=False)
    p = cfg.p
    b, G = _signal(rng, cfg, p)
    X = rng.standard_normal((n, p))
    y = X @ b
    R1 = _reg(cfg, 1.0, G)
    F = reg.certificate_frame(R1, b, 1.0)
    passed, margin, inj = _interior(X, F)
    res = solvers.solve_basis_pursuit(X, y, R1)
    err = _rel(res.beta, b)
    return TrialRecord(trial, seed, n, p, res.status, err, float(F.b_norm(res.beta - b)), passed, margin,
                       extra={"injective": inj, "recovered": err <= cfg.success_tol})


def run_certify_recovery(cfg: ExperimentConfig):
    return run_trials("certify", cfg, [cfg.n])


# --------------------------------------------------------------------------
# oracle-inequality audit

def _audit_trial(cfg, n, trial, seed):
    rng = np.random.default_rng(seed)
    p = cfg.p
    b, G = _signal(rng, cfg, p)
    X = rng.standard_normal((n, p))
    extra = {}
    if cfg.family == "squared":
        y = X @ b + cfg.sigma * rng.standard_normal(n)
        L = QuadraticLoss(X, y)
    else:
        pr = 1.0 / (1.0 + np.exp(-(X @ b)))
        y = np.where(rng.random(n) < pr, 1.0, -1.0)
        L = GLMLoss(X, "logistic", y)
    lam = oracle_lambda(cfg, L, _reg(cfg, 1.0, G), b)
    R = _reg(cfg, lam, G)
    beta_star = b
    res = solvers.solve_regularized(L, R)
    F = reg.certificate_frame(R, b, cfg.eta)
    split = cert.split_gradient(L, beta_star, F)
    status = res.status if split.eta_tilde < cfg.eta else "no_guarantee"
    extra["eta_tilde"] = split.eta_tilde
    # recovery bound with the certificate of L itself
    gc = solvers.solve_certificate_global(L, F)
    slack1 = None
    if gc.status in ("converged", "stalled", "max_iter"):
        slack1 = cert.recovery_bound_thm1(L, R, F, res.beta, gc.Q, gc.delta)
    extra["cert_global_status"] = gc.status
    # oracle inequality with the shifted loss γL
    if cfg.family == "squared":
        gam = 1.0
    else:
        A = float(max(np.max(np.abs(L.linear(b))), np.max(np.abs(L.linear(res.beta)))))
        gam = float(convexity_ratio_gamma(L, A))
    Lbar = shifted_loss(L, b, beta_star, gam)
    gs = solvers.solve_certificate_global(Lbar, F)
    slack_o = None
    if gs.status in ("converged", "stalled", "max_iter"):
        o = cert.oracle_bound_thm2(L, gam, R, F, beta_star, res.beta, gs.Q, gs.delta)
        extra["slack_thm2"] = o.slack_theorem
        extra["oracle_condition"] = o.condition_ok
        slack_o = o.slack if o.condition_ok else None
    extra["gamma"] = gam
    cert_pass, cert_margin = None, None
    lhs = L.bregman(res.beta, beta_star)
    if cfg.family == "squared":
        try:
            irr = cert.check_irrepresentable(L, F, split=split)
            cert_pass, cert_margin = irr.passed, irr.margin
            bound, term = cert.oracle_bound_tangent_quadratic(L, F, split=split)
            extra["bound_tangent"] = bound
            if irr.passed and status != "no_guarantee":
                extra["slack_tangent"] = bound - (lhs + (1.0 - cfg.eta) * float(F.b_norm(res.beta)))
        except (ValueError, np.linalg.LinAlgError) as exc:  # singular H_T is recorded, not fatal
            extra["tangent_error"] = type(exc).__name__
        if p <= cfg.certify_dim and status != "no_guarantee":
            est = curv.rsc_estimate(L, curv.ConeSpec.certificate(F, split), cfg.budget, seed % (2**32))
            extra["rsc_lower"] = est.lower
            extra["rsc_certified"] = est.certified
            if est.certified and est.lower > 0:
                bg = cert.recovery_bound_global(F, split, est.lower, "l2", L.bregman(b, beta_star))
                extra["bound_global"] = bg
                extra["slack_global"] = bg - (lhs + cert.r_gap(R, F, res.beta))
    return TrialRecord(trial, seed, n, p, status, _rel(res.beta, b), float(F.b_norm(res.beta - b)),
                       cert_pass, cert_margin, slack1, slack_o, extra=extra)


def run_oracle_audit(cfg: ExperimentConfig):
    if cfg.regularizer not in ("lasso", "group"):
        raise ConfigError("oracle audit supports lasso and group regularizers")
    return run_trials("oracle-audit", cfg, [cfg.n])


SLACK_FIELDS = ("slack_thm1", "slack_oracle", "slack_thm2", "slack_tangent", "slack_global", "slack_glm")


def min_slack(records):
    vals = []
    for r in records:
        d = r.as_dict()
        for k in SLACK_FIELDS:
            v = d.get(k)
            if v is not None and np.isfinite(v):
                vals.append(float(v))
    return min(vals) if vals else None


# --------------------------------------------------------------------------
# mixed-norm demo

def mixed_lambdas(cfg, n):
    q = cfg.p // cfg.m
    sig = cfg.sigma if cfg.sigma > 0 else 1.0
    lam1 = cfg.c1 * sig * math.sqrt(n * math.log(cfg.p))
    lamg = cfg.c2 * sig * math.sqrt(n * (cfg.m + math.log(q)))
    return lam1, lamg


def _mixed_trial(cfg, n, trial, seed):
    rng = np.random.default_rng(seed)
    p, m = cfg.p, cfg.m
    G = reg.GroupStructure.contiguous(p // m, m)
    if cfg.full_groups + cfg.singletons > G.q:
        raise ValueError("not enough groups for the planted signal")
    groups = rng.choice(G.q, cfg.full_groups + cfg.singletons, replace=False)
    b = np.zeros(p)
    for j in groups[:cfg.full_groups]:
        b[G.index[j]] = rng.choice([-1.0, 1.0], m)
    for j in groups[cfg.full_groups:]:
        b[G.index[j][rng.integers(m)]] = rng.choice([-1.0, 1.0])
    X = rng.standard_normal((n, p))
    y = X @ b + cfg.sigma * rng.standard_normal(n)
    L = QuadraticLoss(X, y)
    lam1, lamg = mixed_lambdas(cfg, n)
    errs = {}
    for name, R in (("lasso", reg.lasso(lam1, p)), ("group", reg.group(lamg, G)),
                    ("mixed", reg.mixed(lam1, lamg, G))):
        r = solvers.solve_regularized(L, R)
        d = X @ (r.beta - b)
        errs[name] = float(d @ d)
        errs[name + "_status"] = r.status
    rule = reg.mixed_group_rule(lam1, lamg, G, b)
    _, b2 = reg.mixed_decompose(lam1, lamg, G, b)
    act2 = G.norms(b2) > 0
    supp_ok = bool(np.all(rule[act2]))
    extra = {"pred_err_lasso": errs["lasso"], "pred_err_group": errs["group"], "pred_err_mixed": errs["mixed"],
             "s_gamma": " ".join(str(j) for j in np.flatnonzero(rule)), "supp_ok": supp_ok,
             "lam1": lam1, "lam_g": lamg,
             "mixed_gap": errs["mixed"] - min(errs["lasso"], errs["group"])}
    status = "ok" if all(errs[k + "_status"] == "converged" for k in ("lasso", "group", "mixed")) else "solver_incomplete"
    return TrialRecord(trial, seed, n, p, status, extra=extra)


def run_mixed_demo(cfg: ExperimentConfig):
    if cfg.m < 2:
        raise ConfigError("field 'm': the mixed demo needs groups of size at least 2")
    return run_trials("mixed-demo", cfg, [cfg.n])


# --------------------------------------------------------------------------
# matrix completion demo

def _check_matcomp(cfg):
    p1, p2 = cfg.shape
    if p1 > 30 or p2 > 30:
        raise ConfigError("field 'shape': matrix completion demo is limited to 30 x 30")
    if cfg.rank > 3 or cfg.rank > min(p1, p2):
        raise ConfigError("field 'rank': must be at most 3 and at most min(shape)")
    if cfg.obs_frac < 0.5:
        raise ConfigError("field 'obs_frac': must be at least 0.5")


def _matcomp_instance(cfg, n, trial, seed, rng, noise=True):
    p1, p2 = cfg.shape
    r = cfg.rank
    U = rng.standard_normal((p1, r))
    V = rng.standard_normal((p2, r))
    b = U @ V.T
    k = int(round(cfg.obs_frac * p1 * p2))
    obs = np.sort(rng.choice(p1 * p2, k, replace=False))
    X = np.zeros((k, p1 * p2))
    X[np.arange(k), obs] = 1.0
    y = b.ravel()[obs]
    sig = cfg.sigma if noise else 0.0
    if sig > 0:
        y = y + sig * rng.standard_normal(k)
    shape = (p1, p2)
    R1 = reg.nuclear(1.0, shape)
    F1 = reg.certificate_frame(R1, b, 1.0)
    passed, margin, inj = _interior(X, F1)
    extra = {"observed": k, "injective": inj}
    if sig == 0:
        res = solvers.solve_basis_pursuit(X, y, R1, shape=shape)
        err = _rel(res.beta, b)
        extra["recovered"] = err <= cfg.success_tol
        return TrialRecord(trial, seed, k, p1 * p2, res.status, err, float(F1.b_norm(res.beta - b)),
                           passed, margin, extra=extra)
    L = QuadraticLoss(X, y, shape)
    R = reg.nuclear(oracle_lambda(cfg, L, R1, b), shape)
    res = solvers.solve_regularized(L, R)
    F = reg.certificate_frame(R, b, cfg.eta)
    split = cert.split_gradient(L, b, F)
    irr = cert.check_irrepresentable(L, F, split=split)
    bound, term = cert.oracle_bound_tangent_quadratic(L, F, split=split)
    lhs = L.bregman(res.beta, b) + (1.0 - cfg.eta) * float(F.b_norm(res.beta))
    slack = bound - lhs if irr.passed and split.eta_tilde < cfg.eta else None
    extra.update({"eta_tilde": split.eta_tilde, "bound_tangent": bound, "interior_pass": passed})
    status = res.status if split.eta_tilde < cfg.eta else "no_guarantee"
    return TrialRecord(trial, seed, k, p1 * p2, status, _rel(res.beta, b), float(F.b_norm(res.beta - b)),
                       irr.passed, irr.margin, None, slack, extra=extra)


def _matcomp_trial(cfg, n, trial, seed):
    return _matcomp_instance(cfg, n, trial, seed, np.random.default_rng(seed), noise=True)


def run_matcomp_demo(cfg: ExperimentConfig):
    _check_matcomp(cfg)
    return run_trials("matcomp-demo", cfg, [cfg.n])


# --------------------------------------------------------------------------
# GLM bound

def _glm_trial(cfg, n, trial, seed):
    rng = np.random.default_rng(seed)
    p = cfg.p
    b, _ = _signal(rng, cfg, p)
    X = rng.standard_normal((n, p))
    pr = 1.0 / (1.0 + np.exp(-(X @ b)))
    y = np.where(rng.random(n) < pr, 1.0, -1.0)
    L = GLMLoss(X, "logistic", y)
    R = reg.lasso(oracle_lambda(cfg, L, reg.lasso(1.0, p), b), p)
    rep = curv.glm_oracle_bound(L, b, b, R, "l2", cfg.budget, seed % (2**32))
    res = solvers.solve_regularized(L, R)
    lhs = L.bregman(res.beta, b)
    cond = rep.radius_ok(b, res.beta)
    extra = {"bound_glm": rep.bound, "lam_pen": rep.lam, "gamma2": rep.gamma2,
             "gamma2_certified": rep.gamma2_certified, "eta_star": rep.eta_star,
             "radius_ok": cond, "d_hat_star": lhs}
    extra["slack_glm"] = rep.bound - lhs if cond else None
    return TrialRecord(trial, seed, n, p, res.status, _rel(res.beta, b), None, None, None, extra=extra)


def run_glm_bound(cfg: ExperimentConfig):
    if cfg.regularizer != "lasso":
        raise ConfigError("field 'regularizer': the GLM experiment uses lasso")
    return run_trials("glm-bound", cfg, [cfg.n])


TRIAL_FUNCS = {"phase": _phase_trial, "certify": _certify_trial, "oracle-audit": _audit_trial,
               "mixed-demo": _mixed_trial, "matcomp-demo": _matcomp_trial, "glm-bound": _glm_trial}

RUNNERS = {"phase": run_phase_transition, "certify": run_certify_recovery, "oracle-audit": run_oracle_audit,
           "mixed-demo": run_mixed_demo, "matcomp-demo": run_matcomp_demo, "glm-bound": run_glm_bound}


# --------------------------------------------------------------------------
# persistence

def _out_name(kind):
    return kind.replace("-", "_")


def write_outputs(kind, cfg: ExperimentConfig, result, out_dir, fmt="csv", elapsed=None):
    """Write the result table(s) and ``<name>.meta.json``; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    name = _out_name(kind)
    paths = []
    meta = {"certlab_version": __version__, "experiment": kind, "seed": cfg.seed,
            "config": json.loads(cfg.to_json())}
    if isinstance(result, PhaseResult):
        cols = ["n", "trials", "successes", "rate", "pred_success_lower", "gordon_n", "width_bound"]
        main = result.table
        trials = result.records
        meta.update({"crossing_n": result.crossing, "crossing_note": result.crossing_note,
                     "gordon_n": result.gordon_n, "width_bound": result.width_bound})
    else:
        cols = None
        main = result
        trials = None
        meta["min_slack"] = min_slack(result)
        meta["trials"] = len(result)
    if cfg.record_timing and elapsed is not None:
        meta["wall_ms_total"] = round(1e3 * elapsed, 3)
    ext = "json" if fmt == "json" else "csv"
    p = os.path.join(out_dir, f"{name}.{ext}")
    with open(p, "w", newline="") as fh:
        fh.write(records_to_json(main) if fmt == "json" else records_to_csv(main, cols))
    paths.append(p)
    if trials is not None:
        p = os.path.join(out_dir, f"{name}_trials.{ext}")
        with open(p, "w", newline="") as fh:
            fh.write(records_to_json(trials) if fmt == "json" else records_to_csv(trials))
        paths.append(p)
    p = os.path.join(out_dir, f"{name}.meta.json")
    with open(p, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    paths.append(p)
    return paths


def run_experiment(kind, cfg: ExperimentConfig, out_dir=None, fmt="csv"):
    if kind not in RUNNERS:
        raise ConfigError(f"unknown experiment {kind!r}")
    t0 = time.perf_counter()
    result = RUNNERS[kind](cfg)
    elapsed = time.perf_counter() - t0
    paths = write_outputs(kind, cfg, result, out_dir, fmt, elapsed) if out_dir else []
    return result, paths
