"""Proximal solvers: regularized estimation, basis pursuit and certificate problems."""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import linalg
from . import regularizers as reg
from .losses import Loss, QuadraticLoss, ShiftedLoss


@dataclass
class SolveOptions:
    max_iter: int = 20000
    obj_tol: float = 1e-15
    kkt_tol: float = 1e-9
    backtrack: float = 0.5
    accel: bool = True
    check_every: int = 10
    power_iters: int = 20
    feas_tol: float = 1e-9
    bp_rho0: float = 1.0
    bp_factor: float = 10.0
    bp_stages: int = 8
    bp_stage_iter: int = 3000
    bp_stage_kkt: float = 1e-7
    unbounded: float = 1e12
    debug: bool = False

    def __post_init__(self):
        for name in ("obj_tol", "kkt_tol", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")


@dataclass
class SolveResult:
    beta: np.ndarray
    iterations: int
    objective: float
    kkt: float
    status: str
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"iterations": self.iterations, "objective": self.objective, "kkt": self.kkt,
                "status": self.status, "message": self.message,
                "beta": np.asarray(self.beta).tolist()}


# --------------------------------------------------------------------------

def lipschitz_estimate(L: Loss, x0, iters=20):
    """Power-iteration estimate of the gradient Lipschitz constant at ``x0``."""
    if isinstance(L, ShiftedLoss):
        return L.gamma * lipschitz_estimate(L.base, x0, iters) + L.ridge
    X = L.X
    shape = (X.shape[1],)
    nrm = linalg.power_norm_sq(lambda v: X @ v, lambda r: X.T @ r, shape, iters)
    if isinstance(L, QuadraticLoss):
        return 2.0 * nrm
    if L.family == "logistic":
        return 0.25 * nrm
    if L.family == "squared":
        return 2.0 * nrm
    w = L.curvature_weights(x0)
    return float(np.max(w, initial=1e-12)) * nrm


def _apg(f, grad, g, prox, x0, L0, opts: SolveOptions, kkt, fval_floor=None):
    """Monotone accelerated proximal gradient with backtracking and restarts.

    ``f``/``grad`` is the smooth part, ``g``/``prox`` the nonsmooth part;
    ``prox(v, t)`` is the proximal map of ``t·g``. Returns
    ``(x, iterations, objective, kkt_value, status)``.
    """
    x = np.array(x0, dtype=float)
    Lk = max(float(L0), 1e-12)
    Fx = f(x) + g(x)
    y = x.copy()
    t = 1.0
    status = "max_iter"
    res = np.inf
    it = 0
    stall = 0
    for it in range(1, opts.max_iter + 1):
        fy = f(y)
        gy = grad(y)
        while True:
            z = prox(y - gy / Lk, 1.0 / Lk)
            d = z - y
            fz = f(z)
            model = fy + np.sum(gy * d) + 0.5 * Lk * np.sum(d * d)
            if fz <= model + 1e-12 * max(1.0, abs(fy)):
                break
            Lk /= opts.backtrack
            if Lk > 1e30:
                return x, it, Fx, kkt(x), "stalled"
        Fz = fz + g(z)
        if not np.isfinite(Fz):
            return x, it, Fx, kkt(x), "stalled"
        if Fz < -opts.unbounded or np.max(np.abs(z)) > opts.unbounded:
            return z, it, Fz, np.inf, "unbounded"
        # comparisons are made up to roundoff so the iterate keeps contracting
        # once objective differences fall below machine resolution
        slack = 1e-14 * max(1.0, abs(Fx))
        accept = Fz <= Fx + slack
        if accept:
            x_new, F_new = z, Fz
        else:
            x_new, F_new = x, Fx
        if opts.debug:
            assert F_new <= Fx + slack, "objective increased"
        if opts.accel and accept:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_new
            y_next = x_new + mom * (x_new - x)
            # gradient restart: momentum points uphill
            if np.sum((y - x_new) * (x_new - x)) > 0:
                t_new = 1.0
                y_next = x_new
        else:
            t_new = 1.0
            y_next = x_new
        decrease = Fx - F_new
        x, Fx, t, y = x_new, F_new, t_new, y_next
        # count steps that make no measurable progress (roundoff floor)
        stall = stall + 1 if decrease <= opts.obj_tol * max(1.0, abs(Fx)) else 0
        if it % opts.check_every == 0 or stall == 3:
            res = kkt(x)
            if res <= opts.kkt_tol:
                status = "converged"
                break
            if stall >= 500:
                status = "stalled"
                break
    else:
        res = kkt(x)
        if res <= opts.kkt_tol:
            status = "converged"
    return x, it, Fx, res, status


def kkt_residual(L: Loss, R: reg.Regularizer, beta):
    """Distance proxy of ``−∇L(β)`` to ``∂R(β)`` (dual-norm violation + alignment gap)."""
    g = -np.asarray(L.gradient(beta))
    return reg.subgradient_residual(R, beta, g)


def solve_regularized(L: Loss, R: reg.Regularizer, opts: Optional[SolveOptions] = None, x0=None):
    """Minimise ``L(β) + R(β)``."""
    opts = opts or SolveOptions()
    shape = L.shape
    x0 = np.zeros(shape) if x0 is None else np.asarray(x0, dtype=float).reshape(shape)
    L0 = lipschitz_estimate(L, x0, opts.power_iters)
    x, it, F, res, status = _apg(
        L.value, L.gradient, lambda b: float(reg.value(R, b)), lambda v, t: reg.prox(R, v, t),
        x0, L0, opts, lambda b: kkt_residual(L, R, b))
    msg = "" if status == "converged" else f"kkt residual {res:.3e} after {it} iterations"
    return SolveResult(x, it, float(F), float(res), status, msg)


# --------------------------------------------------------------------------
# certificate problems

@dataclass
class GlobalCertificate:
    Q: np.ndarray
    delta: np.ndarray
    status: str
    iterations: int
    objective: float
    dual_residual: float
    tangent_residual: float
    kkt: float


def certificate_delta(L: Loss, F: reg.CertificateFrame, Q):
    """Smallest correction ``δ`` with ``−∇L(Q) + δ ∈ G``."""
    w = -np.asarray(L.gradient(Q)) - F.sign
    wt = F.tangent.project(w)
    wo = w - wt
    return -wt + (F.project_b_dual(wo, F.eta) - wo)


def _cert_kkt(L, F, Q):
    g = -np.asarray(L.gradient(Q)) - F.sign
    gt = F.tangent.project(g)
    go = g - gt
    eta = F.eta
    bq = float(F.b_norm(Q))
    dual = max(0.0, float(F.b_dual_norm(go)) / eta - 1.0)
    tang = float(np.linalg.norm(gt)) / max(1.0, float(np.linalg.norm(F.sign)))
    align = abs(float(np.sum(go * Q)) - eta * bq) / max(1.0, eta * bq)
    return dual + tang + align


def solve_certificate_global(L_eff: Loss, F: reg.CertificateFrame, opts: Optional[SolveOptions] = None,
                             x0=None):
    """Minimise ``L_eff(β) + ⟨e, β⟩ + η·b_norm(β)``."""
    opts = opts or SolveOptions()
    e = F.sign
    x0 = F.anchor.copy() if x0 is None else np.asarray(x0, dtype=float)
    L0 = lipschitz_estimate(L_eff, x0, opts.power_iters)
    f = lambda b: L_eff.value(b) + float(np.sum(e * b))
    grad = lambda b: L_eff.gradient(b) + e
    g = lambda b: F.eta * float(F.b_norm(b))
    prox = lambda v, t: F.b_prox(v, t * F.eta)
    Q, it, obj, res, status = _apg(f, grad, g, prox, x0, L0, opts, lambda b: _cert_kkt(L_eff, F, b))
    if status == "unbounded":
        return GlobalCertificate(Q, np.full(Q.shape, np.nan), status, it, obj, np.inf, np.inf, np.inf)
    grad_q = -np.asarray(L_eff.gradient(Q)) - e
    gt = F.tangent.project(grad_q)
    dual_res = max(0.0, float(F.b_dual_norm(grad_q - gt)) - F.eta)
    delta = certificate_delta(L_eff, F, Q)
    return GlobalCertificate(Q, delta, status, it, float(obj), dual_res,
                             float(np.linalg.norm(gt)), float(res))


def tangent_solve(L: QuadraticLoss, T: reg.TangentSpace, rhs, tol=1e-10):
    """Solve ``H_T x = P_T rhs`` with ``x ∈ T`` (``H = XᵀX``)."""
    rhs = np.asarray(rhs, dtype=float)
    if T.dim == 0:
        return np.zeros(T.shape)
    if T.kind == "matrix":
        b = T.project(rhs)
        op = lambda v: T.project(L.H_apply(T.project(v)))
        x, it, rel = linalg.cg_solve(op, b, tol=tol, max_iter=10 * T.dim)
        if rel <= tol:
            return T.project(x)
    B = T.basis()
    XB = L.X @ B
    c = linalg.solve_spd(XB.T @ XB, B.T @ rhs.ravel())
    return (B @ c).reshape(T.shape)


@dataclass
class TangentCertificate:
    Q: np.ndarray
    dQ: np.ndarray
    residual: float


def solve_certificate_tangent(L: QuadraticLoss, F: reg.CertificateFrame, T: Optional[reg.TangentSpace] = None,
                              a_tilde=None):
    """``Q = β̄ − ½·H_T⁻¹(e + ã)``."""
    T = T or F.tangent
    a = np.zeros(F.shape) if a_tilde is None else np.asarray(a_tilde, dtype=float)
    dQ = -0.5 * tangent_solve(L, T, F.sign + a)
    Q = F.anchor + dQ
    # ∇L̄_*(Q) = 2H(Q − β̄) + ∇L(β*) and P_T∇L(β*) = ã
    resid = float(np.linalg.norm(T.project(2.0 * L.H_apply(dQ) + a + F.sign)))
    return TangentCertificate(Q, dQ, resid)


# --------------------------------------------------------------------------
# basis pursuit

def _detect_tangent(R, beta, tol=reg.DEFAULT_RANK_TOL):
    return reg.certificate_frame(R, beta, 1.0, tol)


def _interior_lhs(X, F):
    """``b_dual_norm(v₀ − e)`` for the least-squares dual on the tangent space."""
    T = F.tangent
    if T.dim == 0:
        return 0.0, True
    B = T.basis()
    XB = X @ B
    if T.dim > X.shape[0]:
        return np.inf, False
    s = np.linalg.svd(XB, compute_uv=False)
    if s[-1] <= 1e-10 * max(1.0, s[0]):
        return np.inf, False
    w = XB @ np.linalg.solve(XB.T @ XB, B.T @ F.sign.ravel())
    v0 = (X.T @ w).reshape(F.shape)
    return float(F.b_dual_norm(v0 - F.sign)), True


def _polish(X, y, R, beta, shape, feas, max_gn=30):
    """Least-squares polish of ``beta`` on its detected structure."""
    if not np.any(beta):
        return None
    if R.variant != "nuclear":
        cur = beta
        for _ in range(2):
            mask = np.abs(cur) > reg.DEFAULT_RANK_TOL * np.max(np.abs(cur))
            if R.variant == "group":
                mask = R.groups.expand(R.groups.norms(cur * mask) > 0).astype(bool)
            idx = np.flatnonzero(mask.ravel())
            if idx.size == 0 or idx.size > X.shape[0]:
                return None
            Xs = X[:, idx]
            c, *_ = np.linalg.lstsq(Xs, y, rcond=None)
            out = np.zeros(int(np.prod(shape)))
            out[idx] = c
            cur = out.reshape(shape)
        if np.linalg.norm(X @ cur.ravel() - y) > feas:
            return None
        return cur
    f = linalg.svd(beta)
    r = int(np.sum(f.s > reg.DEFAULT_RANK_TOL * f.s[0]))
    cur = (f.U[:, :r] * f.s[:r]) @ f.V[:, :r].T
    for _ in range(max_gn):
        res = y - X @ cur.ravel()
        if np.linalg.norm(res) <= feas:
            return cur
        T = reg.matrix_tangent(*_factors(cur, r))
        if T.dim > X.shape[0]:
            return None
        B = T.basis()
        c, *_ = np.linalg.lstsq(X @ B, res, rcond=None)
        nxt = cur + (B @ c).reshape(shape)
        g = linalg.svd(nxt)
        cur = (g.U[:, :r] * g.s[:r]) @ g.V[:, :r].T
    return cur if np.linalg.norm(y - X @ cur.ravel()) <= feas else None


def _factors(M, r):
    f = linalg.svd(M)
    return f.U[:, :r], f.V[:, :r]


def solve_basis_pursuit(X, y, R: reg.Regularizer, opts: Optional[SolveOptions] = None, shape=None):
    """Minimise ``R(β)`` subject to ``X vec(β) = y``.

    Quadratic-penalty continuation ``ρ_k‖Xβ − y‖² + R(β)`` followed by a
    least-squares polish on the detected structure. A polished point is
    returned as ``converged`` once a least-squares dual vector certifies it.
    """
    opts = opts or SolveOptions()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = tuple(shape or R.shape or (X.shape[1],))
    feas = opts.feas_tol * max(1.0, float(np.linalg.norm(y)))
    ls, *_ = np.linalg.lstsq(X, y, rcond=None)
    if np.linalg.norm(X @ ls - y) > feas:
        return SolveResult(ls.reshape(shape), 0, float("nan"), float("inf"), "infeasible",
                           "y is not in the column space of X")
    L = QuadraticLoss(X, y, shape)
    stage_opts = replace(opts, max_iter=opts.bp_stage_iter, kkt_tol=opts.bp_stage_kkt)
    x = np.zeros(shape)
    total = 0
    candidates = []
    if not np.any(y):
        return SolveResult(x, 0, 0.0, 0.0, "converged")
    for k in range(opts.bp_stages):
        rho = opts.bp_rho0 * opts.bp_factor**k
        res = solve_regularized(L, R.scaled(1.0 / rho), stage_opts, x0=x)
        x = res.beta
        total += res.iterations
        cand = _polish(X, y, R, x, shape, feas)
        if cand is None:
            continue
        F = _detect_tangent(R, cand)
        lhs, inj = _interior_lhs(X, F)
        val = float(reg.value(R, cand))
        candidates.append((val, cand, lhs))
        if inj and lhs < 1.0 - 1e-9:
            return SolveResult(cand, total, val, 0.0, "converged",
                               f"certified at stage {k} (dual lhs {lhs:.3e})", {"stage": k, "dual_lhs": lhs})
    proj = x + np.linalg.lstsq(X, y - X @ x.ravel(), rcond=None)[0].reshape(shape)
    candidates.append((float(reg.value(R, proj)), proj, np.inf))
    val, best, lhs = min(candidates, key=lambda c: c[0])
    kkt = max(0.0, lhs - 1.0) if np.isfinite(lhs) else float("inf")
    return SolveResult(best, total, val, kkt, "uncertified",
                       "no certified polish; best feasible candidate returned", {"dual_lhs": lhs})
