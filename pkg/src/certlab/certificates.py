"""Certificate construction and evaluation of the recovery / oracle inequalities."""
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from . import regularizers as reg
from .losses import Loss, QuadraticLoss
from .solvers import tangent_solve


class NotInjectiveError(ValueError):
    """The design restricted to the tangent space is not injective."""


@dataclass
class CertificateReport:
    kind: str
    certificate: np.ndarray
    delta: float
    b_dual_off: float
    eta: float
    passed: bool
    margin: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed and self.margin < 0:
            raise ValueError("a passing report must have a nonnegative margin")

    def to_dict(self):
        return {"kind": self.kind, "certificate": np.asarray(self.certificate).tolist(),
                "delta": self.delta, "b_dual_off": self.b_dual_off, "eta": self.eta,
                "passed": self.passed, "margin": self.margin, "extra": _plain(self.extra)}

    def to_json(self):
        return json.dumps(self.to_dict())


def _plain(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, (np.floating, np.integer, np.bool_)):
            out[k] = v.item()
        else:
            out[k] = v
    return out


@dataclass
class TargetSplit:
    """``∇L(β*) = ã + b̃`` with ``ã ∈ T``, ``b̃ ⊥ T`` and ``η̃ = b_dual_norm(b̃)``."""

    beta_star: np.ndarray
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    eta_tilde: float

    @property
    def gradient(self):
        return self.a_tilde + self.b_tilde


def split_gradient(L: Loss, beta_star, F: reg.CertificateFrame, T: Optional[reg.TangentSpace] = None):
    T = T or F.tangent
    g = np.asarray(L.gradient(beta_star), dtype=float)
    a = T.project(g)
    b = g - a
    return TargetSplit(np.asarray(beta_star, dtype=float), a, b, float(F.b_dual_norm(b)))


def zero_split(F: reg.CertificateFrame, beta_star=None):
    z = np.zeros(F.shape)
    bs = F.anchor if beta_star is None else np.asarray(beta_star, dtype=float)
    return TargetSplit(bs, z, z.copy(), 0.0)


def target_projection(L: Loss, beta_bar_star, T: reg.TangentSpace, F: Optional[reg.CertificateFrame] = None,
                      tol=1e-12, max_newton=50):
    """``β* = β̄* + argmin_{Δ ∈ T} L(β̄* + Δ)``, so that ``ã = 0``."""
    b0 = np.asarray(beta_bar_star, dtype=float)
    if T.dim == 0:
        beta = b0.copy()
    elif isinstance(L, QuadraticLoss):
        beta = b0 + tangent_solve(L, T, -0.5 * L.gradient(b0))
    else:
        B = T.basis()
        beta = b0.copy()
        for _ in range(max_newton):
            g = B.T @ np.asarray(L.gradient(beta)).ravel()
            if np.linalg.norm(g) <= tol * max(1.0, np.linalg.norm(B.T @ np.asarray(L.gradient(b0)).ravel())):
                break
            XB = L.X @ B
            Hm = (XB * L.curvature_weights(beta)[:, None]).T @ XB
            step = -linalg.solve_spd(Hm, g)
            f0 = L.value(beta)
            s = 1.0
            while s > 1e-10:
                cand = beta + s * (B @ step).reshape(L.shape)
                if L.value(cand) <= f0 + 1e-4 * s * float(g @ step):
                    break
                s *= 0.5
            beta = cand
    g = np.asarray(L.gradient(beta), dtype=float)
    a = T.project(g)
    b = g - a
    eta_t = float(F.b_dual_norm(b)) if F is not None else float("nan")
    return TargetSplit(beta, a, b, eta_t)


def _tangent_design(X, T):
    B = T.basis()
    XB = X @ B
    if T.dim == 0:
        return B, XB, np.inf
    s = np.linalg.svd(XB, compute_uv=False)
    smin = s[-1] if T.dim <= X.shape[0] else 0.0
    return B, XB, float(smin)


def build_interior_noisefree(X, F: reg.CertificateFrame, T: Optional[reg.TangentSpace] = None, inj_tol=1e-10):
    """Least-squares interior certificate ``v₀ = XᵀX·H_T⁻¹ e``.

    Passes iff ``b_dual_norm(v₀ − e) ≤ η`` and ``< 1``; margin is
    ``min(η, 1) − b_dual_norm(v₀ − e)``.
    """
    T = T or F.tangent
    X = np.asarray(X, dtype=float)
    if T.dim == 0:
        z = np.zeros(F.shape)
        m = min(F.eta, 1.0)
        return CertificateReport("interior", z, 0.0, 0.0, F.eta, True, m, {"min_singular": float("inf")})
    B, XB, smin = _tangent_design(X, T)
    if smin <= inj_tol:
        raise NotInjectiveError(f"X restricted to the tangent space is not injective (min singular value {smin:.3e})")
    L = QuadraticLoss(X, np.zeros(X.shape[0]), F.shape)
    if T.kind == "matrix":
        x = tangent_solve(L, T, F.sign)
    else:
        x = (B @ linalg.solve_spd(XB.T @ XB, B.T @ F.sign.ravel())).reshape(F.shape)
    v0 = L.H_apply(x)
    lhs = float(F.b_dual_norm(v0 - F.sign))
    tang_err = float(np.linalg.norm(T.project(v0) - F.sign))
    margin = min(F.eta, 1.0) - lhs
    passed = lhs <= F.eta and lhs < 1.0
    return CertificateReport("interior", v0, tang_err, lhs, F.eta, bool(passed), float(margin),
                             {"min_singular": smin, "tangent_dim": T.dim})


def check_irrepresentable(L: QuadraticLoss, F: reg.CertificateFrame, T: Optional[reg.TangentSpace] = None,
                          split: Optional[TargetSplit] = None):
    """``b_dual_norm(P_T⊥ H H_T⁻¹ (e + ã) − b̃) ≤ η`` with ``H = XᵀX``."""
    T = T or F.tangent
    split = split or zero_split(F)
    u = F.sign + split.a_tilde
    x = tangent_solve(L, T, u)
    w = L.H_apply(x)
    off = T.complement(w) - split.b_tilde
    lhs = float(F.b_dual_norm(off))
    margin = F.eta - lhs
    Q = F.anchor - 0.5 * x
    return CertificateReport("tangent", Q, 0.0, lhs, F.eta, bool(lhs <= F.eta), float(margin),
                             {"eta_tilde": split.eta_tilde, "cert_term": 0.25 * float(np.sum(u * x))})


# --------------------------------------------------------------------------
# inequality slacks

def r_gap(R: reg.Regularizer, F: reg.CertificateFrame, beta):
    """``R(β) − R_G(β)`` (nonnegative for any G inside the subdifferential)."""
    return float(reg.value(R, beta)) - F.r_g(beta)


def recovery_bound_thm1(L: Loss, R: reg.Regularizer, F: reg.CertificateFrame, beta_hat, Q, delta):
    """Slack ``rhs − lhs`` of
    ``D(β̄,β̂) + D(β̂,Q) + [R − R_G](β̂) ≤ D(β̄,Q) − ⟨δ, β̂ − β̄⟩``."""
    bb = F.anchor
    lhs = L.bregman(bb, beta_hat) + L.bregman(beta_hat, Q) + r_gap(R, F, beta_hat)
    rhs = L.bregman(bb, Q) - float(np.sum(np.asarray(delta) * (beta_hat - bb)))
    return rhs - lhs


@dataclass
class OracleSlack:
    slack: float
    slack_theorem: float
    condition_ok: bool
    condition_gap: float


def oracle_bound_thm2(L: Loss, gamma, R: reg.Regularizer, F: reg.CertificateFrame, beta_star, beta_hat, Q, delta):
    """Oracle inequality with ``L̄ = γL``.

    ``slack`` is that of
    ``D(β̂,β*) + [R − R_G](β̂) ≤ D(β̄,β*) + D_{L̄}(β̄,Q) − ⟨δ, β̂ − β̄⟩``,
    valid when ``D_L(β̄,β̂) ≥ D_{L̄}(β̂,β̄)`` (reported as ``condition_ok``).
    ``slack_theorem`` is the unconditional segment-endpoint form.
    """
    bb = F.anchor
    dcorr = float(np.sum(np.asarray(delta) * (beta_hat - bb)))
    d_star = L.bregman(bb, beta_star)
    d_hat_star = L.bregman(beta_hat, beta_star)
    dbar_q = gamma * L.bregman(bb, Q)
    gap = r_gap(R, F, beta_hat)
    slack = d_star + dbar_q - dcorr - d_hat_star - gap
    lhs_t = L.bregman(bb, beta_hat) + d_hat_star + gamma * L.bregman(beta_hat, Q) + gap
    rhs_t = gamma * L.bregman(beta_hat, bb) + d_star + dbar_q - dcorr
    cond = L.bregman(bb, beta_hat) - gamma * L.bregman(beta_hat, bb)
    return OracleSlack(float(slack), float(rhs_t - lhs_t), bool(cond >= -1e-12 * max(1.0, abs(cond))), float(cond))


def oracle_bound_tangent_quadratic(L: QuadraticLoss, F: reg.CertificateFrame, T: Optional[reg.TangentSpace] = None,
                                   split: Optional[TargetSplit] = None):
    """``(bound, certificate term)`` with bound
    ``D_L(β̄, β*) + ¼⟨e + ã, H_T⁻¹(e + ã)⟩``; the bound controls
    ``D_L(β̂, β*) + (1 − η)·b_norm(β̂)``."""
    T = T or F.tangent
    split = split or zero_split(F)
    u = F.sign + split.a_tilde
    x = tangent_solve(L, T, u)
    term = 0.25 * float(np.sum(u * x))
    return L.bregman(F.anchor, split.beta_star) + term, term


def global_certificate_term(F: reg.CertificateFrame, split: TargetSplit, norm="l2"):
    """``inf_{u ∈ G} ‖u + ∇L(β*)‖_D``."""
    a = F.sign + split.a_tilde
    w = F.project_b_dual(-split.b_tilde, F.eta) + split.b_tilde
    v = a + w
    if norm == "l2":
        return float(np.linalg.norm(v))
    variant = F.reg.variant
    if norm == "linf" and variant == "lasso":
        return float(np.max(np.abs(v)))
    if norm == "group_linf" and variant in ("group", "lasso") and F.reg.groups is not None:
        return float(np.max(F.reg.groups.norms(v)))
    raise ValueError(f"norm {norm!r} not supported for the {variant} certificate term")


def recovery_bound_global(F: reg.CertificateFrame, split: TargetSplit, gamma, norm="l2", d_term=0.0):
    """``D_L(β̄, β*) + (2γ)⁻¹ inf_{u ∈ G}‖u + ∇L(β*)‖_D²`` (quadratic loss)."""
    if not gamma > 0:
        raise ValueError("curvature estimate must be positive")
    t = global_certificate_term(F, split, norm)
    if np.isinf(gamma):
        return float(d_term)
    return float(d_term) + t * t / (2.0 * gamma)
