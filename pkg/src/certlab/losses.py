"""Losses (quadratic, GLM), Bregman divergences and GLM constants."""
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from . import regularizers as reg

FAMILIES = ("squared", "logistic", "poisson")
CLAMP = 500.0


class SaturationWarning(RuntimeWarning):
    """Linear predictors were clamped to ±500 before exponentiation."""


class Loss:
    """Common interface; ``beta`` may be a vector or a matrix (row-major vec)."""

    shape: tuple
    quadratic = False

    def value(self, beta):
        raise NotImplementedError

    def gradient(self, beta):
        raise NotImplementedError

    def bregman(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return float(self.value(a) - self.value(b) - np.sum(self.gradient(b) * (a - b)))


@dataclass
class QuadraticLoss(Loss):
    """``L(β) = ‖X vec(β) − y‖²`` with ``H = XᵀX`` and ``z = 2Xᵀy``."""

    X: np.ndarray
    y: np.ndarray
    shape: Optional[tuple] = None
    quadratic = True

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.y)):
            raise ValueError("X and y must be finite")
        if self.shape is None:
            self.shape = (self.X.shape[1],)
        self.shape = tuple(self.shape)
        if int(np.prod(self.shape)) != self.X.shape[1]:
            raise ValueError("shape does not match the number of columns of X")

    def forward(self, beta):
        return self.X @ np.asarray(beta, dtype=float).reshape(-1)

    def adjoint(self, r):
        return (self.X.T @ r).reshape(self.shape)

    def value(self, beta):
        r = self.forward(beta) - self.y
        return float(r @ r)

    def gradient(self, beta):
        return 2.0 * self.adjoint(self.forward(beta) - self.y)

    def H_apply(self, v):
        return self.adjoint(self.forward(v))

    def H_matrix(self):
        return self.X.T @ self.X

    @property
    def z(self):
        return 2.0 * self.adjoint(self.y)

    def bregman(self, a, b):
        d = self.forward(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        return float(d @ d)

    def curvature_weights(self, beta):
        return np.full(self.X.shape[0], 2.0)

    def scaled(self, c):
        return QuadraticLoss(c * self.X, c * self.y, self.shape)


@dataclass
class GLMLoss(Loss):
    """``L(β) = Σ ℓ_i(⟨x_i, β⟩)``.

    logistic: ``ℓ(t) = ln(1 + e^{−t})`` with labels absorbed into the rows
    (pass ±1 labels as ``y`` and they are multiplied in);
    poisson: ``ℓ(t) = e^t − y t``; squared: ``ℓ(t) = (t − y)²``.
    """

    X: np.ndarray
    family: str
    y: Optional[np.ndarray] = None
    shape: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown GLM family {self.family!r}")
        X = np.asarray(self.X, dtype=float)
        if not np.all(np.isfinite(X)):
            raise ValueError("rows must be finite")
        y = None if self.y is None else np.asarray(self.y, dtype=float)
        if self.family == "logistic" and y is not None:
            if not np.all(np.isin(y, (-1.0, 1.0))):
                raise ValueError("logistic labels must be ±1")
            X = X * y[:, None]
            y = None
        if self.family == "poisson":
            if y is None or np.any(y < 0):
                raise ValueError("poisson responses must be nonnegative")
        if self.family == "squared" and y is None:
            y = np.zeros(X.shape[0])
        self.X, self.y = X, y
        if self.shape is None:
            self.shape = (X.shape[1],)
        self.shape = tuple(self.shape)

    @property
    def quadratic(self):
        return self.family == "squared"

    def linear(self, beta):
        t = self.X @ np.asarray(beta, dtype=float).reshape(-1)
        if self.family != "squared" and np.any(np.abs(t) > CLAMP):
            warnings.warn("linear predictor clamped at ±500", SaturationWarning, stacklevel=3)
            t = np.clip(t, -CLAMP, CLAMP)
        return t

    def ell(self, t):
        if self.family == "logistic":
            return np.logaddexp(0.0, -t)
        if self.family == "poisson":
            return np.exp(t) - self.y * t
        return (t - self.y) ** 2

    def ell1(self, t):
        if self.family == "logistic":
            return -expit(-t)
        if self.family == "poisson":
            return np.exp(t) - self.y
        return 2.0 * (t - self.y)

    def ell2(self, t):
        if self.family == "logistic":
            return expit(t) * expit(-t)
        if self.family == "poisson":
            return np.exp(t)
        return np.full_like(t, 2.0)

    def value(self, beta):
        return float(np.sum(self.ell(self.linear(beta))))

    def gradient(self, beta):
        return (self.X.T @ self.ell1(self.linear(beta))).reshape(self.shape)

    def curvature_weights(self, beta):
        return self.ell2(self.linear(beta))

    def hessian(self, beta):
        w = self.curvature_weights(beta)
        return (self.X * w[:, None]).T @ self.X


@dataclass
class ShiftedLoss(Loss):
    """``γ·L(β) − ⟨c, β − anchor⟩ + ½·ridge·‖β − anchor‖²``.

    Used for the shifted loss of generalized certificates, where
    ``c = γ∇L(β̄) − ∇L(β*)``.
    """

    base: Loss
    gamma: float = 1.0
    c: Optional[np.ndarray] = None
    anchor: Optional[np.ndarray] = None
    ridge: float = 0.0

    def __post_init__(self):
        self.shape = self.base.shape
        if self.c is None:
            self.c = np.zeros(self.shape)
        if self.anchor is None:
            self.anchor = np.zeros(self.shape)
        self.quadratic = bool(getattr(self.base, "quadratic", False))

    def value(self, beta):
        beta = np.asarray(beta, dtype=float)
        d = beta - self.anchor
        return float(self.gamma * self.base.value(beta) - np.sum(self.c * d)
                     + 0.5 * self.ridge * np.sum(d * d))

    def gradient(self, beta):
        beta = np.asarray(beta, dtype=float)
        return self.gamma * self.base.gradient(beta) - self.c + self.ridge * (beta - self.anchor)

    def bregman(self, a, b):
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return float(self.gamma * self.base.bregman(a, b) + 0.5 * self.ridge * np.sum(d * d))


def shifted_loss(L: Loss, anchor, beta_star, gamma=1.0, ridge=0.0):
    """Shifted loss ``L̄_*`` whose gradient at the anchor equals ``∇L(β*)``."""
    anchor = np.asarray(anchor, dtype=float)
    c = gamma * L.gradient(anchor) - L.gradient(beta_star)
    return ShiftedLoss(L, gamma, c, anchor, ridge)


# --------------------------------------------------------------------------

def loss_value(L: Loss, beta):
    return L.value(beta)


def gradient(L: Loss, beta):
    return L.gradient(beta)


def curvature_weights(L: Loss, beta):
    return L.curvature_weights(beta)


@dataclass
class BregmanTriple:
    d: float
    d_sym: float


def bregman(L: Loss, a, b):
    """``D_L(a, b)`` and the symmetrised ``D_L(a, b) + D_L(b, a)``."""
    dab = L.bregman(a, b)
    dba = L.bregman(b, a)
    return BregmanTriple(dab, dab + dba)


def symmetric_bregman(L: Loss, a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if isinstance(L, QuadraticLoss):
        return 2.0 * L.bregman(a, b)
    return float(np.sum((L.gradient(a) - L.gradient(b)) * d))


def _family(L):
    if isinstance(L, QuadraticLoss):
        return "squared"
    if isinstance(L, GLMLoss):
        return L.family
    if isinstance(L, ShiftedLoss):
        return _family(L.base)
    raise TypeError(f"unsupported loss {type(L).__name__}")


def kappa(L: Loss):
    """Lipschitz constant of ``log ℓ″``: 0 for squared, 1 for logistic and poisson."""
    return 0.0 if _family(L) == "squared" else 1.0


def convexity_ratio_gamma(L: Loss, A):
    """Lower bound on ``ℓ″(s)/ℓ″(t)`` for ``|s|, |t| ≤ A``."""
    if A < 0:
        raise ValueError("amplitude bound must be nonnegative")
    fam = _family(L)
    if fam == "logistic":
        return 4.0 / (2.0 + np.exp(-A) + np.exp(A))
    if fam == "poisson":
        return float(np.exp(-2.0 * A))
    return 1.0


def noise_level_eta(L: Loss, beta_star, R: reg.Regularizer):
    return float(reg.dual_norm(R, L.gradient(beta_star)))


NORMS = ("l2", "linf", "group_linf")


def penalty_level_lambda(L: Loss, anchor, beta_star, R: reg.Regularizer, norm="l2",
                         groups: Optional[reg.GroupStructure] = None, rank_tol=reg.DEFAULT_RANK_TOL):
    """``inf_{ū ∈ ∂R(anchor)} ‖∇L(β*) + ū‖_D``.

    Exact for lasso and group (all three norms) and for nuclear with the
    Frobenius norm. For the mixed regularizer the infimum is taken over the
    interior certificate set at η = 1 and is an upper bound.
    """
    if norm not in NORMS:
        raise ValueError(f"unsupported norm descriptor {norm!r}")
    g = np.asarray(L.gradient(beta_star), dtype=float)
    F = reg.certificate_frame(R, anchor, 1.0, rank_tol)
    on = F.tangent.project(g) + F.sign
    if norm == "group_linf" and groups is None:
        groups = R.groups
        if groups is None:
            raise ValueError("group_linf norm needs a group structure")
    v = R.variant
    if v == "nuclear":
        if norm != "l2":
            raise ValueError("nuclear penalty level supports the l2 (Frobenius) norm only")
        s = np.linalg.svd(F.tangent.complement(g), compute_uv=False)
        return float(np.sqrt(np.sum(on**2) + np.sum(np.maximum(s - R.lam, 0.0) ** 2)))
    if v == "lasso":
        off = F.tangent.complement(g)
        res = on + np.sign(off) * np.maximum(np.abs(off) - R.lam, 0.0)
        return _norm(res, norm, groups)
    if v == "group":
        G = R.groups
        offg = G.split(F.tangent.complement(g))
        if norm == "linf":
            onpart = np.max(np.abs(on), initial=0.0)
            per = _group_linf_dist(offg, R.lam)
            return float(max(onpart, np.max(per, initial=0.0)))
        n = np.linalg.norm(offg, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(n > R.lam, 1.0 - R.lam / n, 0.0)
        res = on + G.merge(offg * f)
        return _norm(res, norm, groups)
    # mixed: off-tangent part minimised over the box ∩ half-ball per group
    if norm != "l2" and norm != "group_linf":
        raise ValueError("mixed penalty level supports l2 and group_linf norms only")
    off = F.tangent.complement(g)
    w = F.project_b_dual(-off, 1.0)
    res = on + off + w
    return _norm(res, norm, groups)


def _norm(v, norm, groups):
    if norm == "l2":
        return float(np.linalg.norm(v))
    if norm == "linf":
        return float(np.max(np.abs(v), initial=0.0))
    return float(np.max(groups.norms(v), initial=0.0))


def _group_linf_dist(W, lam):
    """Per group: ``min ‖w + u‖∞`` over ``‖u‖₂ ≤ λ`` (smallest t with ‖(|w|−t)₊‖₂ ≤ λ)."""
    A = np.abs(W)
    out = np.zeros(A.shape[0])
    for j, a in enumerate(A):
        if np.linalg.norm(a) <= lam:
            continue
        lo, hi = 0.0, float(np.max(a))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(np.maximum(a - mid, 0.0)) > lam:
                lo = mid
            else:
                hi = mid
        out[j] = hi
    return out
