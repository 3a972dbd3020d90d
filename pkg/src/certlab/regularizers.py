"""Structured-l1 regularizers: lasso, group lasso, nuclear norm and the
lasso/group-lasso infimal convolution ("mixed").

Every regularizer here is the support function of a convex dual ball, so
proximal maps are computed with the Moreau identity
``prox_{tR}(v) = v - Proj_{tC}(v)``.
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .linalg import svd as _svd

VARIANTS = ("lasso", "group", "nuclear", "mixed")
DEFAULT_RANK_TOL = 1e-10


class ShapeError(ValueError):
    pass


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class GroupStructure:
    """Partition of ``range(p)`` into ``q`` disjoint groups of equal size ``m``."""

    index: np.ndarray = field(repr=False)

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=int)
        if idx.ndim != 2 or idx.size == 0:
            raise ValueError("group index must be a non-empty (q, m) array")
        flat = np.sort(idx.ravel())
        if not np.array_equal(flat, np.arange(idx.size)):
            raise ValueError("groups must partition {0..p-1}")
        object.__setattr__(self, "index", idx)

    @classmethod
    def contiguous(cls, q, m):
        return cls(np.arange(q * m).reshape(q, m))

    @classmethod
    def from_groups(cls, groups):
        sizes = {len(g) for g in groups}
        if len(sizes) != 1:
            raise ValueError("groups must share a common size m")
        return cls(np.array([list(g) for g in groups], dtype=int))

    @property
    def q(self):
        return self.index.shape[0]

    @property
    def m(self):
        return self.index.shape[1]

    @property
    def p(self):
        return self.index.size

    def split(self, v):
        """View ``(..., p)`` as ``(..., q, m)``."""
        return np.asarray(v)[..., self.index]

    def merge(self, w):
        w = np.asarray(w)
        out = np.empty(w.shape[:-2] + (self.p,), dtype=w.dtype)
        out[..., self.index] = w
        return out

    def norms(self, v):
        return np.linalg.norm(self.split(v), axis=-1)

    def expand(self, per_group):
        """Broadcast a per-group array ``(..., q)`` to coordinates ``(..., p)``."""
        per_group = np.asarray(per_group)
        rep = np.repeat(per_group[..., :, None], self.m, axis=-1)
        return self.merge(rep)

    def to_dict(self):
        return {"groups": self.index.tolist()}


@dataclass(frozen=True)
class Regularizer:
    """One of lasso(λ), group(λ, Γ), nuclear(λ, p×q) or mixed(λ₁, λ_Γ, Γ).

    For ``mixed`` ``lam`` is λ₁ and ``lam_g`` is λ_Γ.
    """

    variant: str
    lam: float
    lam_g: Optional[float] = None
    groups: Optional[GroupStructure] = None
    shape: Optional[tuple] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown regularizer variant {self.variant!r}")
        if not self.lam > 0:
            raise ValueError("regularization weight must be positive")
        if self.variant == "mixed" and not (self.lam_g is not None and self.lam_g > 0):
            raise ValueError("mixed regularizer needs lam_g > 0")
        if self.variant in ("group", "mixed") and self.groups is None:
            raise ValueError(f"{self.variant} regularizer needs a group structure")
        if self.variant == "nuclear" and (self.shape is None or len(self.shape) != 2):
            raise ValueError("nuclear regularizer needs a (p, q) shape")
        if self.shape is None and self.groups is not None:
            object.__setattr__(self, "shape", (self.groups.p,))
        if self.shape is not None:
            object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    def check(self, x, name="beta"):
        x = np.asarray(x, dtype=float)
        if self.shape is not None and x.shape[-len(self.shape):] != self.shape:
            raise ShapeError(f"{name} has shape {x.shape}, expected {self.shape}")
        if self.shape is None and x.ndim < 1:
            raise ShapeError(f"{name} must be a vector")
        return x

    def scaled(self, c):
        return Regularizer(self.variant, self.lam * c,
                           None if self.lam_g is None else self.lam_g * c,
                           self.groups, self.shape)

    def to_dict(self):
        d = {"variant": self.variant, "lam": self.lam}
        if self.lam_g is not None:
            d["lam_g"] = self.lam_g
        if self.groups is not None:
            d["m"] = self.groups.m
        if self.shape is not None:
            d["shape"] = list(self.shape)
        return d


def lasso(lam, p=None):
    return Regularizer("lasso", float(lam), shape=None if p is None else (p,))


def group(lam, groups):
    return Regularizer("group", float(lam), groups=groups)


def nuclear(lam, shape):
    return Regularizer("nuclear", float(lam), shape=tuple(shape))


def mixed(lam1, lam_g, groups):
    return Regularizer("mixed", float(lam1), float(lam_g), groups=groups)


# --------------------------------------------------------------------------
# box ∩ ball helpers (per group, batched over leading axes)

def box_ball_scale(W, a, b):
    """Scale ``t`` with ``‖clip(t·w, a)‖ = b`` for each row ``w`` of ``W``.

    ``W`` has shape ``(..., m)``; ``a`` and ``b`` broadcast against
    ``W[..., 0]``. Returns ``inf`` where the box corner ``a·sgn(w)`` already
    lies inside the ball (no finite scale is needed) and 0 for ``b = 0``.
    """
    W = np.abs(np.asarray(W, dtype=float))
    a = np.broadcast_to(np.asarray(a, dtype=float), W.shape[:-1])
    b = np.broadcast_to(np.asarray(b, dtype=float), W.shape[:-1])
    m = W.shape[-1]
    nnz = np.count_nonzero(W, axis=-1)
    corner = a * np.sqrt(nnz)
    t = np.full(W.shape[:-1], np.inf)
    need = corner > b
    if not np.any(need):
        return t
    Ws = -np.sort(-W, axis=-1)  # descending
    sq = Ws**2
    # rest[k] = sum of squares of entries after the k largest
    rest = np.cumsum(sq[..., ::-1], axis=-1)[..., ::-1]
    k = np.arange(m)
    a_ = a[..., None]
    b_ = b[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        num = b_**2 - k * a_**2
        tk = np.sqrt(num / rest)
        upper_ok = tk * Ws <= a_ * (1 + 1e-12)  # entry k (0-based) not clipped
        prev = np.concatenate([np.full(W.shape[:-1] + (1,), np.inf), Ws[..., :-1]], axis=-1)
        lower_ok = tk * prev >= a_ * (1 - 1e-12)  # the k largest are clipped
        valid = (num > 0) & (rest > 0) & upper_ok & lower_ok & np.isfinite(tk)
    first = np.argmax(valid, axis=-1)
    found = np.take_along_axis(valid, first[..., None], -1)[..., 0]
    tv = np.take_along_axis(tk, first[..., None], -1)[..., 0]
    t = np.where(need & found, tv, t)
    bad = need & ~found
    if np.any(bad):
        t[bad] = _box_ball_scale_bisect(W[bad], a[bad], b[bad])
    t = np.where(need & (b <= 0), 0.0, t)
    return t


def _box_ball_scale_bisect(W, a, b, iters=200):
    lo = np.zeros(W.shape[0])
    hi = np.ones(W.shape[0])
    a_ = a[:, None]

    def nrm(s):
        return np.linalg.norm(np.minimum(s[:, None] * W, a_), axis=-1)

    while np.any(nrm(hi) < b):
        hi = np.where(nrm(hi) < b, hi * 2, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        go = nrm(mid) < b
        lo = np.where(go, mid, lo)
        hi = np.where(go, hi, mid)
    return 0.5 * (lo + hi)


def project_box_ball(W, a, b):
    """Euclidean projection of each row of ``W`` onto ``{|u_i| ≤ a, ‖u‖ ≤ b}``."""
    W = np.asarray(W, dtype=float)
    a_ = np.asarray(a, dtype=float)[..., None] if np.ndim(a) else float(a)
    C = np.clip(W, -a_, a_)
    over = np.linalg.norm(C, axis=-1) > np.asarray(b)
    if not np.any(over):
        return C
    t = box_ball_scale(W, a, b)
    t = np.where(over, np.minimum(t, 1.0), 1.0)
    t = np.where(np.isfinite(t), t, 1.0)
    return np.clip(t[..., None] * W, -a_, a_)


def support_box_ball(W, a, b):
    """Support function of ``box(a) ∩ ball(b)`` at each row of ``W`` and its maximiser."""
    W = np.asarray(W, dtype=float)
    t = box_ball_scale(W, a, b)
    a_ = np.asarray(a, dtype=float)[..., None] if np.ndim(a) else float(a)
    corner = a_ * np.sign(W)
    with np.errstate(invalid="ignore"):
        U = np.where(np.isfinite(t)[..., None], np.clip(t[..., None] * W, -a_, a_), corner)
    return np.sum(U * W, axis=-1), U, t


# --------------------------------------------------------------------------
# value, dual norm, projection, prox

def value(R: Regularizer, beta):
    beta = R.check(beta)
    v = R.variant
    if v == "lasso":
        return R.lam * np.sum(np.abs(beta), axis=-1)
    if v == "group":
        return R.lam * np.sum(R.groups.norms(beta), axis=-1)
    if v == "nuclear":
        return R.lam * np.sum(np.linalg.svd(beta, compute_uv=False), axis=-1)
    val, _, _ = support_box_ball(R.groups.split(beta), R.lam, R.lam_g)
    return np.sum(val, axis=-1)


def dual_norm(R: Regularizer, u):
    u = R.check(u, "u")
    v = R.variant
    if v == "lasso":
        return np.max(np.abs(u), axis=-1) / R.lam
    if v == "group":
        return np.max(R.groups.norms(u), axis=-1) / R.lam
    if v == "nuclear":
        return np.max(np.linalg.svd(u, compute_uv=False), axis=-1) / R.lam
    return np.maximum(np.max(np.abs(u), axis=-1) / R.lam,
                      np.max(R.groups.norms(u), axis=-1) / R.lam_g)


def project_dual_ball(R: Regularizer, u, radius=1.0):
    """Projection onto ``{w : dual_norm(R, w) ≤ radius}``."""
    u = R.check(u, "u")
    v = R.variant
    if v == "lasso":
        r = radius * R.lam
        return np.clip(u, -r, r)
    if v == "group":
        return _group_radial_clip(u, R.groups, radius * R.lam)
    if v == "nuclear":
        U, s, Vt = np.linalg.svd(u, full_matrices=False)
        s = np.minimum(s, radius * R.lam)
        return (U * s[..., None, :]) @ Vt
    W = project_box_ball(R.groups.split(u), radius * R.lam, radius * R.lam_g)
    return R.groups.merge(W)


def _group_radial_clip(u, groups, r):
    W = groups.split(u)
    n = np.linalg.norm(W, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(n > r, r / n, 1.0)
    return groups.merge(W * f)


def prox(R: Regularizer, v, t, method="moreau", tol=1e-12, max_iter=100000):
    """Proximal map ``argmin_b ½‖b − v‖² + t·R(b)``.

    ``method="alternating"`` (mixed only) runs exact block minimisation over
    the two parts of the split instead of the projection formula.
    """
    if not t > 0:
        raise ValueError("prox step must be positive")
    v = R.check(v, "v")
    if R.variant == "lasso":
        return np.sign(v) * np.maximum(np.abs(v) - t * R.lam, 0.0)
    if R.variant == "group":
        W = R.groups.split(v)
        n = np.linalg.norm(W, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(n > t * R.lam, 1.0 - t * R.lam / n, 0.0)
        return R.groups.merge(W * f)
    if R.variant == "nuclear":
        U, s, Vt = np.linalg.svd(v, full_matrices=False)
        s = np.maximum(s - t * R.lam, 0.0)
        return (U * s[..., None, :]) @ Vt
    if method == "alternating":
        return _mixed_prox_alternating(R, v, t, tol, max_iter)[0]
    return v - project_dual_ball(R, v, t)


def _mixed_prox_alternating(R, v, t, tol, max_iter):
    l1 = lasso(R.lam)
    lg = group(R.lam_g, R.groups)
    b1 = np.zeros_like(v)
    b2 = np.zeros_like(v)
    prev = np.inf
    for _ in range(max_iter):
        b1 = prox(l1, v - b2, t)
        b2 = prox(lg, v - b1, t)
        obj = 0.5 * np.sum((b1 + b2 - v) ** 2) + t * (value(l1, b1) + value(lg, b2))
        if prev - obj < tol:
            break
        prev = obj
    return b1 + b2, b1, b2


def subgradient_residual(R: Regularizer, beta, u):
    """``max(0, dual_norm(u) − 1) + |⟨u, β⟩ − R(β)| / max(1, R(β))``."""
    r = float(value(R, beta))
    dn = float(dual_norm(R, u))
    gap = abs(float(np.sum(np.asarray(u) * np.asarray(beta))) - r)
    return max(0.0, dn - 1.0) + gap / max(1.0, r)


class SubgradientCheck(NamedTuple):
    ok: bool
    margin: float
    dual_norm: float
    alignment_gap: float


def is_subgradient(R: Regularizer, beta, u, tol=1e-8):
    beta = R.check(beta)
    u = R.check(u, "u")
    r = float(value(R, beta))
    dn = float(dual_norm(R, u))
    gap = abs(float(np.sum(u * beta)) - r)
    scale = max(1.0, r)
    ok = dn <= 1.0 + tol and gap <= tol * scale
    margin = min(1.0 + tol - dn, tol * scale - gap)
    return SubgradientCheck(bool(ok), float(margin), dn, gap)


def sign_generalized(beta, groups: Optional[GroupStructure] = None):
    """Blockwise unit normalisation on nonzero groups (componentwise sign if m = 1)."""
    beta = np.asarray(beta, dtype=float)
    if groups is None or groups.m == 1:
        return np.sign(beta)
    W = groups.split(beta)
    n = np.linalg.norm(W, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(n > 0, W / n, 0.0)
    return groups.merge(S)


# --------------------------------------------------------------------------
# mixed-norm decomposition

def mixed_group_rule(lam1, lam_g, groups: GroupStructure, beta):
    """Groups ``j`` with ``λ_Γ < 2·λ₁·‖sgn(β_Γj)‖₂`` (the S_Γ set)."""
    nnz = np.count_nonzero(groups.split(beta), axis=-1)
    return lam_g < 2.0 * lam1 * np.sqrt(nnz)


def mixed_decompose(lam1, lam_g, groups: GroupStructure, beta):
    """Optimal split ``β = β′ + β″`` for ``λ₁‖β′‖₁ + λ_Γ‖β″‖_{Γ,1}``.

    Closed form per group: with ``u`` the maximising dual vector in
    ``box(λ₁) ∩ ball(λ_Γ)`` written as ``clip(t·β, λ₁)``, ``β″ = u/t``.
    ``β″ = 0`` whenever ``λ₁‖sgn(β_Γ)‖₂ ≤ λ_Γ`` (ties resolved toward β″ = 0).
    """
    beta = np.asarray(beta, dtype=float)
    W = groups.split(beta)
    _, U, t = support_box_ball(W, lam1, lam_g)
    with np.errstate(divide="ignore", invalid="ignore"):
        B2 = np.where(np.isfinite(t)[..., None] & (t[..., None] > 0), U / t[..., None], 0.0)
    # snap: clipped coordinates give β' with the sign of β; rounding can flip tiny values
    B1 = W - B2
    B1 = np.where(np.sign(B1) * np.sign(W) < 0, 0.0, B1)
    B2 = W - B1
    return groups.merge(B1), groups.merge(B2)


# --------------------------------------------------------------------------
# tangent spaces and certificate frames

@dataclass
class TangentSpace:
    """Coordinate/group tangent (a mask) or matrix tangent (factors U, V)."""

    kind: str
    shape: tuple
    mask: Optional[np.ndarray] = None
    U: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    _basis: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dim(self):
        if self.kind == "matrix":
            r = self.U.shape[1]
            p, q = self.shape
            return r * (p + q - r)
        return int(np.count_nonzero(self.mask))

    def project(self, beta):
        beta = np.asarray(beta, dtype=float)
        if self.kind == "matrix":
            PU = self.U @ self.U.T
            PV = self.V @ self.V.T
            A = PU @ beta
            return A + beta @ PV - A @ PV
        return beta * self.mask

    def complement(self, beta):
        beta = np.asarray(beta, dtype=float)
        if self.kind == "matrix":
            PU = np.eye(self.shape[0]) - self.U @ self.U.T
            PV = np.eye(self.shape[1]) - self.V @ self.V.T
            return PU @ beta @ PV
        return beta * ~self.mask

    def basis(self):
        """Orthonormal basis of T as columns of a ``(size, dim)`` matrix acting on
        row-major ``vec(β)``."""
        if self._basis is not None:
            return self._basis
        size = int(np.prod(self.shape))
        if self.kind != "matrix":
            idx = np.flatnonzero(self.mask.ravel())
            B = np.zeros((size, idx.size))
            B[idx, np.arange(idx.size)] = 1.0
        else:
            p, q = self.shape
            r = self.U.shape[1]
            Uf = _complete(self.U, p)
            Vf = _complete(self.V, q)
            cols = []
            for a in range(p):
                for b in range(q):
                    if a < r or b < r:
                        cols.append(np.outer(Uf[:, a], Vf[:, b]).ravel())
            B = np.array(cols).T if cols else np.zeros((size, 0))
        self._basis = B
        return B

    def coords(self, beta):
        return self.basis().T @ np.asarray(beta, dtype=float).ravel()

    def embed(self, c):
        return (self.basis() @ c).reshape(self.shape)


def _complete(U, n):
    r = U.shape[1]
    if r == n:
        return U
    Q, _ = np.linalg.qr(np.hstack([U, np.eye(n)]))
    Q = Q[:, :n]
    Q[:, :r] = U
    return Q


def tangent_project(T: TangentSpace, beta):
    """Return ``(P_T β, β − P_T β)``."""
    bt = T.project(beta)
    return bt, np.asarray(beta, dtype=float) - bt


def coordinate_tangent(mask):
    mask = np.asarray(mask, dtype=bool)
    return TangentSpace("coordinate", mask.shape, mask=mask)


def matrix_tangent(U, V):
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    return TangentSpace("matrix", (U.shape[0], V.shape[0]), U=U, V=V)


@dataclass
class CertificateFrame:
    """Anchor, sign element ``e``, tangent space and interior parameter η.

    The certificate set is ``G = {e + w : w ⊥ T, b_dual_norm(w) ≤ η}`` and
    ``R_G(β) = ⟨e, β⟩ + η·b_norm(β)``.
    """

    reg: Regularizer
    anchor: np.ndarray
    eta: float
    tangent: TangentSpace
    sign: np.ndarray
    support: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL
    s_gamma: Optional[np.ndarray] = None
    beta1: Optional[np.ndarray] = None
    beta2: Optional[np.ndarray] = None
    trivial: bool = False

    @property
    def shape(self):
        return self.anchor.shape

    def with_eta(self, eta):
        _check_eta(eta)
        return CertificateFrame(self.reg, self.anchor, float(eta), self.tangent, self.sign,
                                self.support, self.rank_tol, self.s_gamma, self.beta1,
                                self.beta2, self.trivial)

    # off-tangent seminorm and its dual -------------------------------------------
    def b_norm(self, beta):
        beta = np.asarray(beta, dtype=float)
        R = self.reg
        if self.trivial:
            return np.zeros(beta.shape[:beta.ndim - len(self.shape)])
        off = self.tangent.complement(beta)
        if R.variant == "lasso":
            return R.lam * np.sum(np.abs(off), axis=-1)
        if R.variant == "group":
            return R.lam * np.sum(R.groups.norms(off), axis=-1)
        if R.variant == "nuclear":
            return R.lam * np.sum(np.linalg.svd(off, compute_uv=False), axis=-1)
        W = R.groups.split(off)
        val, _, _ = support_box_ball(W, R.lam, 0.5 * R.lam_g)
        return np.sum(np.where(self.s_gamma, 0.0, val), axis=-1)

    def b_dual_norm(self, u):
        u = np.asarray(u, dtype=float)
        R = self.reg
        if self.trivial:
            return np.zeros(u.shape[:u.ndim - len(self.shape)])
        off = self.tangent.complement(u)
        if R.variant == "lasso":
            return np.max(np.abs(off), axis=-1, initial=0.0) / R.lam
        if R.variant == "group":
            return np.max(R.groups.norms(off), axis=-1, initial=0.0) / R.lam
        if R.variant == "nuclear":
            return np.max(np.linalg.svd(off, compute_uv=False), axis=-1, initial=0.0) / R.lam
        gn = np.where(self.s_gamma, 0.0, R.groups.norms(off)) / (0.5 * R.lam_g)
        return np.maximum(np.max(np.abs(off), axis=-1, initial=0.0) / R.lam,
                          np.max(gn, axis=-1, initial=0.0))

    def project_b_dual(self, u, radius=1.0):
        """Projection onto ``{w ⊥ T : b_dual_norm(w) ≤ radius}`` (batched)."""
        u = np.asarray(u, dtype=float)
        R = self.reg
        if self.trivial:
            return np.zeros_like(u)
        off = self.tangent.complement(u)
        if R.variant == "lasso":
            r = radius * R.lam
            return np.clip(off, -r, r)
        if R.variant == "group":
            return _group_radial_clip(off, R.groups, radius * R.lam)
        if R.variant == "nuclear":
            U, s, Vt = np.linalg.svd(off, full_matrices=False)
            s = np.minimum(s, radius * R.lam)
            return self.tangent.complement((U * s[..., None, :]) @ Vt)
        W = project_box_ball(R.groups.split(off), radius * R.lam, 0.5 * radius * R.lam_g)
        W = np.where(self.s_gamma[:, None], 0.0, W)
        return R.groups.merge(W) * ~self.tangent.mask

    def b_prox(self, v, t):
        """Proximal map of ``t·b_norm``."""
        return np.asarray(v, dtype=float) - self.project_b_dual(v, t)

    def r_g(self, beta):
        return float(np.sum(self.sign * beta)) + self.eta * float(self.b_norm(beta))

    def to_dict(self):
        d = {"variant": self.reg.variant, "eta": self.eta, "tangent_dim": self.tangent.dim,
             "support": np.asarray(self.support).tolist()}
        if self.s_gamma is not None:
            d["s_gamma"] = np.flatnonzero(self.s_gamma).tolist()
        return d


def _check_eta(eta):
    if not (0 < eta <= 1):
        raise FrameError(f"eta must lie in (0, 1], got {eta}")


def certificate_frame(R: Regularizer, anchor, eta=1.0, rank_tol=DEFAULT_RANK_TOL):
    """Build the certificate frame of ``R`` at ``anchor``.

    Entries (or singular values) below ``rank_tol·max`` are treated as zero.
    An all-zero anchor yields the empty-support frame.
    """
    _check_eta(eta)
    beta = R.check(anchor, "anchor").copy()
    if not np.all(np.isfinite(beta)):
        raise FrameError("anchor has non-finite entries")
    scale = np.max(np.abs(beta)) if beta.size else 0.0
    v = R.variant
    if v == "nuclear":
        if beta.ndim != 2:
            raise FrameError("nuclear anchor must be a matrix")
        f = _svd(beta) if scale > 0 else None
        if f is None:
            r = 0
            U = np.zeros((beta.shape[0], 0))
            V = np.zeros((beta.shape[1], 0))
        else:
            r = int(np.sum(f.s > rank_tol * f.s[0]))
            U, V = f.U[:, :r], f.V[:, :r]
        T = matrix_tangent(U, V)
        sign = R.lam * U @ V.T
        return CertificateFrame(R, beta, float(eta), T, sign, np.arange(r), rank_tol)
    beta = np.where(np.abs(beta) > rank_tol * scale, beta, 0.0)
    if v == "lasso":
        mask = beta != 0
        T = coordinate_tangent(mask)
        return CertificateFrame(R, beta, float(eta), T, R.lam * np.sign(beta),
                                np.flatnonzero(mask), rank_tol)
    G = R.groups
    if v == "group":
        active = G.norms(beta) > 0
        T = TangentSpace("group", beta.shape, mask=G.expand(active).astype(bool))
        return CertificateFrame(R, beta, float(eta), T, R.lam * sign_generalized(beta, G),
                                np.flatnonzero(active), rank_tol)
    # mixed
    s_gamma = mixed_group_rule(R.lam, R.lam_g, G, beta)
    b1, b2 = mixed_decompose(R.lam, R.lam_g, G, beta)
    _, Umax, _ = support_box_ball(G.split(beta), R.lam, R.lam_g)
    sign = G.merge(Umax)
    mask = (beta != 0) | G.expand(s_gamma).astype(bool)
    T = coordinate_tangent(mask)
    if np.any(G.norms(b2) > 0) and not np.all(s_gamma[G.norms(b2) > 0]):
        raise FrameError("group part of the split falls outside the S_Γ groups")
    return CertificateFrame(R, beta, float(eta), T, sign, np.flatnonzero(mask), rank_tol,
                            s_gamma=s_gamma, beta1=b1, beta2=b2)


def trivial_frame(R: Regularizer, shape=None):
    """Frame with ``G = {0}``: tangent is the whole space and the sign is zero."""
    shape = tuple(shape if shape is not None else R.shape)
    mask = np.ones(shape, dtype=bool)
    T = TangentSpace("coordinate", shape, mask=mask)
    z = np.zeros(shape)
    return CertificateFrame(R, z, 1.0, T, z, np.arange(0), trivial=True)


def b_norm(F: CertificateFrame, beta):
    return F.b_norm(beta)


def b_dual_norm(F: CertificateFrame, u):
    return F.b_dual_norm(u)
