"""Desk-scale estimates of restricted curvature constants.

Infima over cones of directions are searched along arcs
``d(θ) = cos θ·d_T + sin θ·d_⊥`` that join a tangent direction with an
off-tangent one. The cone constraint is a single scalar inequality on the
arc. Sampled values are upper estimates of an infimum. In low dimension a
branch-and-bound scan over the faces of the cube ``[−1, 1]^p`` gives a
rigorous lower bound, and the estimate is marked certified when the two
meet at the requested resolution.
"""
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import regularizers as reg
from .gaussian import golden_min
from .losses import GLMLoss, Loss, QuadraticLoss, kappa, noise_level_eta, penalty_level_lambda

E = math.e
MAX_PATTERNS = 100_000


class CombinatorialBudgetError(ValueError):
    """Exact enumeration would exceed the pattern budget."""


@dataclass
class CurvatureEstimate:
    lower: float
    upper: float
    budget: int
    method: str
    certified: bool = False
    flags: list = field(default_factory=list)
    direction: Optional[np.ndarray] = field(default=None, repr=False)
    sense: str = "inf"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower < 0 or not self.lower <= self.upper:
            raise ValueError(f"need 0 <= lower <= upper, got {self.lower}, {self.upper}")

    @property
    def estimate(self):
        """Best value actually attained by the search."""
        return self.upper if self.sense == "inf" else self.lower

    def to_dict(self):
        return {"lower": _num(self.lower), "upper": _num(self.upper), "budget": self.budget,
                "method": self.method, "certified": self.certified, "flags": list(self.flags),
                "sense": self.sense, "extra": {k: _num(v) for k, v in self.extra.items()}}

    def to_json(self):
        return json.dumps(self.to_dict())


def _num(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


# --------------------------------------------------------------------------
# cones

NORMS = ("l2", "l1", "group_l1", "b")


@dataclass
class ConeSpec:
    """Directions ``d`` with ``⟨lin, d⟩ + weight·b_norm(d) ≤ 0``.

    ``kind="l1"`` replaces ``⟨lin, d⟩`` by ``−(tangent group-ℓ1 mass)``, the
    larger cone ``‖d_{S^c}‖ ≤ ‖d_S‖/weight`` (coordinate frames only).
    ``norm`` is the denominator norm of the curvature ratio; ``group_l1``
    is ``‖·‖_{Γ,1}/√|S|``.
    """

    frame: reg.CertificateFrame
    lin: np.ndarray
    weight: float
    radius: float = math.inf
    norm: str = "l2"
    kind: str = "sign"
    split: object = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cone radius must be positive")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm descriptor {self.norm!r}")
        if self.weight < 0:
            raise ValueError("off-tangent weight must be nonnegative (eta_tilde >= eta gives no guarantee)")
        if self.kind not in ("sign", "l1"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "l1" and self.frame.reg.variant not in ("lasso", "group"):
            raise ValueError("the l1 cone is defined for lasso and group frames")
        self.lin = np.asarray(self.lin, dtype=float).reshape(-1)

    @classmethod
    def certificate(cls, F: reg.CertificateFrame, split=None, radius=math.inf, norm="l2"):
        """``⟨e + ã, d⟩ + (η − η̃)‖d‖_B ≤ 0`` (the structured RSC cone)."""
        a = F.sign if split is None else F.sign + split.a_tilde
        et = 0.0 if split is None else split.eta_tilde
        return cls(F, a, F.eta - et, radius, norm, "sign", split)

    @classmethod
    def glm(cls, F: reg.CertificateFrame, grad_star, radius=math.inf, norm="l2"):
        """``⟨e + ∇L(β*), d⟩ + ‖d‖_B ≤ 0``, the enclosing cone through ``∂R(β̄)``."""
        return cls(F, F.sign + np.asarray(grad_star, dtype=float), 1.0, radius, norm, "sign")

    @classmethod
    def compatibility(cls, F: reg.CertificateFrame, eta, eta_tilde=0.0, kind="sign"):
        return cls(F, F.sign, eta - eta_tilde, math.inf, "group_l1", kind)

    @property
    def shape(self):
        return self.frame.shape

    @property
    def size(self):
        return int(np.prod(self.shape))

    def _groups(self):
        R = self.frame.reg
        if R.groups is not None:
            return R.groups
        return reg.GroupStructure.contiguous(self.size, 1)

    def _gl1(self, D):
        return np.sum(self._groups().norms(D), axis=-1)

    def constraint(self, D):
        """Constraint value for a batch of flattened directions ``(k, size)``."""
        D = np.atleast_2d(D)
        Ds = D.reshape((D.shape[0],) + self.shape)
        b = self.frame.b_norm(Ds)
        if self.kind == "l1":
            lam = self.frame.reg.lam
            tang = self.frame.tangent.project(Ds).reshape(D.shape[0], -1)
            return -lam * self._gl1(tang) + self.weight * b
        return D @ self.lin + self.weight * b

    def constraint_lipschitz(self):
        R = self.frame.reg
        n = self.size
        if R.variant == "lasso":
            lb = R.lam * math.sqrt(n)
        elif R.variant == "group":
            lb = R.lam * math.sqrt(R.groups.q)
        elif R.variant == "nuclear":
            lb = R.lam * math.sqrt(min(self.shape))
        else:
            lb = R.lam * math.sqrt(n)
        if self.kind == "l1":
            return lb * (1.0 + self.weight)
        return float(np.linalg.norm(self.lin)) + self.weight * lb

    def norm_value(self, D):
        D = np.atleast_2d(D)
        if self.norm == "l2":
            return np.linalg.norm(D, axis=1)
        if self.norm == "l1":
            return self._gl1(D)
        if self.norm == "group_l1":
            s = max(len(self.frame.support), 1)
            return self._gl1(D) / math.sqrt(s)
        return self.frame.b_norm(D.reshape((D.shape[0],) + self.shape))

    def norm_lipschitz(self):
        if self.norm == "l2":
            return 1.0
        q = self._groups().q
        if self.norm == "l1":
            return math.sqrt(q)
        if self.norm == "group_l1":
            return math.sqrt(q / max(len(self.frame.support), 1))
        R = self.frame.reg
        return R.lam * math.sqrt(self.size if R.variant != "group" else R.groups.q)


# --------------------------------------------------------------------------
# objectives: value on a batch of flattened directions, optional cell lower bound

class _Quadratic:
    """``dᵀMd / N(d)²``."""

    def __init__(self, M, cone: ConeSpec):
        self.M = 0.5 * (M + M.T)
        self.cone = cone
        self.lmin = max(0.0, float(np.linalg.eigvalsh(self.M)[0])) if self.M.shape[0] else 0.0

    def __call__(self, D):
        D = np.atleast_2d(D)
        N = self.cone.norm_value(D)
        q = np.einsum("ij,jk,ik->i", D, self.M, D)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(N > 0, q / N**2, np.inf)

    def cell_lower(self, C, rho):
        if self.cone.norm == "l2":
            return _sphere_quadratic_lower(self.M, self.lmin, C, rho)
        MC = C @ self.M
        q = np.einsum("ij,ij->i", C, MC)
        qlb = np.maximum(q - 2.0 * np.linalg.norm(MC, axis=1) * rho, 0.0)
        nub = self.cone.norm_value(C) + self.cone.norm_lipschitz() * rho
        return qlb / nub**2


def _sphere_quadratic_lower(M, lmin, C, rho, a=None, const=0.0):
    """Lower bound of ``xᵀMx + ⟨a,x⟩`` over unit ``x`` within ``rho`` of ``C/‖C‖``.

    Uses ``2⟨y, e⟩ = −‖e‖²`` for unit ``x = y + e``: the first-order term is the
    tangential gradient, the remainder is at least ``(λ_min − F − ⟨a,y⟩/2)‖e‖²``.
    """
    Y = C / np.linalg.norm(C, axis=1, keepdims=True)
    rho = np.minimum(rho, 2.0)
    MY = Y @ M if M.ndim == 2 else np.einsum("kij,kj->ki", M, Y)
    F = np.einsum("ij,ij->i", Y, MY)
    g = 2.0 * (MY - F[:, None] * Y)
    A = 0.0
    if a is not None:
        A = np.einsum("ij,ij->i", Y, a)
        g = g + (a - A[:, None] * Y)
    coef = np.minimum(0.0, lmin - F - 0.5 * A)
    return F + A + const - np.linalg.norm(g, axis=1) * rho + coef * rho**2


class _GLMGamma:
    """``Σ w_i min(z_i², |z_i|^{2−j}/r^j)`` with ``z_i = ⟨x_i, d⟩/N(d)``."""

    def __init__(self, rows, w, r, j, cone: ConeSpec):
        if j not in (1, 2):
            raise ValueError("j must be 1 or 2")
        self.X = np.asarray(rows, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.r = float(r)
        self.j = j
        self.cone = cone
        self.xn = np.linalg.norm(self.X, axis=1)

    def _terms(self, z):
        a = np.abs(z)
        if self.r == 0:
            return z**2
        if math.isinf(self.r):
            return np.zeros_like(z)
        cap = a / self.r if self.j == 1 else np.full_like(a, 1.0 / self.r**2)
        return np.minimum(z**2, cap)

    def __call__(self, D):
        D = np.atleast_2d(D)
        N = self.cone.norm_value(D)
        with np.errstate(divide="ignore", invalid="ignore"):
            Z = (D @ self.X.T) / N[:, None]
        v = self._terms(Z) @ self.w
        return np.where(N > 0, v, np.inf)

    def cell_lower(self, C, rho):
        if math.isinf(self.r):
            return np.zeros(C.shape[0])
        if self.cone.norm != "l2":
            # first-order interval bound on |⟨x, d⟩| and an upper bound on N(d)
            zc = np.abs(C @ self.X.T)
            lo = np.maximum(zc - self.xn * rho[:, None], 0.0)
            nub = self.cone.norm_value(C) + self.cone.norm_lipschitz() * rho
            return self._terms(lo / nub[:, None]) @ self.w
        Y = C / np.linalg.norm(C, axis=1, keepdims=True)
        rho = np.minimum(rho, 2.0)
        Z = Y @ self.X.T
        spread = self.xn[None, :] * rho[:, None]
        lo = np.maximum(np.abs(Z) - spread, 0.0)
        hi = np.abs(Z) + spread
        tau = math.inf if self.r == 0 else 1.0 / self.r
        unc = hi <= tau
        capd = lo >= tau
        strad = ~(unc | capd)
        W = self.w[None, :]
        # uncapped rows: quadratic form, per cell
        Mc = np.einsum("ki,ij,il->kjl", W * unc, self.X, self.X)
        const = np.zeros(C.shape[0])
        a = np.zeros_like(Y)
        if self.r > 0:
            if self.j == 2:
                const = (W * capd).sum(axis=1) / self.r**2
            else:
                a = ((W * capd * np.sign(Z)) @ self.X) / self.r
        smooth = _sphere_quadratic_lower(Mc, 0.0, Y, rho, a, const)
        return smooth + np.sum(np.where(strad, self._terms(lo) * W, 0.0), axis=1)


class _GLMRsc:
    """``D_L^s(β̄ + tΔ, β̄)/‖tΔ‖²`` minimised over feasible ``t``.

    Feasible ``t`` satisfy ``D^s(t) + t·c(Δ) ≤ 0`` and ``t·N(Δ) ≤ r``; the set
    is an interval ``(0, t*]`` because ``D^s(t)/t`` is nondecreasing.
    """

    def __init__(self, L: Loss, anchor, cone: ConeSpec, t_points=12, t_cap=1e6):
        self.L = L
        self.anchor = np.asarray(anchor, dtype=float).reshape(-1)
        self.cone = cone
        self.t_points = t_points
        self.t_cap = t_cap
        self.g0 = np.asarray(L.gradient(anchor), dtype=float).reshape(-1)

    def _ds(self, d, t):
        b = (self.anchor + t * d).reshape(self.L.shape)
        g = np.asarray(self.L.gradient(b), dtype=float).reshape(-1)
        return float(t * (g - self.g0) @ d)

    def one(self, d):
        N = float(self.cone.norm_value(d)[0])
        if N == 0:
            return math.inf
        c = float(self.cone.constraint(d)[0])
        tmax = min(self.t_cap, self.cone.radius / N)
        if c > 0:
            return math.inf
        if self._ds(d, tmax) + tmax * c > 0:
            lo, hi = 0.0, tmax
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if self._ds(d, mid) + mid * c <= 0:
                    lo = mid
                else:
                    hi = mid
            tmax = lo
        if tmax <= 0:
            return math.inf
        ts = tmax * np.geomspace(1e-4, 1.0, self.t_points)
        return min(self._ds(d, t) / (t * N) ** 2 for t in ts)

    def __call__(self, D):
        D = np.atleast_2d(D)
        return np.array([self.one(d[None, :]) for d in D])


# --------------------------------------------------------------------------
# arc search

def _unit(V):
    n = np.linalg.norm(V, axis=-1, keepdims=True)
    return np.where(n > 0, V / np.where(n > 0, n, 1.0), 0.0)


def _sample_pairs(cone: ConeSpec, k, rng):
    T = cone.frame.tangent
    shape = cone.shape
    size = cone.size
    G = rng.standard_normal((k,) + shape)
    dT = _unit(T.project(G).reshape(k, size))
    H = rng.standard_normal((k,) + shape)
    # half of the off-tangent draws are sparse
    sparse = rng.random(k) < 0.5
    keep = rng.random((k, size)) < np.maximum(3.0 / size, 0.02)
    H = H.reshape(k, size)
    H = np.where(sparse[:, None] & ~keep, 0.0, H).reshape((k,) + shape)
    dP = _unit(T.complement(H).reshape(k, size))
    return dT, dP


class _Arc:
    def __init__(self, obj, cone: ConeSpec, n_grid=33, tol=1e-9):
        self.obj = obj
        self.cone = cone
        self.n_grid = n_grid
        self.tol = tol

    def _eval(self, dT, dP, th):
        D = np.cos(th)[:, None] * dT + np.sin(th)[:, None] * dP
        c = self.cone.constraint(D)
        v = np.full(D.shape[0], np.inf)
        ok = c <= 0
        if np.any(ok):
            v[ok] = self.obj(D[ok])
        return v, D

    def run(self, dT, dP):
        """Best ``(value, direction)`` per pair."""
        k = dT.shape[0]
        # orient d_T so that θ = 0 is on the feasible side when possible
        cT = self.cone.constraint(dT)
        flip = cT > 0
        dT = np.where(flip[:, None], -dT, dT)
        has_t = np.any(dT != 0, axis=1)
        has_p = np.any(dP != 0, axis=1)
        grid = np.linspace(0.0, math.pi, self.n_grid)
        th = np.tile(grid, k)
        rep_T = np.repeat(dT, self.n_grid, axis=0)
        rep_P = np.repeat(dP, self.n_grid, axis=0)
        vals, _ = self._eval(rep_T, rep_P, th)
        vals = vals.reshape(k, self.n_grid)
        # arcs degenerate to a single direction when one side is empty
        vals[~has_p, 1:] = np.inf
        only_p = ~has_t & has_p
        vals[only_p] = np.where(np.arange(self.n_grid) == self.n_grid // 2, vals[only_p], np.inf)
        best = np.argmin(vals, axis=1)
        bval = vals[np.arange(k), best]
        step = grid[1]
        lo = np.clip(grid[best] - step, 0.0, math.pi)
        hi = np.clip(grid[best] + step, 0.0, math.pi)
        refine = np.isfinite(bval) & has_t & has_p
        th_best = grid[best]
        if np.any(refine):
            idx = np.flatnonzero(refine)

            def f(t):
                return self._eval(dT[idx], dP[idx], t)[0]

            t_opt, v_opt = golden_min(f, lo[idx], hi[idx], tol=self.tol)
            better = v_opt < bval[idx]
            th_best[idx[better]] = t_opt[better]
            bval[idx[better]] = v_opt[better]
        D = np.cos(th_best)[:, None] * dT + np.sin(th_best)[:, None] * dP
        return bval, D


def _search(obj, cone: ConeSpec, budget, seed, candidates=None, n_refine=8, refine_rounds=None):
    rng = np.random.default_rng(seed)
    arc = _Arc(obj, cone)
    size = cone.size
    T = cone.frame.tangent
    best_v, best_d = math.inf, None
    pool_v, pool_T, pool_P = [], [], []
    chunk = 256
    done = 0
    while done < budget:
        k = min(chunk, budget - done)
        dT, dP = _sample_pairs(cone, k, rng)
        v, D = arc.run(dT, dP)
        pool_v.append(v)
        pool_T.append(dT)
        pool_P.append(dP)
        done += k
    v = np.concatenate(pool_v)
    dT = np.concatenate(pool_T)
    dP = np.concatenate(pool_P)
    if candidates is not None:
        C = np.atleast_2d(np.asarray(candidates, dtype=float).reshape(-1, size))
        Cs = C.reshape((-1,) + cone.shape)
        cT = _unit(T.project(Cs).reshape(-1, size))
        cP = _unit(T.complement(Cs).reshape(-1, size))
        cv, _ = arc.run(cT, cP)
        feas = cone.constraint(C) <= 0
        direct = np.where(feas, obj(C), np.inf)
        cv = np.minimum(cv, direct)
        v = np.concatenate([v, cv])
        dT = np.concatenate([dT, cT])
        dP = np.concatenate([dP, cP])
    order = np.argsort(v, kind="stable")[:n_refine]
    order = order[np.isfinite(v[order])]
    n_feasible = int(np.sum(np.isfinite(v)))
    if order.size == 0:
        return math.inf, None, n_feasible
    # local perturbation of the best pairs
    rT, rP, rv = dT[order].copy(), dP[order].copy(), v[order].copy()
    _, rD = arc.run(rT, rP)
    s = np.full(order.size, 0.3)
    rounds = refine_rounds if refine_rounds is not None else max(10, budget // (4 * max(order.size, 1)))
    for _ in range(rounds):
        G = rng.standard_normal((order.size,) + cone.shape)
        H = rng.standard_normal((order.size,) + cone.shape)
        nT = _unit(rT + s[:, None] * T.project(G).reshape(order.size, size))
        nT = np.where(np.any(rT != 0, axis=1)[:, None], nT, 0.0)
        nP = _unit(rP + s[:, None] * T.complement(H).reshape(order.size, size))
        nP = np.where(np.any(rP != 0, axis=1)[:, None], nP, 0.0)
        nv, nD = arc.run(nT, nP)
        better = nv < rv
        rT[better], rP[better], rv[better], rD[better] = nT[better], nP[better], nv[better], nD[better]
        s = np.where(better, s * 1.5, s * 0.6)
        s = np.maximum(s, 1e-6)
    i = int(np.argmin(rv))
    if rv[i] <= best_v:
        best_v, best_d = float(rv[i]), rD[i]
    # a candidate evaluated directly may beat every arc
    if candidates is not None:
        j = int(np.argmin(cv))
        if cv[j] < best_v:
            best_v = float(cv[j])
            best_d = C[j] if np.isfinite(direct[j]) and direct[j] <= cv[j] else best_d
    return best_v, best_d, n_feasible


# --------------------------------------------------------------------------
# branch and bound over cube faces

@dataclass
class _BnbResult:
    lower: float
    upper: float
    direction: Optional[np.ndarray]
    certified: bool
    cells: int
    empty: bool


def _bnb(obj, cone: ConeSpec, resolution=1e-2, max_cells=400_000, upper=math.inf, batch=4096):
    p = cone.size
    Lc = cone.constraint_lipschitz()
    centers = []
    for i in range(p):
        for s in (-1.0, 1.0):
            c = np.zeros(p)
            c[i] = s
            centers.append(c)
    C = np.array(centers)
    free = [np.flatnonzero(np.arange(p) != i) for i in range(p) for _ in (0, 1)]
    free_mask = np.array([np.arange(p) != i for i in range(p) for _ in (0, 1)])
    h = np.ones(len(C))
    best_d = None
    ub = upper
    discarded_lb = math.inf
    cells = 0
    offsets = np.array(list(itertools.product((-0.5, 0.5), repeat=max(p - 1, 0)))) if p > 1 else np.zeros((1, 0))
    sq = math.sqrt(max(p - 1, 0))
    del free

    def tol(u):
        return max(resolution * abs(u), 1e-12) if math.isfinite(u) else math.inf

    while len(C):
        cells += len(C)
        rho = h * sq
        cval = cone.constraint(C)
        feasible_cell = cval - Lc * rho <= 1e-12
        C, h, free_mask, cval, rho = (C[feasible_cell], h[feasible_cell], free_mask[feasible_cell],
                                      cval[feasible_cell], rho[feasible_cell])
        if not len(C):
            break
        fc = cval <= 0
        if np.any(fc):
            v = obj(C[fc])
            j = int(np.argmin(v))
            if v[j] < ub:
                ub = float(v[j])
                best_d = C[fc][j].copy()
        lb = np.concatenate([obj.cell_lower(C[i:i + batch], rho[i:i + batch]) for i in range(0, len(C), batch)])
        keep = lb < ub - tol(ub)
        if np.any(~keep):
            discarded_lb = min(discarded_lb, float(np.min(lb[~keep])))
        C, h, free_mask, lb = C[keep], h[keep], free_mask[keep], lb[keep]
        if not len(C) or p == 1:
            break
        if cells + len(C) * len(offsets) > max_cells:
            lower = min(discarded_lb, float(np.min(lb)))
            return _BnbResult(max(lower, 0.0), ub, best_d, False, cells, False)
        # split every remaining cell into 2^(p−1) children
        nh = h / 2.0
        kids = []
        for k in range(len(C)):
            base = np.repeat(C[k][None, :], len(offsets), axis=0)
            base[:, free_mask[k]] += offsets * h[k]
            kids.append(base)
        C = np.concatenate(kids)
        h = np.repeat(nh, len(offsets))
        free_mask = np.repeat(free_mask, len(offsets), axis=0)
    if not math.isfinite(ub) and not math.isfinite(discarded_lb):
        return _BnbResult(math.inf, math.inf, None, True, cells, True)
    lower = min(discarded_lb, ub)
    return _BnbResult(max(lower, 0.0), ub, best_d, True, cells, False)


# --------------------------------------------------------------------------
# public estimators

def _finish(value, direction, bnb, budget, method, n_feasible, flags=None, extra=None, sense="inf"):
    flags = list(flags or [])
    extra = dict(extra or {})
    extra["n_feasible"] = n_feasible
    upper = value
    lower = value
    certified = False
    if bnb is not None:
        extra["cells"] = bnb.cells
        if bnb.empty:
            return CurvatureEstimate(math.inf, math.inf, budget, method + "+bnb", True,
                                     flags + ["empty_cone"], None, sense, extra)
        if bnb.upper < upper:
            upper, direction = bnb.upper, bnb.direction
        lower = min(bnb.lower, upper)
        certified = bnb.certified
        method = method + "+bnb"
    if not math.isfinite(upper):
        return CurvatureEstimate(math.inf, math.inf, budget, method, certified,
                                 flags + ["empty_cone"], None, sense, extra)
    if not certified:
        flags.append("heuristic")
    return CurvatureEstimate(max(0.0, lower), max(0.0, upper), budget, method, certified,
                             flags, direction, sense, extra)


def _dense_H(L):
    if isinstance(L, QuadraticLoss):
        return L.X.T @ L.X
    if isinstance(L, GLMLoss) and L.quadratic:
        return L.X.T @ L.X
    raise TypeError("a quadratic loss is required")


def rsc_estimate(L: Loss, cone: ConeSpec, budget=2000, seed=0, certify_dim=6, resolution=1e-2,
                 candidates=None, anchor=None):
    """Restricted curvature ``inf D_L^s(β̄+Δ, β̄)/‖Δ‖²`` over cone directions.

    For quadratic loss ``D_L^s = 2⟨HΔ, Δ⟩`` and only the direction matters.
    For GLM loss the step length is searched as well (``anchor`` is β̄,
    default the frame anchor); GLM estimates are never certified.
    """
    if budget < 100:
        raise ValueError("budget must be at least 100")
    if isinstance(L, QuadraticLoss) or (isinstance(L, GLMLoss) and L.quadratic):
        obj = _Quadratic(2.0 * _dense_H(L), cone)
        method = "arc_sampling"
    else:
        obj = _GLMRsc(L, cone.frame.anchor if anchor is None else anchor, cone)
        method = "arc_sampling_glm"
        budget_eff = max(100, budget // 10)
        v, d, nf = _search(obj, cone, budget_eff, seed, candidates, n_refine=4, refine_rounds=10)
        return _finish(v, d, None, budget, method, nf)
    v, d, nf = _search(obj, cone, budget, seed, candidates)
    bnb = None
    if cone.size <= certify_dim:
        bnb = _bnb(obj, cone, resolution, upper=v)
    return _finish(v, d, bnb, budget, method, nf)


def compatibility_constant(X, F: reg.CertificateFrame, eta, eta_tilde=0.0, budget=2000, seed=0,
                           cone="sign", certify_dim=3, resolution=1e-2):
    """``inf ‖XΔ‖²/(‖Δ‖_{Γ,1}²/|S|)`` over the sign cone (or the larger ℓ1 cone)."""
    X = np.asarray(X, dtype=float)
    if budget < 100:
        raise ValueError("budget must be at least 100")
    H = X.T @ X
    spec = ConeSpec.compatibility(F, eta, eta_tilde, cone)
    obj = _Quadratic(H, spec)
    cands = None
    if cone == "l1":
        # the sign cone sits inside the ℓ1 cone: its best direction is admissible here
        inner = compatibility_constant(X, F, eta, eta_tilde, budget, seed, "sign", certify_dim, resolution)
        cands = None if inner.direction is None else inner.direction[None, :]
    v, d, nf = _search(obj, spec, budget, seed, cands)
    bnb = _bnb(obj, spec, resolution, upper=v) if spec.size <= certify_dim else None
    out = _finish(v, d, bnb, budget, "arc_sampling", nf, extra={"cone": cone})
    if cone == "l1" and inner.upper < out.upper:
        out.upper, out.direction = inner.upper, inner.direction
        out.lower = min(out.lower, out.upper)
    return out


@dataclass
class SparseEigs:
    rho_plus: float
    gamma_sk: float
    rho_pattern: tuple
    gamma_pattern: tuple
    patterns: int


def sparse_eigs(X, groups: Optional[reg.GroupStructure], k, S=()):
    """Exact ``ρ⁺(k)`` and ``γ_{S,k}`` by enumerating group supports."""
    X = np.asarray(X, dtype=float)
    G = groups or reg.GroupStructure.contiguous(X.shape[1], 1)
    if k < 1:
        raise ValueError("k must be at least 1")
    q = G.q
    S = tuple(sorted(int(s) for s in S))
    rest = [j for j in range(q) if j not in S]
    kr = min(k, q)
    kg = min(k - 1, len(rest))
    n_rho = math.comb(q, kr)
    n_gam = math.comb(len(rest), kg)
    if n_rho + n_gam > MAX_PATTERNS:
        raise CombinatorialBudgetError(f"{n_rho + n_gam} group patterns exceed the budget of {MAX_PATTERNS}")
    H = X.T @ X
    rho, rho_pat = -math.inf, ()
    for pat in itertools.combinations(range(q), kr):
        cols = G.index[list(pat)].ravel()
        lam = float(np.linalg.eigvalsh(H[np.ix_(cols, cols)])[-1])
        if lam > rho:
            rho, rho_pat = lam, pat
    gam, gam_pat = math.inf, ()
    for extra in itertools.combinations(rest, kg):
        pat = tuple(sorted(S + extra))
        if not pat:
            continue
        cols = G.index[list(pat)].ravel()
        lam = float(np.linalg.eigvalsh(H[np.ix_(cols, cols)])[0])
        if lam < gam:
            gam, gam_pat = lam, pat
    return SparseEigs(rho, max(gam, 0.0) if math.isfinite(gam) else gam, rho_pat, gam_pat, n_rho + n_gam)


# --------------------------------------------------------------------------
# correlation between T̃ and its complement

def _extreme_blocks(F: reg.CertificateFrame, Tt: reg.TangentSpace):
    """Column blocks and scales whose unit balls generate the B-ball inside T̃⊥."""
    R = F.reg
    out_mask = ~np.asarray(Tt.mask, dtype=bool).ravel()
    blocks = []
    if R.variant == "lasso":
        for j in np.flatnonzero(out_mask):
            blocks.append((np.array([j]), R.lam))
        return blocks
    G = R.groups
    if R.variant == "mixed":
        for j in np.flatnonzero(out_mask):
            blocks.append((np.array([j]), R.lam))
    scale = R.lam if R.variant == "group" else 0.5 * R.lam_g
    for g, idx in enumerate(G.index):
        if R.variant == "mixed" and F.s_gamma is not None and F.s_gamma[g]:
            continue
        cols = idx[out_mask[idx]]
        if cols.size:
            blocks.append((cols, scale))
    return blocks


def correlation_T(L: QuadraticLoss, Tt: reg.TangentSpace, F: reg.CertificateFrame, delta_prime,
                  budget=2000, seed=0, null_tol=1e-10):
    """``cor(T̃, T̃⊥) = sup |⟨HP_T̃β, P_T̃⊥β⟩| / ⟨HP_T̃β, P_T̃β⟩^{1/2}`` over ``‖β‖_B ≤ δ′``.

    The ratio does not depend on the size of the T̃ part, so the supremum is
    ``δ′·max ‖H_T̃^{-1/2} P_T̃ H b‖`` over extreme points ``b`` of the unit
    B-ball in T̃⊥. Coordinate frames enumerate them exactly. Matrix frames
    use alternating power iterations over rank-one extreme points (a lower
    estimate) with the operator norm as upper bound. ``extra["crude"]`` is
    the cruder ``sup ⟨H b, b⟩^{1/2}`` bound.
    """
    if delta_prime < 0:
        raise ValueError("delta_prime must be nonnegative")
    H = L.H_matrix()
    B = Tt.basis()
    HT = B.T @ H @ B
    if B.shape[1]:
        w, Q = np.linalg.eigh(HT)
        keep = w > null_tol * max(1.0, float(w[-1]))
        Wi = Q[:, keep] / np.sqrt(w[keep])   # H_T̃^{-1/2} on the non-null part
        K = Wi.T @ B.T @ H
        flags = [] if np.all(keep) else ["null_directions_excluded"]
    else:
        K = np.zeros((0, H.shape[0]))
        flags = []
    Xf = L.X
    if Tt.kind != "matrix":
        best, crude = 0.0, 0.0
        for cols, scale in _extreme_blocks(F, Tt):
            if K.shape[0]:
                best = max(best, float(np.linalg.norm(K[:, cols], 2)) / scale)
            crude = max(crude, float(np.linalg.norm(Xf[:, cols], 2)) / scale)
        v = delta_prime * best
        return CurvatureEstimate(v, v, 0, "extreme_points", True, flags, None, "sup",
                                 {"crude": delta_prime * crude})
    # matrix: extreme points u vᵀ / λ with u ⊥ U, v ⊥ V
    p1, p2 = Tt.shape
    PU = np.eye(p1) - Tt.U @ Tt.U.T
    PV = np.eye(p2) - Tt.V @ Tt.V.T
    P = np.kron(PU, PV)   # row-major vec of PU·β·PV
    lam = F.reg.lam
    KP = K @ P
    XP = Xf @ P
    rng = np.random.default_rng(seed)

    def alt(A, starts):
        best = 0.0
        A3 = A.reshape(A.shape[0], p1, p2)
        for _ in range(starts):
            v = PV @ rng.standard_normal(p2)
            if np.linalg.norm(v) == 0:
                return 0.0
            v /= np.linalg.norm(v)
            for _ in range(50):
                Mv = A3 @ v
                _, _, vt = np.linalg.svd(Mv, full_matrices=False)
                u = PU @ vt[0]
                u /= max(np.linalg.norm(u), 1e-300)
                Mu = np.einsum("kij,i->kj", A3, u)
                _, _, vt = np.linalg.svd(Mu, full_matrices=False)
                v = PV @ vt[0]
                v /= max(np.linalg.norm(v), 1e-300)
            best = max(best, float(np.linalg.norm(A @ np.outer(u, v).ravel())))
        return best

    starts = max(1, min(budget // 100, 50))
    low = alt(KP, starts) / lam if KP.shape[0] else 0.0
    up = float(np.linalg.norm(KP, 2)) / lam if KP.shape[0] else 0.0
    crude = alt(XP, starts) / lam
    return CurvatureEstimate(delta_prime * low, delta_prime * max(up, low), budget, "alternating_power", False,
                             flags + ["heuristic"], None, "sup", {"crude": delta_prime * crude})


@dataclass
class ParamErrorBound:
    delta_prime: float
    tangent_energy: float
    cor: float
    gamma_tilde: float
    l2_tangent: float

    def to_dict(self):
        return {k: _num(v) for k, v in self.__dict__.items()}


def param_error_bound(delta, eta, F: reg.CertificateFrame, L: QuadraticLoss, Tt: Optional[reg.TangentSpace] = None,
                      cor=None, beta_star=None, budget=2000, seed=0):
    """``‖Δ‖_B ≤ δ′`` and ``⟨H_T̃ P_T̃Δ, P_T̃Δ⟩^{1/2} ≤ √((1−η)δ′) + 2 cor``,
    with ``δ′ = δ/(1−η) + ‖P_T⊥β*‖_B``. The ℓ2 bound on ``P_T̃Δ`` divides by
    ``√γ_T̃`` (smallest eigenvalue of ``H`` on T̃)."""
    if not eta < 1:
        raise ValueError("eta must be below 1")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    Tt = Tt or F.tangent
    off = 0.0 if beta_star is None else float(F.b_norm(np.asarray(beta_star, dtype=float)))
    dp = delta / (1.0 - eta) + off
    if cor is None:
        cor = correlation_T(L, Tt, F, dp, budget, seed).upper
    energy = math.sqrt((1.0 - eta) * dp) + 2.0 * cor
    B = Tt.basis()
    g = float(np.linalg.eigvalsh(B.T @ L.H_matrix() @ B)[0]) if B.shape[1] else math.inf
    l2 = energy / math.sqrt(g) if g > 0 else math.inf
    return ParamErrorBound(dp, energy, float(cor), g, l2)


# --------------------------------------------------------------------------
# generalized linear models

def _rows_curvature(L: Loss, anchor):
    if isinstance(L, QuadraticLoss):
        return L.X, np.full(L.X.shape[0], 2.0)
    if isinstance(L, GLMLoss):
        return L.X, L.curvature_weights(anchor)
    raise TypeError(f"unsupported loss {type(L).__name__}")


def glm_gamma(L: Loss, anchor, cone: ConeSpec, r, j=2, budget=2000, seed=0, certify_dim=4, resolution=1e-2):
    """``γ_j(β̄; r, 𝒞, ‖·‖) = inf Σ ℓ″(⟨x_i,β̄⟩)/(2e)·min(z_i², |z_i|^{2−j}/r^j)``,
    ``z_i = ⟨x_i, Δ⟩/‖Δ‖``, over cone directions Δ."""
    if budget < 100:
        raise ValueError("budget must be at least 100")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    rows, l2 = _rows_curvature(L, anchor)
    obj = _GLMGamma(rows, l2 / (2.0 * E), r, j, cone)
    v, d, nf = _search(obj, cone, budget, seed)
    bnb = _bnb(obj, cone, resolution, upper=v) if cone.size <= certify_dim else None
    return _finish(v, d, bnb, budget, "arc_sampling", nf, extra={"j": j, "r": r})


@dataclass
class GLMBound:
    bound: float
    d_bar_star: float
    lam: float
    gamma2: float
    gamma2_certified: bool
    eta_star: float
    kappa: float
    radius_rhs: float
    condition_A: Optional[bool]

    def radius_ok(self, anchor, beta_hat):
        """Condition along the segment to ``β̂``: ``κ‖β̂−β̄‖ ≤ 1`` or within the radius."""
        dist = float(np.linalg.norm(np.asarray(beta_hat) - np.asarray(anchor)))
        return self.kappa * dist <= 1.0 or dist <= self.radius_rhs

    def to_dict(self):
        return {k: _num(v) for k, v in self.__dict__.items()}


_DUAL_TO_PRIMAL = {"l2": "l2", "linf": "l1", "group_linf": "l1"}


def glm_oracle_bound(L: Loss, anchor, beta_star, R: reg.Regularizer, norm="l2", budget=2000, seed=0, A=None):
    """``D_L(β̂,β*) ≤ D_L(β̄,β*) + λ²/(4γ₂)``.

    ``λ`` is the dual-norm distance ``inf_{ū∈∂R(β̄)} ‖∇L(β*) + ū‖_D`` (an
    upper bound on the penalty level) and ``γ₂ = γ₂(β̄; 1, 𝒞, ‖·‖)`` on the
    enclosing cone; the certified lower value is used when available.
    ``norm`` names the dual norm (l2, linf or group_linf).
    """
    if norm not in _DUAL_TO_PRIMAL:
        raise ValueError(f"unsupported norm descriptor {norm!r}")
    eta_star = noise_level_eta(L, beta_star, R)
    if not eta_star < 1:
        raise ValueError(f"noise level eta(beta*) = {eta_star:.4g} is not below 1")
    anchor = np.asarray(anchor, dtype=float)
    lam = penalty_level_lambda(L, anchor, beta_star, R, norm)
    F = reg.certificate_frame(R, anchor, 1.0)
    if norm == "linf" and R.variant == "group":
        raise ValueError("linf dual norm pairs with lasso frames; use group_linf for groups")
    cone = ConeSpec.glm(F, L.gradient(beta_star), norm=_DUAL_TO_PRIMAL[norm])
    est = glm_gamma(L, anchor, cone, 1.0, 2, budget, seed)
    if not est.upper > 0:
        raise ValueError("gamma_2 estimate is not positive")
    g2 = est.lower if est.certified and est.lower > 0 else est.upper
    d_bar = L.bregman(anchor, beta_star)
    k = kappa(L)
    bound = d_bar + (lam * lam / (4.0 * g2) if math.isfinite(g2) else 0.0)
    if lam == 0:
        rhs = math.inf
    elif k == 0:
        rhs = math.inf
    else:
        rhs = g2 / (k * k * lam) + lam / (4.0 * g2)
    cond_a = None if A is None else bool(k == 0 or lam == 0 or 2.0 * A <= g2 / (k * k * lam))
    return GLMBound(float(bound), float(d_bar), float(lam), float(g2), bool(est.certified), eta_star,
                    k, float(rhs), cond_a)
