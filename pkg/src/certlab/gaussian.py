"""Gaussian width estimates, Gordon tail bounds and sample-complexity prediction."""
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from . import regularizers as reg

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GAMMA_BRACKET = (1e-6, 1e6)


def lambda_n(n):
    """``√2 Γ((n+1)/2) / Γ(n/2)``, the mean norm of an n-dim standard normal."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.sqrt(2.0) * math.exp(gammaln((n + 1) / 2.0) - gammaln(n / 2.0))


@dataclass
class WidthEstimate:
    mean: float
    se: float
    trials: int
    method: str
    seed: Optional[int] = None
    # inf over γ of the mean squared distance, with its standard error at the minimiser
    sq_mean: Optional[float] = None
    sq_se: Optional[float] = None

    def __post_init__(self):
        if self.se < 0 or self.mean < 0:
            raise ValueError("width mean and standard error must be nonnegative")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict())


def golden_min(f, lo, hi, tol=1e-10, max_iter=300):
    """Vectorised golden-section search for unimodal ``f``.

    ``lo`` and ``hi`` are arrays of brackets; ``f`` is evaluated on an array of
    points of the same shape. Returns ``(argmin, min)``.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = fc <= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c_new = np.where(left, b - GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + GOLDEN * (b - a))
        fp = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_new, d_new
    # the bracket interior is only as good as its best probe; compare with the ends
    xs = np.stack([c, d, a, b])
    fs = np.stack([fc, fd, f(a), f(b)])
    k = np.argmin(fs, axis=0)
    idx = np.arange(xs.shape[1]) if xs.ndim > 1 else None
    if idx is None:
        return float(xs[k]), float(fs[k])
    return xs[k, idx], fs[k, idx]


def _width_parts(F: reg.CertificateFrame, split, eps):
    """Split a batch of noise draws into what the γ-objective needs."""
    T = F.tangent
    a = F.sign + split.a_tilde
    pt = T.project(eps)
    po = eps - pt
    return a, pt, po, split.b_tilde


def width_sq_distances(F: reg.CertificateFrame, split, eps, gam):
    """``min_{u∈G} ‖γ(u + ∇L(β*)) − ε‖²`` per draw, for per-draw ``γ``.

    The tangent part is fixed by γ; the off-tangent part is the distance of
    ``P_T⊥ε − γb̃`` to the ``γη``-scaled B-dual ball.
    """
    a, pt, po, bt = _width_parts(F, split, eps)
    g = np.asarray(gam, dtype=float).reshape((-1,) + (1,) * len(F.shape))
    tang = g * a - pt
    z = po - g * bt
    if F.trivial:
        off = z
    else:
        off = z - _project_scaled(F, z, g * F.eta)
    ax = tuple(range(1, eps.ndim))
    return np.sum(tang ** 2, axis=ax) + np.sum(off ** 2, axis=ax)


def _project_scaled(F, z, radius):
    """Per-draw radius projection onto the B-dual ball (batched over axis 0)."""
    R = F.reg
    r = radius
    if R.variant == "lasso":
        off = F.tangent.complement(z)
        lim = r * R.lam
        return np.clip(off, -lim, lim)
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        out[i] = F.project_b_dual(z[i], float(np.ravel(r[i])[0]))
    return out


def _draws(shape, trials, seed):
    # trial i uses seed + i so any single draw can be replayed
    return np.stack([np.random.default_rng(seed + i).standard_normal(shape) for i in range(trials)])


def width_mc(F: reg.CertificateFrame, split=None, trials=2000, seed=0, tol=1e-10):
    """Monte Carlo estimate of ``E inf_{γ>0, u∈G} ‖γ(u + ∇L(β*)) − ε‖₂``.

    Each draw's γ is found by golden section on ``log γ`` over the bracket
    ``[1e-6, 1e6]`` (objective is convex in γ). The squared statistic
    ``inf_γ E min_u ‖·‖²`` is minimised over a common γ.
    """
    from .certificates import zero_split
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    split = split if split is not None else zero_split(F)
    eps = _draws(F.shape, trials, seed)
    lo, hi = np.log(GAMMA_BRACKET[0]), np.log(GAMMA_BRACKET[1])

    def per_draw(lg):
        return width_sq_distances(F, split, eps, np.exp(lg))

    _, best = golden_min(per_draw, np.full(trials, lo), np.full(trials, hi), tol)
    # γ → 0 gives ‖ε‖, which the bracket only approximates
    best = np.minimum(best, np.sum(eps.reshape(trials, -1) ** 2, axis=1))
    d = np.sqrt(np.maximum(best, 0.0))

    def common(lg):
        lg = np.atleast_1d(lg)
        return np.array([np.mean(width_sq_distances(F, split, eps, np.full(trials, np.exp(v)))) for v in lg])

    lg_star, sq = golden_min(common, np.array([lo]), np.array([hi]), tol)
    vals = width_sq_distances(F, split, eps, np.full(trials, np.exp(lg_star[0])))
    sq0 = float(np.mean(np.sum(eps.reshape(trials, -1) ** 2, axis=1)))
    if sq0 < sq[0]:
        vals = np.sum(eps.reshape(trials, -1) ** 2, axis=1)
    return WidthEstimate(float(np.mean(d)), float(np.std(d, ddof=1) / math.sqrt(trials)), trials,
                         "monte_carlo", seed, float(np.mean(vals)),
                         float(np.std(vals, ddof=1) / math.sqrt(trials)))


def _check_eta_pair(eta, eta_tilde):
    if not eta_tilde < eta:
        raise ValueError(f"need eta_tilde < eta, got {eta_tilde} >= {eta}")


def width_bound_lasso(size_s, p, eta, eta_tilde, signterm):
    """``2|S| + 2 ln(p/|S| − 1)/(η − η̃)² · ‖sgn(β̄) + ã/λ‖₂²``."""
    _check_eta_pair(eta, eta_tilde)
    if size_s < 1 or p < 2 * size_s:
        raise ValueError("need |S| >= 1 and p >= 2|S|")
    return 2.0 * size_s + 2.0 * math.log(p / size_s - 1.0) / (eta - eta_tilde) ** 2 * signterm


def width_bound_group(size_s, q, m, eta, eta_tilde, signterm):
    """``|S|(m+1) + (√(2 ln(q/|S| − 1)) + √m)²/(η − η̃)² · ‖sgn_Γ(β̄) + ã/λ‖₂²``."""
    _check_eta_pair(eta, eta_tilde)
    if size_s < 1 or q < 2 * size_s:
        raise ValueError("need |S| >= 1 and q >= 2|S|")
    c = math.sqrt(2.0 * math.log(q / size_s - 1.0)) + math.sqrt(m)
    return size_s * (m + 1.0) + c * c / (eta - eta_tilde) ** 2 * signterm


def bound_estimate(value, method):
    """Wrap a closed-form squared-width bound as a WidthEstimate (mean is the root)."""
    return WidthEstimate(math.sqrt(value), 0.0, 0, method, None, float(value), 0.0)


@dataclass
class GordonPrediction:
    g: float
    delta: float
    n: int
    prob: float
    guaranteed: bool

    def __post_init__(self):
        if not 0.0 <= self.prob <= 0.5:
            raise ValueError("probability bound must lie in [0, 0.5]")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict())


def gordon_tail(n, g, delta):
    """Failure probability ``½ exp(−½(n/√(n+1) − g − δ)²)``.

    When ``g + δ > n/√(n+1)`` there is no guarantee: returns 0.5 with the flag off.
    """
    gap = n / math.sqrt(n + 1.0) - g - delta
    if gap < 0:
        return GordonPrediction(float(g), float(delta), int(n), 0.5, False)
    return GordonPrediction(float(g), float(delta), int(n), 0.5 * math.exp(-0.5 * gap * gap), True)


def delta_for_alpha(alpha):
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    return math.sqrt(2.0 * math.log(1.0 / (2.0 * alpha)))


def sample_complexity(g, alpha):
    """Smallest n with ``n/√(n+1) ≥ g + δ(α)``, ``δ(α) = √(2 ln(1/(2α)))``.

    At that n the Gordon event with slack δ(α) has failure probability at most α.
    """
    t = g + delta_for_alpha(alpha)
    if t <= 0:
        return 1
    # n/√(n+1) ≥ t  ⇔  n ≥ (t² + t√(t²+4))/2
    n = max(1, int(math.floor((t * t + t * math.sqrt(t * t + 4.0)) / 2.0)) - 2)
    while n / math.sqrt(n + 1.0) < t:
        n += 1
    return n
