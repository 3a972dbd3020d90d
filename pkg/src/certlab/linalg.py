"""Small dense linear-algebra kernels.

LAPACK (through numpy/scipy) is the default backend. Plain Jacobi
implementations are kept as ``method="jacobi"`` and serve as independent
cross-checks.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla


class LinAlgError(ValueError):
    pass


class SingularMatrixError(LinAlgError):
    """Raised when an SPD solve meets a (near) singular matrix."""

    def __init__(self, message, min_eig):
        super().__init__(f"{message} (min eigenvalue estimate {min_eig:.3e})")
        self.min_eig = float(min_eig)


@dataclass
class SvdFactors:
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.s) @ self.V.T


def _as_finite_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or min(A.shape) < 1:
        raise LinAlgError(f"{name} must be a non-empty 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinAlgError(f"{name} has non-finite entries")
    return A


def _check_symmetric(M, tol=1e-10):
    M = _as_finite_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise LinAlgError(f"M must be square, got {M.shape}")
    scale = max(1.0, np.max(np.abs(M)))
    if np.max(np.abs(M - M.T)) > tol * scale:
        raise LinAlgError("M is not symmetric")
    return 0.5 * (M + M.T)


def jacobi_svd(A, tol=1e-12, max_sweeps=100):
    """One-sided (Hestenes) Jacobi SVD.

    Returns thin factors with singular values sorted nonincreasing.
    """
    A = np.array(A, dtype=float)
    transposed = A.shape[0] < A.shape[1]
    if transposed:
        A = A.T
    m, n = A.shape
    W = A.copy()
    V = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = W[:, i] @ W[:, i]
                b = W[:, j] @ W[:, j]
                c = W[:, i] @ W[:, j]
                if abs(c) <= tol * np.sqrt(a * b) or c == 0.0:
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * c)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta)) if zeta != 0 else 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                wi = W[:, i].copy()
                W[:, i] = cs * wi - sn * W[:, j]
                W[:, j] = sn * wi + cs * W[:, j]
                vi = V[:, i].copy()
                V[:, i] = cs * vi - sn * V[:, j]
                V[:, j] = sn * vi + cs * V[:, j]
        if not rotated:
            break
    s = np.linalg.norm(W, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    W = W[:, order]
    V = V[:, order]
    U = np.zeros((m, n))
    big = s > 0
    U[:, big] = W[:, big] / s[big]
    # complete U for zero singular values so that U stays orthonormal
    if not np.all(big):
        k = int(np.sum(big))
        Q, _ = np.linalg.qr(np.hstack([U[:, :k], np.eye(m)]))
        U[:, k:] = Q[:, k:n]
    if transposed:
        return SvdFactors(V, s, U)
    return SvdFactors(U, s, V)


def jacobi_eigh(M, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix (ascending)."""
    A = np.array(M, dtype=float)
    n = A.shape[0]
    Q = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2))
        if off <= tol * max(1.0, np.linalg.norm(A)):
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                if A[i, j] == 0.0:
                    continue
                theta = (A[j, j] - A[i, i]) / (2.0 * A[i, j])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.array([[c, s], [-s, c]])
                idx = [i, j]
                A[:, idx] = A[:, idx] @ J
                A[idx, :] = J.T @ A[idx, :]
                Q[:, idx] = Q[:, idx] @ J
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], Q[:, order]


def svd(A, method="lapack"):
    """Thin SVD with validated, sorted factors."""
    A = _as_finite_matrix(A)
    if method == "jacobi":
        return jacobi_svd(A)
    if method != "lapack":
        raise ValueError(f"unknown svd method {method!r}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return SvdFactors(U, s, Vt.T)


def eigh(M, method="lapack"):
    M = _check_symmetric(M)
    if method == "jacobi":
        return jacobi_eigh(M)
    if method != "lapack":
        raise ValueError(f"unknown eigen method {method!r}")
    return np.linalg.eigh(M)


def min_eigenvalue_sym(M, method="lapack"):
    return float(eigh(M, method)[0][0])


def max_eigenvalue_sym(M, method="lapack"):
    return float(eigh(M, method)[0][-1])


def solve_spd(M, b, rel_tol=1e-12):
    """Solve ``M x = b`` for symmetric positive definite ``M``.

    Cholesky factorization followed by one step of iterative refinement.
    Raises SingularMatrixError when the smallest eigenvalue is at most
    ``rel_tol * trace(M)``.
    """
    M = _check_symmetric(M)
    b = np.asarray(b, dtype=float)
    tr = float(np.trace(M))
    try:
        factor = sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("matrix is not positive definite", min_eigenvalue_sym(M))
    # cheap conditioning screen from the Cholesky diagonal, exact check if suspicious
    d = np.diag(factor[0]) ** 2
    if tr <= 0 or np.min(d) <= rel_tol * tr:
        lam = min_eigenvalue_sym(M)
        if tr <= 0 or lam <= rel_tol * tr:
            raise SingularMatrixError("matrix is numerically singular", lam)
    x = sla.cho_solve(factor, b, check_finite=False)
    r = b - M @ x
    x = x + sla.cho_solve(factor, r, check_finite=False)
    return x


def cg_solve(apply, b, tol=1e-10, max_iter=None, x0=None):
    """Conjugate gradient for a symmetric positive (semi)definite operator.

    Returns ``(x, iterations, relative_residual)``.
    """
    b = np.asarray(b, dtype=float)
    shape = b.shape
    bn = np.linalg.norm(b)
    if max_iter is None:
        max_iter = 10 * b.size
    x = np.zeros(shape) if x0 is None else np.array(x0, dtype=float)
    if bn == 0:
        return np.zeros(shape), 0, 0.0
    r = b - apply(x)
    p = r.copy()
    rs = np.vdot(r, r)
    it = 0
    while it < max_iter and np.sqrt(rs) > tol * bn:
        Ap = apply(p)
        pAp = np.vdot(p, Ap)
        if pAp <= 0:
            break
        a = rs / pAp
        x = x + a * p
        r = r - a * Ap
        rs_new = np.vdot(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    return x, it, float(np.sqrt(rs) / bn)


def power_norm_sq(apply, apply_t, shape, iters=20, seed=0):
    """Estimate ``‖A‖²`` (spectral) with a fixed number of power iterations."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = apply_t(apply(v))
        est = float(np.linalg.norm(w))
        if est == 0:
            return 0.0
        v = w / est
    return est
