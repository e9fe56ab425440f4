"""Rotation-group and symmetric-matrix numerics.

Everything here works on plain numpy arrays: vectors are shape (3,),
matrices (3, 3) or (n, n) for the symmetric helpers (n <= 6 in practice).
"""
from __future__ import annotations

import numpy as np

SKEW_TOL = 1e-9
SPD_TOL = 1e-12
RODRIGUES_SMALL = 1e-8


class NotSkewError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    def __init__(self, min_eig: float):
        super().__init__(f"matrix is not positive definite (min eigenvalue {min_eig:.3e})")
        self.min_eig = min_eig


def hat(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if np.max(np.abs(A + A.T)) > SKEW_TOL * max(1.0, np.max(np.abs(A))):
        raise NotSkewError("vee() requires a skew-symmetric matrix")
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def exp_so3(v) -> np.ndarray:
    """Matrix exponential of hat(v) by the Euler-Rodrigues formula."""
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    K = hat(v)
    if theta < RODRIGUES_SMALL:
        # sin(t)/t -> 1, (1 - cos t)/t^2 -> 1/2
        return np.eye(3) + K + 0.5 * K @ K
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * K + b * K @ K


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R)
    return bool(
        np.max(np.abs(R.T @ R - np.eye(3))) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
    )


def project_to_so3(R, tol: float = 1e-12, max_iter: int = 20) -> np.ndarray:
    """Nearest rotation via the Newton polar iteration R <- (R + R^-T) / 2."""
    R = np.array(R, dtype=float)
    for _ in range(max_iter):
        if np.max(np.abs(R.T @ R - np.eye(3))) < tol:
            break
        R = 0.5 * (R + np.linalg.inv(R).T)
    return R


def jacobi_eigh(A, tol: float = 1e-13, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    (as columns). Kept as a self-contained reference for `sym_eig`.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.max(np.abs(A)), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                G = np.eye(n)
                G[p, p] = G[q, q] = c
                G[p, q] = s
                G[q, p] = -s
                A = G.T @ A @ G
                V = V @ G
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def sym_eig(A):
    """Ascending eigenvalues/eigenvectors of a symmetric matrix (LAPACK)."""
    A = np.asarray(A, dtype=float)
    return np.linalg.eigh(0.5 * (A + A.T))


def sym_eig_bounds(A) -> tuple[float, float]:
    w = np.linalg.eigvalsh(0.5 * (np.asarray(A, dtype=float) + np.asarray(A, dtype=float).T))
    return float(w[0]), float(w[-1])


def lambda_min(A) -> float:
    return sym_eig_bounds(A)[0]


def _spd_power(A, power: float) -> np.ndarray:
    w, V = sym_eig(A)
    if w[0] <= SPD_TOL:
        raise NotPositiveDefiniteError(float(w[0]))
    K = (V * w**power) @ V.T
    return 0.5 * (K + K.T)


def spd_sqrt(A) -> np.ndarray:
    return _spd_power(A, 0.5)


def spd_inv_sqrt(A) -> np.ndarray:
    return _spd_power(A, -0.5)


def induced_norm2(A) -> float:
    """Spectral norm sqrt(lambda_max(A^T A))."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not A.any():
        return 0.0
    return float(np.sqrt(max(np.linalg.eigvalsh(A.T @ A)[-1], 0.0)))


# Batched variants: leading axes are broadcast, last axis is the 3-vector.

def hat_batch(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee_batch(A) -> np.ndarray:
    """Unchecked vee of the skew part of A."""
    A = np.asarray(A)
    return 0.5 * np.stack(
        [A[..., 2, 1] - A[..., 1, 2], A[..., 0, 2] - A[..., 2, 0], A[..., 1, 0] - A[..., 0, 1]],
        axis=-1,
    )


def exp_so3_batch(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    small = theta < RODRIGUES_SMALL
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0, np.sin(safe) / safe)
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / safe**2)
    K = hat_batch(v)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)
