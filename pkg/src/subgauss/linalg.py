"""Dense kernels: matrix-vector products, Gram spectra, l1-ball projection."""

from __future__ import annotations

import math

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def apply(gamma: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gamma @ x with each row summed pairwise.

    ``np.add.reduce`` along a contiguous axis uses pairwise summation, which
    BLAS-backed ``@`` does not guarantee.
    """
    gamma = np.asarray(gamma, dtype=float)
    x = np.asarray(x, dtype=float)
    if gamma.ndim != 2 or x.shape != (gamma.shape[1],):
        raise ValueError(f"cannot apply {gamma.shape} matrix to vector of shape {x.shape}")
    return np.add.reduce(np.ascontiguousarray(gamma * x), axis=1)


def jacobi_eigenvalues(a: np.ndarray, tol: float = JACOBI_TOL) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over all (p, q) pairs in row order until the off-diagonal
    Frobenius norm drops to ``tol`` (relative to the whole matrix once that
    is above 1).  Returned in ascending order.
    """
    a = np.array(a, dtype=float)
    size = a.shape[0]
    if a.shape != (size, size):
        raise ValueError("jacobi_eigenvalues needs a square matrix")
    a = 0.5 * (a + a.T)
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(JACOBI_MAX_SWEEPS):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = a[q, q] - a[p, p]
                if abs(theta) > 1e150 * abs(apq):
                    t = apq / theta  # tau^2 would overflow; t ~ 1/(2 tau)
                else:
                    tau = theta / (2.0 * apq)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.sort(np.diag(a))


def gram_extreme_eigs(gamma: np.ndarray, support) -> tuple[float, float]:
    """(lambda_min, lambda_max) of Gamma_S^T Gamma_S / k."""
    support = sorted(support)
    if not support:
        raise ValueError("support must be nonempty")
    gamma = np.asarray(gamma, dtype=float)
    cols = gamma[:, support]
    gram = cols.T @ cols / gamma.shape[0]
    eigs = jacobi_eigenvalues(gram)
    return float(eigs[0]), float(eigs[-1])


def project_l1_ball(x: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {t : sum |t_i| <= radius} by sort and threshold."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    mag = np.abs(x)
    if mag.sum() <= radius:
        return x.copy()
    srt = np.sort(mag)[::-1]
    csum = np.cumsum(srt)
    idx = np.arange(1, len(srt) + 1)
    active = np.nonzero(srt - (csum - radius) / idx > 0)[0][-1]
    tau = (csum[active] - radius) / (active + 1)
    out = np.sign(x) * np.maximum(mag - tau, 0.0)
    # rounding can leave the sum a few ulps over the radius
    excess = np.abs(out).sum() - radius
    if excess > 0:
        out *= radius / (radius + excess)
    return out


def power_iteration_top(gamma: np.ndarray, iters: int = 50, seed_vec=None) -> float:
    """Estimate of lambda_max(Gamma^T Gamma) by power iteration."""
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[1]
    if seed_vec is None:
        v = 1.0 + 0.5 * np.sin(np.arange(1, n + 1))  # fixed start, not orthogonal to typical tops
    else:
        v = np.asarray(seed_vec, dtype=float)
    v = v / np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = gamma.T @ (gamma @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        est = float(v @ w)
        v = w / norm
    return max(est, float(v @ (gamma.T @ (gamma @ v))))
