"""Scaled unscented transform: sigma-point generation and weights."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky

UT_ALPHA = 1e-3
UT_BETA = 2.0
UT_KAPPA = 0.0


def sigma_points(mean: np.ndarray, cov: np.ndarray,
                 alpha: float = UT_ALPHA, beta: float = UT_BETA,
                 kappa: float = UT_KAPPA):
    """Return (points (2n+1, n), mean weights, covariance weights)."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    n = mean.size
    lam = alpha ** 2 * (n + kappa) - n
    scaled = (n + lam) * cov
    # jitter fallback keeps the factorization alive for near-singular covariances
    jitter = 0.0
    for _ in range(6):
        try:
            root = cholesky(scaled + jitter * np.eye(n), lower=True)
            break
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-12 * max(np.trace(scaled) / n, 1.0))
    else:
        # eigenvalue clip as a last resort
        vals, vecs = np.linalg.eigh(scaled)
        root = vecs @ np.diag(np.sqrt(np.clip(vals, 1e-12, None)))
    pts = np.empty((2 * n + 1, n))
    pts[0] = mean
    pts[1:n + 1] = mean + root.T
    pts[n + 1:] = mean - root.T
    # weights are O(alpha^-2) with opposite signs; the normalization
    # identity sum(wm) == 1 cancels catastrophically in float64, so the
    # weights are built in extended precision with the center weight
    # defined as the exact complement of the outer ones
    wm = np.full(2 * n + 1, 0.5 / (n + lam), dtype=np.longdouble)
    wm[0] = 1.0 - wm[1:].sum()
    wc = wm.copy()
    wc[0] = wm[0] + (1.0 - alpha ** 2 + beta)
    return pts, wm, wc


def symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)
