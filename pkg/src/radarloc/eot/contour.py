"""Star-convex contour model: a Gaussian process over the radial function.

The vehicle outline is described by the distance f(theta) from the object
center to the contour, evaluated at fixed basis angles in the body frame.
A periodic squared-exponential kernel ties the angles together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameterError, SingularMatrixError


@dataclass(frozen=True)
class GpParams:
    sigma_f: float = 1.0        # prior std of the radial function, m
    sigma_r: float = 0.2        # radius noise std, m
    length_scale: float = math.pi / 4
    tau: float = 0.01           # contour forgetting factor, 1/s
    n_theta: int = 20           # basis point angles
    mean_radius: float = 2.0    # prior mean radius, m
    symmetric: bool = False     # mirror symmetry about the heading axis

    def __post_init__(self):
        if self.sigma_f <= 0 or self.length_scale <= 0:
            raise InvalidParameterError("sigma_f and length_scale must be positive")
        if self.sigma_r < 0 or self.tau < 0:
            raise InvalidParameterError("sigma_r and tau must be nonnegative")
        if self.n_theta < 3:
            raise InvalidParameterError("need at least 3 basis angles")

    def basis_angles(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_theta) / self.n_theta


def _periodic_se(delta, p: GpParams):
    half = np.abs(delta) / 2.0
    return p.sigma_f ** 2 * np.exp(-2.0 * np.sin(half) ** 2 / p.length_scale ** 2)


def gp_kernel(u, v, p: GpParams):
    """Periodic squared-exponential covariance between contour angles.

    With ``symmetric`` set, the radial function is constrained to mirror
    symmetry about the body x-axis (f(theta) = f(-theta), a vehicle's
    left/right symmetry): the kernel becomes the covariance of the
    symmetrized process, so observing one flank informs the other.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if p.symmetric:
        base = 0.5 * (_periodic_se(u - v, p) + _periodic_se(u + v, p))
    else:
        base = _periodic_se(u - v, p)
    return base + p.sigma_r ** 2


def gp_gram(angles: np.ndarray, p: GpParams) -> np.ndarray:
    """Covariance matrix of the radial function at the given angles."""
    angles = np.asarray(angles, dtype=np.float64)
    return gp_kernel(angles[:, None], angles[None, :], p)


def gp_regress(query, basis: np.ndarray, p: GpParams):
    """GP conditional at query angles given function values at basis angles.

    Returns (weights, residual_variance): the predicted radius at a query
    angle is weights @ radii, with residual_variance the leftover kernel
    variance not explained by the basis.
    """
    query = np.atleast_1d(np.asarray(query, dtype=np.float64))
    basis = np.asarray(basis, dtype=np.float64)
    gram = gp_gram(basis, p)
    k_star = gp_kernel(query[:, None], basis[None, :], p)
    try:
        weights = np.linalg.solve(gram, k_star.T).T
    except np.linalg.LinAlgError:
        raise SingularMatrixError("GP Gram matrix is singular") from None
    k_qq = gp_kernel(query, query, p)
    resid = k_qq - np.einsum("ij,ij->i", weights, k_star)
    if query.shape[0] == 1:
        return weights[0], float(resid[0])
    return weights, resid


@dataclass(frozen=True)
class ContourState:
    """Radial contour estimate at the fixed basis angles, with covariance."""

    radii: np.ndarray
    covariance: np.ndarray
    basis_angles: np.ndarray = field(repr=False)

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.covariance, dtype=np.float64)
        angles = np.asarray(self.basis_angles, dtype=np.float64).reshape(-1)
        if cov.shape != (radii.size, radii.size) or angles.size != radii.size:
            raise InvalidParameterError("contour state shapes are inconsistent")
        for arr in (radii, cov, angles):
            arr.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "basis_angles", angles)

    @classmethod
    def from_prior(cls, p: GpParams) -> "ContourState":
        angles = p.basis_angles()
        return cls(np.full(p.n_theta, p.mean_radius), gp_gram(angles, p), angles)


def contour_predict(c: ContourState, dt: float, p: GpParams) -> ContourState:
    """Decay the contour toward its prior with rate tau.

    The deviation from the prior mean radius is shrunk (a contour decaying
    to zero radius would be physically meaningless) and the covariance
    relaxes toward the full prior kernel matrix.
    """
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    decay = math.exp(-p.tau * dt)
    radii = p.mean_radius + decay * (c.radii - p.mean_radius)
    gram = gp_gram(c.basis_angles, p)
    cov = decay ** 2 * c.covariance + (1.0 - decay ** 2) * gram
    return ContourState(radii, cov, c.basis_angles)
