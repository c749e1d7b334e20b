"""Stationary kernels on objective space with analytic derivatives.

Conventions: ``grad(yi, yl)`` is the derivative w.r.t. the *second* argument
and ``hess(yi, yl)`` the second derivative w.r.t. the second argument twice.
For a stationary kernel the mixed block d2k/dyi dyl is ``-hess``.

All functions are vectorised over leading axes, so ``yi`` of shape (m, k)
against ``yl`` of shape (k,) (or any broadcastable pair) works.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

COINCIDENT = 1e-12  # Laplace: below this distance derivatives are taken as zero


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


class UnsupportedKernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    theta: float

    def __post_init__(self):
        fam = self.family if isinstance(self.family, Family) else Family(str(self.family).lower())
        object.__setattr__(self, "family", fam)
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise ValueError(f"length-scale theta must be positive, got {self.theta}")

    @classmethod
    def gaussian(cls, theta: float) -> "KernelSpec":
        return cls(Family.GAUSSIAN, float(theta))

    @classmethod
    def laplace(cls, theta: float) -> "KernelSpec":
        return cls(Family.LAPLACE, float(theta))

    def __str__(self) -> str:
        return f"{self.family.value}(theta={self.theta:g})"


@dataclass(frozen=True)
class SpectralMoments:
    C: np.ndarray
    m2: float
    m4: float
    sigma_min_C: float


def _diff(yi, yl):
    yi, yl = np.asarray(yi, dtype=float), np.asarray(yl, dtype=float)
    if yi.shape[-1] != yl.shape[-1]:
        raise ValueError(f"dimension mismatch: {yi.shape[-1]} vs {yl.shape[-1]}")
    return yi - yl


def kernel_value(spec: KernelSpec, y, y2):
    d = _diff(y, y2)
    if spec.family is Family.GAUSSIAN:
        return np.exp(-spec.theta * np.sum(d * d, axis=-1))
    return np.exp(-spec.theta * np.linalg.norm(d, axis=-1))


def kernel_grad(spec: KernelSpec, yi, yl):
    """Gradient of k(yi, yl) with respect to ``yl``."""
    d = _diff(yi, yl)
    if spec.family is Family.GAUSSIAN:
        k = np.exp(-spec.theta * np.sum(d * d, axis=-1))
        return 2.0 * spec.theta * k[..., None] * d
    r = np.linalg.norm(d, axis=-1)
    safe = r >= COINCIDENT
    r_ = np.where(safe, r, 1.0)
    k = np.exp(-spec.theta * r)
    return np.where(safe[..., None], (spec.theta * k / r_)[..., None] * d, 0.0)


def kernel_hess(spec: KernelSpec, yi, yl):
    """Second derivative of k(yi, yl) with respect to ``yl`` (shape (..., k, k))."""
    d = _diff(yi, yl)
    dim = d.shape[-1]
    eye = np.eye(dim)
    outer = d[..., :, None] * d[..., None, :]
    th = spec.theta
    if spec.family is Family.GAUSSIAN:
        k = np.exp(-th * np.sum(d * d, axis=-1))[..., None, None]
        return 2.0 * th * k * (2.0 * th * outer - eye)
    r = np.linalg.norm(d, axis=-1)
    safe = r >= COINCIDENT
    r_ = np.where(safe, r, 1.0)[..., None, None]
    k = np.exp(-th * r)[..., None, None]
    uu = outer / r_**2
    H = th * k * (th * uu - (eye - uu) / r_)
    return np.where(safe[..., None, None], H, 0.0)


def kernel_mixed_hess(spec: KernelSpec, yi, yl):
    """d2 k(yi, yl) / dyi dyl."""
    return -kernel_hess(spec, yi, yl)


def spectral_moments(spec: KernelSpec, k: int) -> SpectralMoments:
    """Moments of the spectral measure; the Gaussian's is N(0, 2*theta*I)."""
    if spec.family is not Family.GAUSSIAN:
        raise UnsupportedKernelError(
            "the Laplace kernel's spectral measure (multivariate Cauchy) has a divergent "
            "second moment E|w|^2, so C, m2 and m4 do not exist"
        )
    s2 = 2.0 * spec.theta
    C = s2 * np.eye(k)
    return SpectralMoments(C=C, m2=float(np.trace(C)), m4=s2 * s2 * k * (k + 2), sigma_min_C=s2)
