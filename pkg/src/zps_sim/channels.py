"""Loss channels and the beamsplitter acting on photon-number statistics.

For a diagonal input every photon is routed independently, so a beamsplitter
with reflectance R sends ``k`` of ``n`` photons to the reflected port with
binomial probability. This is exact for counting statistics; off-diagonal
coherences are not tracked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .states import PhotonDistribution

# Above this photon number binomial coefficients are formed in log space.
_EXACT_COMB_MAX = 60


@dataclass(frozen=True)
class Reflectance:
    R: float

    def __post_init__(self):
        if not 0.0 <= self.R <= 1.0:
            raise ValueError(f"reflectance {self.R} outside [0, 1]")

    @property
    def T(self) -> float:
        return 1.0 - self.R


def _as_reflectance(R) -> Reflectance:
    return R if isinstance(R, Reflectance) else Reflectance(float(R))


def binomial_matrix(cutoff: int, p: float) -> np.ndarray:
    """Lower-triangular ``B[n, k] = C(n, k) p^k (1 - p)^(n - k)``.

    Row ``n`` is the distribution of how many of ``n`` photons survive a
    channel that keeps each one with probability ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    size = cutoff + 1
    B = np.zeros((size, size))
    small = min(cutoff, _EXACT_COMB_MAX)
    for n in range(small + 1):
        k = np.arange(n + 1)
        coeffs = np.array([math.comb(n, j) for j in k], dtype=float)
        B[n, : n + 1] = coeffs * p**k * (1.0 - p) ** (n - k)
    if cutoff > _EXACT_COMB_MAX:
        n, k = np.tril_indices(size)
        big = n > _EXACT_COMB_MAX
        n, k = n[big], k[big]
        log_c = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        B[n, k] = np.exp(log_c + xlogy(k, p) + xlog1py(n - k, -p))
    return B


def loss_channel(dist: PhotonDistribution, transmittance: float) -> PhotonDistribution:
    """Pure-loss channel: each photon survives with probability ``transmittance``."""
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance {transmittance} outside [0, 1]")
    if transmittance == 1.0:
        return dist
    out = dist.probs @ binomial_matrix(dist.cutoff, transmittance)
    return PhotonDistribution(out / out.sum(), tail_mass=dist.tail_mass)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint photon counts ``P[k, m]`` in the reflected (k) and transmitted (m) ports."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("joint distribution must be a square matrix")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("joint distribution must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def cutoff(self) -> int:
        return self.probs.shape[0] - 1

    def reflected(self) -> PhotonDistribution:
        return PhotonDistribution.from_weights(self.probs.sum(axis=1))

    def transmitted(self) -> PhotonDistribution:
        return PhotonDistribution.from_weights(self.probs.sum(axis=0))


def beamsplitter_joint(dist: PhotonDistribution, R) -> JointDistribution:
    """Route an input photon-number distribution through a beamsplitter.

    ``P[k, n - k] = p_n C(n, k) R^k (1 - R)^(n - k)``.
    """
    refl = _as_reflectance(R)
    size = dist.cutoff + 1
    weighted = dist.probs[:, None] * binomial_matrix(dist.cutoff, refl.R)  # [n, k]
    n, k = np.tril_indices(size)
    P = np.zeros((size, size))
    P[k, n - k] = weighted[n, k]
    return JointDistribution(P / P.sum())
