"""Photon-number distributions for the input states and their moments.

Only the diagonal of the density matrix is represented. Every quantity the
simulator reports (mean photon numbers, click rates, relative attenuation)
depends on the diagonal alone, so a probability vector over ``n = 0..cutoff``
is the central state object.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import TruncationError

#: Largest truncated tail mass a constructor accepts.
TAIL_TOLERANCE = 1e-10

_NORM_ATOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """Truncated photon-number distribution ``p_n`` for ``n = 0..cutoff``.

    Parameters
    ----------
    probs : array_like
        Probabilities indexed by photon number. Must be nonnegative and sum
        to one.
    tail_mass : float
        Probability that was discarded above the cutoff before
        renormalization. Zero for states with finite support.
    """

    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a nonempty 1-D vector")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite and nonnegative")
        total = probs.sum()
        if abs(total - 1.0) > _NORM_ATOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_weights(cls, weights, tail_mass: float = 0.0) -> PhotonDistribution:
        """Normalize nonnegative weights into a distribution."""
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise ValueError("weights have zero total mass")
        return cls(w / total, tail_mass=tail_mass)

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    @property
    def n(self) -> np.ndarray:
        """Photon-number index vector."""
        return np.arange(self.probs.size)

    def mean(self) -> float:
        return float(self.n @ self.probs)

    def padded(self, cutoff: int) -> np.ndarray:
        """Probability vector zero-padded (never truncated) to ``cutoff``."""
        if cutoff < self.cutoff:
            raise ValueError("padding cannot shrink the support")
        out = np.zeros(cutoff + 1)
        out[: self.probs.size] = self.probs
        return out

    def __repr__(self):
        head = np.array2string(self.probs[:6], precision=4)
        return f"PhotonDistribution(cutoff={self.cutoff}, probs={head}, tail_mass={self.tail_mass:.2e})"


@dataclass(frozen=True, eq=False)
class PureAmplitudes:
    """Fock amplitudes ``c_n`` of a pure single-mode state."""

    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amps must be a nonempty 1-D vector")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > _NORM_ATOL:
            raise ValueError(f"squared amplitudes sum to {norm!r}, not 1")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def normalized(cls, amps) -> PureAmplitudes:
        a = np.asarray(amps, dtype=complex)
        norm = np.sqrt(np.sum(np.abs(a) ** 2))
        if norm == 0:
            raise ValueError("zero-norm amplitude vector")
        return cls(a / norm)

    def distribution(self) -> PhotonDistribution:
        """Photon-number distribution ``|c_n|^2``."""
        return PhotonDistribution.from_weights(np.abs(self.amps) ** 2)


@dataclass(frozen=True)
class StateMoments:
    mean_n: float
    variance: float
    mandel_q: float


def _truncate(pmf: np.ndarray, tail: float, what: str) -> PhotonDistribution:
    if tail >= TAIL_TOLERANCE:
        raise TruncationError(
            f"{what}: cutoff {pmf.size - 1} leaves tail mass {tail:.3e} >= {TAIL_TOLERANCE:g}"
        )
    return PhotonDistribution(pmf / pmf.sum(), tail_mass=float(max(tail, 0.0)))


def _auto_cutoff(sf, start: int) -> int:
    cutoff = max(start, 2)
    while sf(cutoff) >= 1e-14:
        cutoff += max(1, cutoff // 4)
    return cutoff


def coherent_distribution(mean_n: float, cutoff: int | None = None) -> PhotonDistribution:
    """Poissonian photon statistics of a coherent state with ``|alpha|^2 = mean_n``.

    ``cutoff=None`` picks the smallest convenient cutoff whose tail is below
    1e-14.
    """
    if mean_n < 0:
        raise ValueError("mean_n must be nonnegative")
    if cutoff is None:
        cutoff = _auto_cutoff(lambda c: stats.poisson.sf(c, mean_n),
                              int(mean_n + 10 * math.sqrt(mean_n) + 10))
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    n = np.arange(cutoff + 1)
    pmf = stats.poisson.pmf(n, mean_n) if mean_n > 0 else (n == 0).astype(float)
    tail = float(stats.poisson.sf(cutoff, mean_n)) if mean_n > 0 else 0.0
    return _truncate(pmf, tail, "coherent state")


def thermal_distribution(mean_n: float, cutoff: int | None = None) -> PhotonDistribution:
    """Bose-Einstein statistics ``mu^n / (1 + mu)^(n+1)``."""
    if mean_n < 0:
        raise ValueError("mean_n must be nonnegative")
    ratio = mean_n / (1.0 + mean_n)
    if cutoff is None:
        cutoff = 0 if mean_n == 0 else int(math.ceil(math.log(1e-14) / math.log(ratio)))
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    n = np.arange(cutoff + 1)
    pmf = ratio**n / (1.0 + mean_n)
    tail = ratio ** (cutoff + 1)
    return _truncate(pmf, tail, "thermal state")


def smsv_distribution(pair_prob: float, cutoff: int = 2) -> PhotonDistribution:
    """Weakly squeezed vacuum as a vacuum / photon-pair mixture.

    Multipair terms are dropped: ``p_0 = 1 - pair_prob``, ``p_2 = pair_prob``.
    This is the regime where the relative attenuation follows ``1 - R``.
    """
    if cutoff < 2:
        raise ValueError("squeezed vacuum needs cutoff >= 2")
    if not 0.0 <= pair_prob < 1.0:
        raise ValueError("pair_prob must lie in [0, 1)")
    if pair_prob > 0.1:
        warnings.warn(
            f"pair_prob={pair_prob} is outside the weak-squeezing regime; "
            "multipair emission is not modeled",
            stacklevel=2,
        )
    probs = np.zeros(cutoff + 1)
    probs[0] = 1.0 - pair_prob
    probs[2] = pair_prob
    return PhotonDistribution(probs)


def fock_distribution(n: int, cutoff: int | None = None) -> PhotonDistribution:
    if n < 0:
        raise ValueError("photon number must be nonnegative")
    cutoff = n if cutoff is None else cutoff
    if n > cutoff:
        raise ValueError(f"n={n} exceeds cutoff={cutoff}")
    probs = np.zeros(cutoff + 1)
    probs[n] = 1.0
    return PhotonDistribution(probs)


def heralded_single(beta: float) -> PhotonDistribution:
    """Mixture ``(1 - beta)|0><0| + beta|1><1|`` from a heralded pair source."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return PhotonDistribution([1.0 - beta, beta])


def moments(dist: PhotonDistribution) -> StateMoments:
    """Mean, variance and Mandel Q of a photon-number distribution.

    Q is reported as 0 for the vacuum, where ``variance / mean`` is 0/0.
    """
    n = dist.n
    p = dist.probs
    mean = float(n @ p)
    var = float(((n - mean) ** 2) @ p)
    q = var / mean - 1.0 if mean > 0 else 0.0
    return StateMoments(mean_n=mean, variance=var, mandel_q=q)


def attenuate_pure(state: PureAmplitudes, transmittance: float) -> PureAmplitudes:
    """Noiseless attenuation ``c_n -> t^n c_n`` with ``t = sqrt(T)``, renormalized.

    Relative phases between Fock components are untouched.
    """
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")
    t = math.sqrt(transmittance)
    scaled = state.amps * t ** np.arange(state.amps.size)
    if not np.any(scaled != 0):
        raise ValueError("attenuated state has zero norm")
    return PureAmplitudes.normalized(scaled)
