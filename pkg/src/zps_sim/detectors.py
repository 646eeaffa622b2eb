"""Click / no-click response of threshold (non-number-resolving) detectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import PhotonDistribution


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector seen through its channel.

    Attributes
    ----------
    efficiency : float
        Overall probability that an incident photon is registered.
    dark_prob : float
        Probability of a dark click in one pulse window, independent of the
        optical input.
    pnr : bool
        Whether the detector resolves photon number. The no-click outcome is
        the same either way.
    """

    efficiency: float = 1.0
    dark_prob: float = 0.0
    pnr: bool = False

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency {self.efficiency} outside [0, 1]")
        if not 0.0 <= self.dark_prob < 1.0:
            raise ValueError(f"dark_prob {self.dark_prob} outside [0, 1)")

    def no_click_povm(self, cutoff: int) -> np.ndarray:
        """Diagonal of the no-click POVM element, dark counts included."""
        return (1.0 - self.dark_prob) * (1.0 - self.efficiency) ** np.arange(cutoff + 1)


def no_click_probability(dist: PhotonDistribution, det: DetectorModel) -> float:
    """``(1 - dark) * sum_n p_n (1 - eta)^n``."""
    return float(dist.probs @ det.no_click_povm(dist.cutoff))


def click_probability(dist: PhotonDistribution, det: DetectorModel) -> float:
    return 1.0 - no_click_probability(dist, det)


def per_pulse_dark_prob(rate_hz: float, rep_rate_hz: float) -> float:
    """Dark clicks per pulse window from a continuous dark-count rate.

    First-order: ``rate / rep_rate``. Valid while the result is small, which
    holds by orders of magnitude for tens of Hz at 100 MHz.
    """
    if rep_rate_hz <= 0:
        raise ValueError("repetition rate must be positive")
    if rate_hz < 0:
        raise ValueError("dark rate must be nonnegative")
    if rate_hz >= rep_rate_hz:
        raise ValueError("dark rate must be below the repetition rate")
    return rate_hz / rep_rate_hz
