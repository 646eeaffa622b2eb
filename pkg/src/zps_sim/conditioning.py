"""Exact conditional outputs of zero- and single-photon subtraction.

The relative attenuation ``K(R)`` compares the heralded mean photon number in
the transmitted mode with ordinary attenuation, ``(1 - R) <n>_in``. For an
input with generating function ``G(s) = sum_n p_n s^n`` and a herald that
registers each reflected photon with efficiency ``eta``, the no-click
conditional mean is ``(1 - R) G'(s) / G(s)`` with ``s = 1 - R eta``, so

    K = G'(s) / (G(s) <n>_in).

Written this way K stays finite at ``R = 1`` where the ratio of means is 0/0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import Reflectance, _as_reflectance, beamsplitter_joint, binomial_matrix, loss_channel
from .detectors import DetectorModel
from .errors import DegenerateEstimateError, ImpossibleConditionError
from .states import PhotonDistribution, moments

STATE_KINDS_WITH_CLOSED_FORM = ("coherent", "smsv", "heralded")


@dataclass(frozen=True)
class LossBudget:
    """Transmittances before the beamsplitter and effective detector efficiencies.

    ``kappa_pdc`` and ``kappa_f`` act on the input mode; ``eta1`` covers the
    reflected (heralding) channel and ``eta2`` the transmitted one.
    """

    kappa_pdc: float = 1.0
    kappa_f: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0

    def __post_init__(self):
        for name in ("kappa_pdc", "kappa_f", "eta1", "eta2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def kappa(self) -> float:
        """Total input transmittance."""
        return self.kappa_pdc * self.kappa_f

    @property
    def overall_herald_efficiency(self) -> float:
        return self.kappa * self.eta1


@dataclass(frozen=True)
class ConditionedOutput:
    """Transmitted-mode state after a heralding outcome at the reflected port."""

    dist: PhotonDistribution
    herald_prob: float
    mean_out: float
    K: float


def _require_mean(dist: PhotonDistribution) -> float:
    mean = dist.mean()
    if not mean > 0:
        raise ValueError("relative attenuation is undefined for a zero-mean input")
    return mean


def k_from_generating_function(dist: PhotonDistribution, x: float) -> float:
    """Lossless ZPS relative attenuation of ``dist`` at reflectance ``x``.

    Also equals the K of a lossy setup once ``x`` is the effective
    reflectance ``kappa * R * eta1``.
    """
    mean = _require_mean(dist)
    s = 1.0 - x
    n = dist.n
    p = dist.probs
    norm = float(p @ s**n)
    if not norm > 0:
        raise ImpossibleConditionError("no-click herald has zero probability")
    deriv = float((n[1:] * p[1:]) @ s ** (n[1:] - 1))
    return deriv / (norm * mean)


def _condition(dist: PhotonDistribution, R: Reflectance, weights: np.ndarray):
    joint = beamsplitter_joint(dist, R)
    unnorm = weights @ joint.probs
    herald_prob = float(unnorm.sum())
    if not herald_prob > 0:
        raise ImpossibleConditionError("herald outcome has zero probability")
    out = PhotonDistribution.from_weights(unnorm)
    return out, herald_prob


def zps_condition(dist: PhotonDistribution, R, herald: DetectorModel = DetectorModel()) -> ConditionedOutput:
    """Condition the transmitted port on a no-click at the reflected port.

    The dark-count factor scales ``herald_prob`` but cancels in the
    conditional state.
    """
    R = _as_reflectance(R)
    out, herald_prob = _condition(dist, R, herald.no_click_povm(dist.cutoff))
    K = k_from_generating_function(dist, R.R * herald.efficiency)
    return ConditionedOutput(dist=out, herald_prob=herald_prob, mean_out=out.mean(), K=K)


def sps_condition(
    dist: PhotonDistribution,
    R,
    herald: DetectorModel = DetectorModel(),
    exact_one: bool = True,
) -> ConditionedOutput:
    """Condition the transmitted port on a photon detection at the reflected port.

    With ``exact_one`` the herald is an idealized number-resolving detector
    firing on exactly one registered count (one photon and no dark click, or
    a dark click and no photon). Otherwise any click heralds. K uses the same
    ordinary-attenuation reference ``(1 - R) <n>_in`` as ZPS.
    """
    R = _as_reflectance(R)
    if R.R == 1.0:
        raise ValueError("K is undefined at R = 1 for photon subtraction")
    mean_in = _require_mean(dist)
    detected = binomial_matrix(dist.cutoff, herald.efficiency)  # [k, j]
    d = herald.dark_prob
    if exact_one:
        weights = detected[:, 1] * (1.0 - d) + detected[:, 0] * d
    else:
        weights = 1.0 - (1.0 - d) * detected[:, 0]
    out, herald_prob = _condition(dist, R, weights)
    mean_out = out.mean()
    return ConditionedOutput(dist=out, herald_prob=herald_prob, mean_out=mean_out,
                             K=mean_out / (R.T * mean_in))


def relative_attenuation(
    dist_at_source: PhotonDistribution,
    R,
    budget: LossBudget = LossBudget(),
    input_transmittance: float | None = None,
) -> float:
    """K of the full lossy setup.

    The source state passes a loss channel (``budget.kappa`` unless
    ``input_transmittance`` is given), then the beamsplitter, and is
    heralded on no-click with efficiency ``budget.eta1``.
    """
    kappa = budget.kappa if input_transmittance is None else input_transmittance
    at_vbs = loss_channel(dist_at_source, kappa)
    return zps_condition(at_vbs, R, DetectorModel(efficiency=budget.eta1)).K


def k_closed_form(
    state_kind: str,
    R: float,
    beta: float | None = None,
    kappa_pdc: float = 1.0,
    kappa_f: float = 1.0,
    eta1: float = 1.0,
) -> float:
    """Closed-form K for coherent, weakly squeezed and heralded single-photon inputs.

    The squeezed-vacuum form is first order in the pair probability.
    """
    x = kappa_pdc * kappa_f * R * eta1
    if state_kind == "coherent":
        return 1.0
    if state_kind == "smsv":
        return 1.0 - x
    if state_kind == "heralded":
        if beta is None:
            raise ValueError("heralded closed form needs beta")
        denom = 1.0 - beta * x
        if denom <= 0:
            raise ValueError("closed-form denominator is not positive")
        return 1.0 / denom
    raise ValueError(f"no closed form for state kind {state_kind!r}")


def k_click(dist: PhotonDistribution, R: float, kappa: float, eta1: float, eta2: float) -> float:
    """Relative attenuation as measured with a click detector in the transmitted port.

    Ratio of the D2 click probability given a D1 no-click to the
    unconditioned D2 click probability. Each source photon reaches D1 with
    probability ``kappa R eta1`` and D2 with ``kappa (1 - R) eta2``.
    """
    a = kappa * R * eta1
    b = kappa * (1.0 - R) * eta2
    n = dist.n
    p = dist.probs
    nc1 = float(p @ (1.0 - a) ** n)
    # 1 - (1 - b)^n without cancellation for small b
    c2 = float(p @ -np.expm1(n * np.log1p(-b))) if b < 1 else float(p[1:].sum())
    if a < 1:
        frac = b / (1.0 - a)
        tail = -np.expm1(n * np.log1p(-frac)) if frac < 1 else (n > 0).astype(float)
        joint = float(p @ ((1.0 - a) ** n * tail))
    else:
        joint = float(p @ ((1.0 - a) ** n - (1.0 - a - b) ** n))
    if not nc1 > 0 or not c2 > 0:
        raise DegenerateEstimateError("click-detector K has a vanishing denominator")
    return joint / (nc1 * c2)


def initial_slope(dist: PhotonDistribution) -> float:
    """dK/dR at R = 0 for a lossless ideal herald, which is ``-Q``."""
    _require_mean(dist)
    return -moments(dist).mandel_q


def finite_difference_slope(dist: PhotonDistribution, h: float = 1e-4) -> float:
    """Forward-difference estimate of dK/dR at R = 0 from the conditional state."""
    return (zps_condition(dist, h).K - zps_condition(dist, 0.0).K) / h
