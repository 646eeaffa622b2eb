"""Zero- and single-photon subtraction on photon-number statistics.

Analytic conditional outputs and relative attenuation K(R), alongside a
pulse-level Monte Carlo of the heralded attenuation experiment.
"""

__version__ = "0.1.0"

from .channels import JointDistribution, Reflectance, beamsplitter_joint, loss_channel
from .conditioning import (
    ConditionedOutput,
    LossBudget,
    initial_slope,
    k_click,
    k_closed_form,
    relative_attenuation,
    sps_condition,
    zps_condition,
)
from .detectors import DetectorModel, click_probability, no_click_probability, per_pulse_dark_prob
from .states import (
    PhotonDistribution,
    PureAmplitudes,
    StateMoments,
    attenuate_pure,
    coherent_distribution,
    fock_distribution,
    heralded_single,
    moments,
    smsv_distribution,
    thermal_distribution,
)

__all__ = [
    "ConditionedOutput",
    "DetectorModel",
    "JointDistribution",
    "LossBudget",
    "PhotonDistribution",
    "PureAmplitudes",
    "Reflectance",
    "StateMoments",
    "attenuate_pure",
    "beamsplitter_joint",
    "click_probability",
    "coherent_distribution",
    "fock_distribution",
    "heralded_single",
    "initial_slope",
    "k_click",
    "k_closed_form",
    "loss_channel",
    "moments",
    "no_click_probability",
    "per_pulse_dark_prob",
    "relative_attenuation",
    "smsv_distribution",
    "sps_condition",
    "thermal_distribution",
    "zps_condition",
]
