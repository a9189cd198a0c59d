"""Radio link-budget math: free-space and two-ray ground power models, and
the inverse free-space formula used to turn a received-power reading into a
distance estimate.

Everything is kept in linear SI units (watts, meters, dimensionless gains).
No dB conversion happens anywhere in this module, and none is offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

FOUR_PI = 4.0 * math.pi


class NonPositiveDistance(ValueError):
    """Propagation distance was zero or negative."""


class NonPositivePower(ValueError):
    """Received power was not a positive finite value."""


class ChannelMode(Enum):
    """Which power-vs-distance law the channel follows."""

    FRIIS = "friis"
    TWO_RAY_CROSSOVER = "tworay"


@dataclass(frozen=True)
class RadioParams:
    """Link-budget constants shared by all nodes of a scenario.

    Attributes:
        tx_power: transmit power in watts.
        tx_gain / rx_gain: linear antenna gains.
        wavelength: carrier wavelength in meters.
        system_loss: loss factor, >= 1, unrelated to propagation itself.
        tx_antenna_height / rx_antenna_height: antenna heights in meters;
            only the two-ray branch uses them.
    """

    tx_power: float
    tx_gain: float = 1.0
    rx_gain: float = 1.0
    wavelength: float = 0.328227
    system_loss: float = 1.0
    tx_antenna_height: float = 1.5
    rx_antenna_height: float = 1.5

    def __post_init__(self) -> None:
        for name in ("tx_power", "tx_gain", "rx_gain", "wavelength",
                     "tx_antenna_height", "rx_antenna_height"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.system_loss >= 1.0:
            raise ValueError("system_loss must be >= 1")


# 914 MHz WaveLAN-style defaults: 281.838 mW, unit gains, 1.5 m antennas.
DEFAULT_RADIO_PARAMS = RadioParams(tx_power=0.28183815)


@dataclass(frozen=True)
class PowerSample:
    """A received-power measurement in watts."""

    rx_power: float

    def __post_init__(self) -> None:
        if not (self.rx_power > 0 and math.isfinite(self.rx_power)):
            raise NonPositivePower(
                f"rx_power must be positive and finite, got {self.rx_power!r}")


def crossover_distance(params: RadioParams) -> float:
    """Distance at which the free-space and two-ray laws predict equal power.

    Equals 4*pi*h_t*h_r / wavelength; with the default parameters this is
    about 86.14 m. Doubling either antenna height doubles it, doubling the
    wavelength halves it.
    """
    return (FOUR_PI * params.tx_antenna_height * params.rx_antenna_height
            / params.wavelength)


def received_power(params: RadioParams, mode: ChannelMode,
                   distance: float) -> PowerSample:
    """Received power at the given transmitter-receiver distance.

    FRIIS follows P_t*G_t*G_r*lambda^2 / ((4*pi)^2 * d^2 * L) at every
    distance. TWO_RAY_CROSSOVER follows the same law up to the crossover
    distance and P_t*G_t*G_r*h_t^2*h_r^2 / (d^4 * L) beyond it; the two
    branches agree at the crossover, so the curve is continuous.

    Raises:
        NonPositiveDistance: if distance <= 0.
    """
    if not distance > 0:
        raise NonPositiveDistance(f"distance must be positive, got {distance!r}")
    p = params
    if (mode is ChannelMode.TWO_RAY_CROSSOVER
            and distance > crossover_distance(p)):
        pr = (p.tx_power * p.tx_gain * p.rx_gain
              * p.tx_antenna_height ** 2 * p.rx_antenna_height ** 2
              / (distance ** 4 * p.system_loss))
    else:
        pr = (p.tx_power * p.tx_gain * p.rx_gain * p.wavelength ** 2
              / (FOUR_PI ** 2 * distance ** 2 * p.system_loss))
    return PowerSample(pr)


def estimate_distance_friis(params: RadioParams, sample: PowerSample) -> float:
    """Distance estimate obtained by inverting the free-space formula.

    The inversion always assumes free space, whatever channel actually
    produced the sample. Over a two-ray channel this overestimates any
    distance beyond the crossover as d^2 / crossover_distance, which is the
    signature the quantification trace is expected to show.

    Raises:
        NonPositivePower: if the sample's power is not positive.
    """
    if not sample.rx_power > 0:
        raise NonPositivePower(
            f"rx_power must be positive, got {sample.rx_power!r}")
    p = params
    return math.sqrt(p.tx_power * p.tx_gain * p.rx_gain * p.wavelength ** 2
                     / (FOUR_PI ** 2 * p.system_loss * sample.rx_power))
