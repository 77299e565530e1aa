"""RF link budget chain (FSPL -> EIRP -> C/N0 -> Eb/N0 -> margin) and link delay.

Everything is in dB/dBW except distances (km), frequency (Hz), bitrate (bit/s).
Losses other than free-space spreading are neglected unless given in
``misc_losses``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s
BOLTZMANN_DB = 228.601  # -10 log10(k), dBW/(K Hz)


@dataclass(frozen=True)
class LinkSpec:
    frequency: float
    bandwidth: float
    bitrate: float
    required_ebn0: float
    tx_power: float
    tx_obo: float
    tx_gain: float
    rx_g_over_t: float
    misc_losses: float = 0.0

    def __post_init__(self):
        for name in ("frequency", "bandwidth", "bitrate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def eirp(self) -> float:
        return self.tx_power - self.tx_obo + self.tx_gain


@dataclass(frozen=True)
class LinkBudgetReport:
    fspl: float
    eirp: float
    cn0: float
    ebn0: float
    margin: float


# L1 ground->satellite, L2 satellite->ground, L3 satellite<->satellite.
# L1/L2 share one parameter set; L3 only changes the carrier.
L1 = LinkSpec(
    frequency=2.0e9, bandwidth=6.0e6, bitrate=10.0e6, required_ebn0=10.0,
    tx_power=17.0, tx_obo=6.0, tx_gain=60.0, rx_g_over_t=10.0,
)
L2 = L1
L3 = replace(L1, frequency=2.2e9, bandwidth=5.0e6)

PRESETS = {"L1": L1, "L2": L2, "L3": L3, "G2S": L1, "S2G": L2, "S2S": L3}


def fspl(distance: float, frequency: float) -> float:
    if not distance > 0 or not frequency > 0:
        raise ValueError("distance and frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance * 1000.0 * frequency / SPEED_OF_LIGHT)


def link_budget(spec: LinkSpec, distance: float) -> LinkBudgetReport:
    loss = fspl(distance, spec.frequency)
    eirp = spec.eirp
    cn0 = eirp - loss - spec.misc_losses + spec.rx_g_over_t + BOLTZMANN_DB
    ebn0 = cn0 - 10.0 * math.log10(spec.bitrate)
    return LinkBudgetReport(loss, eirp, cn0, ebn0, ebn0 - spec.required_ebn0)


def margin_vs_bitrate(spec: LinkSpec, distance: float, bitrates: Sequence[float]) -> list[tuple[float, float]]:
    if len(bitrates) == 0:
        raise ValueError("bitrate sweep is empty")
    return [(float(b), link_budget(replace(spec, bitrate=b), distance).margin) for b in bitrates]


def margin_grid(spec: LinkSpec, powers: Sequence[float], distances: Sequence[float]) -> np.ndarray:
    """Margin in dB with rows indexed by Tx power and columns by distance."""
    if len(powers) == 0 or len(distances) == 0:
        raise ValueError("grid axes must be nonempty")
    grid = np.empty((len(powers), len(distances)))
    for i, p in enumerate(powers):
        s = replace(spec, tx_power=p)
        for j, d in enumerate(distances):
            grid[i, j] = link_budget(s, d).margin
    return grid


def transmission_delay(payload: float, bitrate: float, distance: float) -> float:
    """Serialization time plus one-way light time, in seconds."""
    if not payload > 0 or not bitrate > 0 or not distance > 0:
        raise ValueError("payload, bitrate and distance must be positive")
    return payload / bitrate + distance * 1000.0 / SPEED_OF_LIGHT
