"""Uniform inter-beam power allocation with SINR-priority association."""

from __future__ import annotations

import numpy as np

from .phy import dbm_to_watt


def upa_powers(max_power_dbm: float, num_beams: int) -> np.ndarray:
    """Equal linear-domain split of the cell power, in Watts per beam."""
    if num_beams < 1:
        return np.zeros(0)
    return np.full(num_beams, float(dbm_to_watt(max_power_dbm)) / num_beams)


def sinr_priority_association(sinr_estimates) -> int:
    """Index of the best SINR estimate; lowest gNB id wins ties."""
    return int(np.argmax(np.asarray(sinr_estimates, dtype=float)))
