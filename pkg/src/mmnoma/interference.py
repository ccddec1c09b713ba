"""Link SINR with intra-beam and inter-cell interference, sum rate, cell averages.

``NetworkState`` is a flat snapshot: beam-indexed arrays for powers and
gNB ownership, user-indexed arrays for serving beam, power factor and
decoding rank, and a ``(U, B)`` matrix of beamformed gains ``|h^H w|^2``
where ``h`` is the user's channel toward the beam's gNB.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class NetworkState:
    gains: np.ndarray  # (U, B)
    beam_gnb: np.ndarray  # (B,)
    beam_power: np.ndarray  # (B,) Watts
    serving_beam: np.ndarray  # (U,), -1 for unserved users
    beta: np.ndarray  # (U,)
    order: np.ndarray  # (U,)
    noise: float
    beam_subband: np.ndarray | None = None  # (B,)
    subband_matched: bool = False
    # power radiated toward other cells; defaults to beam_power. Lets idle
    # beams stay silent while their own users still measure the nominal level.
    interferer_power: np.ndarray | None = None

    @property
    def radiated_power(self) -> np.ndarray:
        return self.beam_power if self.interferer_power is None else self.interferer_power

    @property
    def num_users(self) -> int:
        return len(self.serving_beam)

    def served(self) -> np.ndarray:
        return np.flatnonzero(self.serving_beam >= 0)

    def user_gnb(self) -> np.ndarray:
        sb = self.serving_beam
        return np.where(sb >= 0, self.beam_gnb[np.maximum(sb, 0)], -1)

    def interferer_mask(self) -> np.ndarray:
        """``(U, B)`` boolean: beam b is an other-cell interferer of user u."""
        ug = self.user_gnb()
        mask = self.beam_gnb[None, :] != ug[:, None]
        if self.subband_matched and self.beam_subband is not None:
            sb = np.maximum(self.serving_beam, 0)
            mask &= self.beam_subband[None, :] == self.beam_subband[sb][:, None]
        mask[self.serving_beam < 0] = False
        return mask


@dataclass(frozen=True)
class LinkSinr:
    user: int
    beam: int
    gnb: int
    signal: float
    i1: float
    i2: float
    noise: float

    @property
    def gamma(self) -> float:
        return self.signal / (self.i1 + self.i2 + self.noise)


@dataclass
class LinkTable:
    """Vectorized link evaluation; entries of unserved users are zero."""

    signal: np.ndarray
    i1: np.ndarray
    i2: np.ndarray
    noise: float
    served: np.ndarray

    @property
    def sinr(self) -> np.ndarray:
        out = self.signal / (self.i1 + self.i2 + self.noise)
        out[~self.served] = 0.0
        return out


def _own_gain(state: NetworkState) -> np.ndarray:
    sb = np.maximum(state.serving_beam, 0)
    return state.gains[np.arange(state.num_users), sb]


def evaluate_links(state: NetworkState) -> LinkTable:
    served = state.serving_beam >= 0
    sb = np.maximum(state.serving_beam, 0)
    g = _own_gain(state)
    p = state.beam_power[sb]
    # residual co-beam interference from users ranked after u
    same = (state.serving_beam[:, None] == state.serving_beam[None, :]) & served[None, :]
    later = state.order[None, :] > state.order[:, None]
    residual = (same & later) @ state.beta
    signal = np.where(served, p * state.beta * g, 0.0)
    i1 = np.where(served, p * g * residual, 0.0)
    i2 = (state.gains * state.interferer_mask()) @ state.radiated_power
    return LinkTable(signal=signal, i1=i1, i2=i2, noise=state.noise, served=served)


def intra_beam_interference(state: NetworkState, user: int) -> float:
    b = state.serving_beam[user]
    if b < 0:
        return 0.0
    g = state.gains[user, b]
    members = np.flatnonzero(state.serving_beam == b)
    later = [i for i in members if i != user and state.order[i] > state.order[user]]
    return float(state.beam_power[b] * g * np.sum(state.beta[later]))


def inter_cell_interference(state: NetworkState, user: int) -> float:
    if state.serving_beam[user] < 0:
        return 0.0
    mask = state.interferer_mask()[user]
    return float(np.sum(state.radiated_power[mask] * state.gains[user, mask]))


def link_sinr(state: NetworkState, user: int) -> LinkSinr:
    b = int(state.serving_beam[user])
    if b < 0:
        raise ValueError(f"user {user} is not served")
    signal = state.beam_power[b] * state.beta[user] * state.gains[user, b]
    return LinkSinr(
        user=user,
        beam=b,
        gnb=int(state.beam_gnb[b]),
        signal=float(signal),
        i1=intra_beam_interference(state, user),
        i2=inter_cell_interference(state, user),
        noise=state.noise,
    )


def link_bandwidth(bandwidth: float, beams_per_gnb: int, subband_matched: bool) -> float:
    """Per-link bandwidth: beams split the band only in subband mode."""
    return bandwidth / beams_per_gnb if subband_matched else bandwidth


def sum_rate(sinr, bandwidth: float) -> float:
    """Shannon sum rate in bit/s over the given link SINRs (linear)."""
    return float(bandwidth * np.sum(np.log2(1.0 + np.asarray(sinr, dtype=float))))


def avg_sinr_gnb(sinr, user_gnb, gnb: int, users=None) -> float:
    """Mean linear SINR over the served users of ``gnb``.

    ``users`` optionally restricts the average to a subset. Zero when no user
    qualifies, which the agent reads as the low-SINR state.
    """
    sinr = np.asarray(sinr, dtype=float)
    mask = np.asarray(user_gnb) == gnb
    if users is not None:
        sub = np.zeros_like(mask)
        sub[list(users)] = True
        mask &= sub
    if not mask.any():
        log.debug("gNB %d has no users to average", gnb)
        return 0.0
    return float(sinr[mask].mean())
