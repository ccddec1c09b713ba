"""Intra-beam NOMA: SIC decoding order and power-domain split."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

log = logging.getLogger(__name__)

GAIN_FLOOR = 1e-12


@dataclass(frozen=True)
class NomaPolicy:
    """Intra-beam power policy.

    ``ftpa`` gives ``beta_u ~ g_u**-xi``. ``fixed`` uses ``split`` in order
    of increasing gain (weakest user first) and renormalizes when the beam
    holds fewer users than entries.
    """

    name: str = "ftpa"
    xi: float = 1.0
    split: tuple[float, ...] = ()
    strongest_last: bool = True

    def __post_init__(self):
        if self.name not in ("ftpa", "fixed"):
            raise ConfigError("noma_policy", f"unknown policy {self.name!r}")
        if self.name == "ftpa" and self.xi < 0:
            raise ConfigError("noma_xi", "must be >= 0")
        if self.name == "fixed":
            if not self.split or any(b <= 0 for b in self.split):
                raise ConfigError("noma_split", "needs positive entries")


def decoding_order(gains, strongest_last: bool = False) -> np.ndarray:
    """Rank of every user in the beam, 1-based.

    Users are sorted by descending gain with ties on ascending index, so rank
    1 is the strongest user. With ``strongest_last`` the ranks are reversed
    (rank n is the strongest), which is the convention under which the
    interference index set ``O(i) > O(u)`` leaves the strongest user clean.
    """
    g = np.asarray(gains, dtype=float)
    n = len(g)
    if n == 0:
        raise ValueError("empty beam")
    idx = np.lexsort((np.arange(n), -g))
    ranks = np.empty(n, dtype=int)
    ranks[idx] = np.arange(1, n + 1)
    if strongest_last:
        ranks = n + 1 - ranks
    return ranks


def intra_beam_power(gains, policy: NomaPolicy = NomaPolicy()) -> np.ndarray:
    """Power factors ``beta`` summing to one; weaker users never get less."""
    g = np.asarray(gains, dtype=float)
    n = len(g)
    if n == 0:
        raise ValueError("empty beam")
    if n == 1:
        return np.ones(1)
    if policy.name == "ftpa":
        if np.any(g < GAIN_FLOOR):
            log.debug("clamping %d zero gains", int(np.sum(g < GAIN_FLOOR)))
        w = np.maximum(g, GAIN_FLOOR) ** (-policy.xi)
        return w / w.sum()
    split = np.sort(np.asarray(policy.split, dtype=float))[::-1]
    if len(split) < n:
        split = np.concatenate([split, np.full(n - len(split), split[-1])])
    share = split[:n] / split[:n].sum()
    # weakest first gets the largest share
    order = np.lexsort((np.arange(n), g))
    beta = np.empty(n)
    beta[order] = share
    return beta
