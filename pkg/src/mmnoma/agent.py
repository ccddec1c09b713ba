"""Per-gNB tabular Q-learning for joint association and beam power, plus the UE side."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .phy import dbm_to_watt

log = logging.getLogger(__name__)

S0, S1 = 0, 1
NUM_STATES = 2


@dataclass(frozen=True)
class AgentConfig:
    learning_rate: float = 0.5
    discount: float = 0.9
    exploration: float = 0.1
    exploration_horizon: int = 2000
    sinr_threshold_db: float = 20.0
    power_levels_dbm: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0)
    max_tx_power_dbm: float = 28.0
    reward_scope: str = "intersection"

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate", "must be in (0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError("discount", "must be in [0, 1)")
        if not 0.0 <= self.exploration <= 1.0:
            raise ConfigError("exploration", "must be in [0, 1]")
        if self.exploration_horizon < 0:
            raise ConfigError("exploration_horizon", "must be >= 0")
        levels = list(self.power_levels_dbm)
        if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError("power_levels", "must be non-empty and strictly increasing")
        if self.reward_scope not in ("intersection", "all"):
            raise ConfigError("reward_scope", "must be 'intersection' or 'all'")


@dataclass(frozen=True)
class ActionVector:
    delta: tuple[int, ...]
    powers: tuple[int, ...]


@dataclass(frozen=True)
class ActionSpace:
    """Mixed-radix index: association bits most significant, then power digits."""

    num_int_users: int
    num_beams: int
    num_levels: int

    @property
    def size(self) -> int:
        return 2 ** self.num_int_users * self.num_levels ** self.num_beams

    def encode(self, a: ActionVector) -> int:
        if len(a.delta) != self.num_int_users or len(a.powers) != self.num_beams:
            raise ValueError("action shape does not match the action space")
        idx = 0
        for bit in a.delta:
            if bit not in (0, 1):
                raise ValueError(f"association bit {bit} is not binary")
            idx = idx * 2 + bit
        for p in a.powers:
            if not 0 <= p < self.num_levels:
                raise ValueError(f"power index {p} out of range")
            idx = idx * self.num_levels + p
        return idx

    def decode(self, index: int) -> ActionVector:
        if not 0 <= index < self.size:
            raise IndexError(f"action index {index} outside [0, {self.size})")
        powers = []
        for _ in range(self.num_beams):
            index, p = divmod(index, self.num_levels)
            powers.append(p)
        delta = []
        for _ in range(self.num_int_users):
            index, b = divmod(index, 2)
            delta.append(b)
        return ActionVector(delta=tuple(reversed(delta)), powers=tuple(reversed(powers)))


def observe_state(avg_sinr_db: float, threshold_db: float) -> int:
    return S0 if avg_sinr_db >= threshold_db else S1


def compute_reward(avg_sinr_db: float, threshold_db: float) -> int:
    return 1 if avg_sinr_db >= threshold_db else -1


def q_update(
    q: np.ndarray,
    s: int,
    a: int,
    reward: float,
    s_next: int,
    alpha: float,
    gamma: float,
    allowed: np.ndarray | None = None,
) -> np.ndarray:
    """One temporal-difference step on ``q[s, a]``, in place."""
    row = q[s_next] if allowed is None else q[s_next, allowed]
    q[s, a] += alpha * (reward + gamma * row.max() - q[s, a])
    return q


def select_action(
    q: np.ndarray,
    s: int,
    tti: int,
    cfg: AgentConfig,
    rng: np.random.Generator,
    allowed: np.ndarray | None = None,
) -> int:
    """Epsilon-greedy during the exploration horizon, greedy after it.

    Greedy ties are broken uniformly at random. ``allowed`` masks actions out.
    """
    candidates = np.arange(q.shape[1]) if allowed is None else np.flatnonzero(allowed)
    if tti <= cfg.exploration_horizon and rng.random() <= cfg.exploration:
        return int(candidates[rng.integers(len(candidates))])
    row = q[s, candidates]
    best = candidates[row == row.max()]
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


def power_cap_mask(space: ActionSpace, cfg: AgentConfig) -> np.ndarray | None:
    """Actions whose beam powers sum above the per-gNB cap; ``None`` if all fit."""
    levels_w = dbm_to_watt(cfg.power_levels_dbm)
    cap = float(dbm_to_watt(cfg.max_tx_power_dbm))
    if space.num_beams * levels_w[-1] <= cap:
        return None
    allowed = np.array(
        [sum(levels_w[p] for p in space.decode(i).powers) <= cap * (1 + 1e-12) for i in range(space.size)]
    )
    log.info("masking %d actions above the %.1f dBm cap", int((~allowed).sum()), cfg.max_tx_power_dbm)
    return allowed


@dataclass
class AgentStep:
    state: int
    action: int
    reward: int | None
    avg_sinr_db: float
    delta: dict[int, int]
    powers_dbm: tuple[float, ...]


@dataclass
class GnbAgent:
    """Q-learning agent of one gNB.

    ``int_users`` lists the intersection users this gNB decides on, in the
    order of the association bits.
    """

    gnb: int
    int_users: tuple[int, ...]
    num_beams: int
    cfg: AgentConfig
    rng: np.random.Generator
    state: int = S1
    last_action: int | None = None
    q: np.ndarray = field(init=False)
    space: ActionSpace = field(init=False)

    def __post_init__(self):
        self.space = ActionSpace(len(self.int_users), self.num_beams, len(self.cfg.power_levels_dbm))
        self.q = np.zeros((NUM_STATES, self.space.size))
        self._allowed = power_cap_mask(self.space, self.cfg)

    def step(self, avg_sinr_lin: float, tti: int) -> AgentStep:
        """Reward, Q update, state transition and action selection for one interval."""
        avg_db = 10.0 * np.log10(avg_sinr_lin) if avg_sinr_lin > 0 else -np.inf
        th = self.cfg.sinr_threshold_db
        reward = None
        s_next = observe_state(avg_db, th)
        if self.last_action is not None:
            reward = compute_reward(avg_db, th)
            q_update(
                self.q,
                self.state,
                self.last_action,
                reward,
                s_next,
                self.cfg.learning_rate,
                self.cfg.discount,
                self._allowed,
            )
        self.state = s_next
        action = select_action(self.q, s_next, tti, self.cfg, self.rng, self._allowed)
        self.last_action = action
        a = self.space.decode(action)
        return AgentStep(
            state=s_next,
            action=action,
            reward=reward,
            avg_sinr_db=float(avg_db),
            delta=dict(zip(self.int_users, a.delta)),
            powers_dbm=tuple(self.cfg.power_levels_dbm[p] for p in a.powers),
        )


def priority_list(sinr_estimates) -> list[int]:
    """gNBs ranked by descending SINR estimate, ties on lower id."""
    est = np.asarray(sinr_estimates, dtype=float)
    return [int(j) for j in np.lexsort((np.arange(len(est)), -est))]


def ue_associate(priority: list[int], proposals: dict[int, int]) -> int:
    """Highest-priority gNB among those proposing; list head if none propose.

    ``proposals`` maps gNB to its association bit for this UE. gNBs that do
    not decide on this UE are treated as declining.
    """
    for j in priority:
        if proposals.get(j, 0) == 1:
            return j
    return priority[0]
