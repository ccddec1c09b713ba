"""One seeded run of the TTI loop for either algorithm."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import interference as itf
from .agent import AgentConfig, GnbAgent, priority_list, ue_associate
from .baseline import sinr_priority_association, upa_powers
from .deployment import (
    ClusterAssignment,
    PcpConfig,
    Topology,
    TopologyConfig,
    cluster_gnb,
    draw_topology,
    find_intersection_users,
    link_geometry,
    strongest_gnb,
)
from .errors import ConfigError
from .mac import MacConfig, MacCounters, MetricsRecord, UserMac, account_metrics, generate_traffic
from .noma import NomaPolicy, decoding_order, intra_beam_power
from .phy import PhyConfig, dbm_to_watt, draw_complex_gain, pathloss_amplitude

log = logging.getLogger(__name__)

ALGORITHMS = ("qlearning", "upa")


@dataclass(frozen=True)
class ScenarioConfig:
    phy: PhyConfig = field(default_factory=PhyConfig)
    pcp: PcpConfig = field(default_factory=lambda: PcpConfig(fixed_total_users=9))
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    noma: NomaPolicy = field(default_factory=NomaPolicy)
    beams_per_gnb: int = 2
    intersection_users: int | None = 2
    intersection_margin_db: float = math.inf
    subband_matched: bool = False
    idle_beams_silent: bool = True
    num_ttis: int = 4000
    kmeans_max_iter: int = 100

    def __post_init__(self):
        if self.beams_per_gnb < 1:
            raise ConfigError("beams_per_gnb", "must be >= 1")
        if self.num_ttis < 1:
            raise ConfigError("num_ttis", "must be >= 1")
        if self.intersection_users is not None and self.intersection_users < 0:
            raise ConfigError("intersection_users", "must be >= 0")


@dataclass
class Scenario:
    """Everything about a run that depends on the seed only."""

    seed: int
    cfg: ScenarioConfig
    topology: Topology
    distance: np.ndarray  # (U, J)
    aod: np.ndarray  # (U, J)
    alpha: np.ndarray  # (U, J)
    channels: np.ndarray  # (U, J, M)
    beam_gain: np.ndarray  # (U, J, U): user u, gNB j, beam steered at user h
    home: np.ndarray  # (U,)
    intersection: dict[int, set[int]]

    @property
    def num_users(self) -> int:
        return self.topology.num_users

    @property
    def num_gnbs(self) -> int:
        return self.topology.num_gnbs

    @property
    def int_users(self) -> list[int]:
        return sorted(set().union(*self.intersection.values())) if self.intersection else []

    @property
    def channel_norm_sq(self) -> np.ndarray:
        return np.sum(np.abs(self.channels) ** 2, axis=2)


def seed_streams(seed: int):
    """Independent generators for topology, channel, traffic and agents."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]


def build_scenario(seed: int, cfg: ScenarioConfig) -> Scenario:
    topo_rng, chan_rng, _, _ = seed_streams(seed)
    topology = draw_topology(topo_rng, cfg.pcp, cfg.topology)
    dist, aod = link_geometry(topology)
    phy = cfg.phy
    alpha = draw_complex_gain(chan_rng, phy, size=dist.shape)
    amp = pathloss_amplitude(dist, phy) * alpha
    m = np.arange(phy.num_antennas)
    steer = np.exp(-1j * 2 * np.pi * phy.antenna_spacing_ratio * np.sin(aod)[..., None] * m)
    channels = steer * amp[..., None]
    # beam candidates: matched weights toward every user's AoD, per gNB
    weights = np.transpose(steer, (1, 0, 2)) / math.sqrt(phy.num_antennas)  # (J, U, M)
    beam_gain = np.abs(np.einsum("ujm,jhm->ujh", channels.conj(), weights)) ** 2
    norm_sq = np.sum(np.abs(channels) ** 2, axis=2)
    home = strongest_gnb(norm_sq)
    inter = find_intersection_users(norm_sq, cfg.intersection_margin_db, cfg.intersection_users)
    return Scenario(
        seed=seed,
        cfg=cfg,
        topology=topology,
        distance=dist,
        aod=aod,
        alpha=alpha,
        channels=channels,
        beam_gain=beam_gain,
        home=home,
        intersection=inter,
    )


@dataclass
class Layout:
    """Beams, NOMA factors and gains for one association of users to gNBs."""

    assoc: tuple[int, ...]
    clusters: list[ClusterAssignment]
    beam_gnb: np.ndarray
    beam_index: np.ndarray  # beam position k within its gNB
    gains: np.ndarray  # (U, B)
    serving_beam: np.ndarray
    beta: np.ndarray
    order: np.ndarray
    gnb_beams: list[list[int]]  # global beam ids per gNB


def build_layout(scn: Scenario, assoc: tuple[int, ...]) -> Layout:
    cfg = scn.cfg
    assoc_arr = np.asarray(assoc)
    clusters, beam_gnb, beam_index, heads, gnb_beams = [], [], [], [], []
    serving = np.full(scn.num_users, -1)
    for j in range(scn.num_gnbs):
        users = np.flatnonzero(assoc_arr == j)
        rng = np.random.default_rng([scn.seed, j, *users.tolist()])
        ca = cluster_gnb(j, users, scn.channels[:, j, :], scn.aod[:, j], cfg.beams_per_gnb, rng, cfg.kmeans_max_iter)
        clusters.append(ca)
        ids = []
        for k, (members, head) in enumerate(zip(ca.members, ca.heads)):
            b = len(beam_gnb)
            ids.append(b)
            beam_gnb.append(j)
            beam_index.append(k)
            heads.append(head)
            serving[members] = b
        gnb_beams.append(ids)
    beam_gnb = np.asarray(beam_gnb, dtype=int)
    heads = np.asarray(heads, dtype=int)
    gains = scn.beam_gain[:, beam_gnb, heads] if len(heads) else np.zeros((scn.num_users, 0))
    beta = np.zeros(scn.num_users)
    order = np.zeros(scn.num_users, dtype=int)
    for b in range(len(beam_gnb)):
        members = np.flatnonzero(serving == b)
        g = gains[members, b]
        beta[members] = intra_beam_power(g, cfg.noma)
        order[members] = decoding_order(g, cfg.noma.strongest_last)
    return Layout(
        assoc=tuple(assoc),
        clusters=clusters,
        beam_gnb=beam_gnb,
        beam_index=np.asarray(beam_index, dtype=int),
        gains=gains,
        serving_beam=serving,
        beta=beta,
        order=order,
        gnb_beams=gnb_beams,
    )


@dataclass
class RunResult:
    seed: int
    algorithm: str
    offered_load_mbps: float
    num_users: int
    metrics: MetricsRecord
    rewards: np.ndarray | None  # (T, J); NaN where no reward was observed
    q_abs_max: float
    num_actions: int
    agent_trace: list = field(default_factory=list)
    link_trace: list = field(default_factory=list)
    packet_log: list | None = None
    feedback_log: list | None = None
    final_assoc: tuple = ()
    final_layout: Layout | None = None
    sweep: str = ""


class Simulation:
    """TTI loop over one scenario, one algorithm and one offered load."""

    def __init__(
        self,
        scenario: Scenario,
        algorithm: str,
        offered_load_mbps: float,
        traces: bool = False,
        packet_log: bool = False,
        check_invariants: bool = False,
    ):
        if algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"unknown algorithm {algorithm!r}")
        self.scn = scenario
        self.cfg = scenario.cfg
        self.algorithm = algorithm
        self.load_mbps = offered_load_mbps
        self.traces = traces
        self.check = check_invariants
        self._layouts: dict[tuple, Layout] = {}
        self.counters = MacCounters()
        self._packet_log = [] if packet_log else None
        self.users = [UserMac(u, self.cfg.mac, self.counters, self._packet_log) for u in range(scenario.num_users)]
        if check_invariants:
            self._feedback_log: list = []
            for um in self.users:
                um.feedback_log = self._feedback_log
        self.bandwidth = itf.link_bandwidth(self.cfg.phy.bandwidth, self.cfg.beams_per_gnb, self.cfg.subband_matched)
        self.noise = self.cfg.phy.noise
        _, _, traffic_rng, agent_rng = seed_streams(scenario.seed)
        self.arrivals = generate_traffic(
            traffic_rng, offered_load_mbps * 1e6, scenario.num_users, self.cfg.num_ttis, self.cfg.mac
        )
        self.agents = []
        if algorithm == "qlearning":
            for j in range(scenario.num_gnbs):
                self.agents.append(
                    GnbAgent(
                        gnb=j,
                        int_users=tuple(sorted(scenario.intersection[j])),
                        num_beams=self.cfg.beams_per_gnb,
                        cfg=self.cfg.agent,
                        rng=agent_rng,
                    )
                )

    def layout(self, assoc: tuple) -> Layout:
        lay = self._layouts.get(assoc)
        if lay is None:
            lay = self._layouts[assoc] = build_layout(self.scn, assoc)
        return lay

    def _powers(self, lay: Layout, levels_dbm: list | None) -> np.ndarray:
        """Nominal per-beam power in Watts."""
        p = np.zeros(len(lay.beam_gnb))
        for j, ids in enumerate(lay.gnb_beams):
            if not ids:
                continue
            if levels_dbm is None:
                p[ids] = upa_powers(self.cfg.agent.max_tx_power_dbm, len(ids))
            else:
                p[ids] = dbm_to_watt(np.asarray(levels_dbm[j][: len(ids)]))
        return p

    def _default_beam_power(self) -> float:
        if self.algorithm == "upa":
            return float(dbm_to_watt(self.cfg.agent.max_tx_power_dbm)) / self.cfg.beams_per_gnb
        return float(dbm_to_watt(self.cfg.agent.power_levels_dbm[-1]))

    def _state(self, lay: Layout, power: np.ndarray, radiated: np.ndarray | None) -> itf.NetworkState:
        return itf.NetworkState(
            gains=lay.gains,
            beam_gnb=lay.beam_gnb,
            beam_power=power,
            serving_beam=lay.serving_beam,
            beta=lay.beta,
            order=lay.order,
            noise=self.noise,
            beam_subband=lay.beam_index,
            subband_matched=self.cfg.subband_matched,
            interferer_power=radiated,
        )

    def _estimates(self, lay: Layout, power: np.ndarray, users) -> np.ndarray:
        """Reference-signal SINR of ``users`` toward every gNB at nominal powers.

        Each gNB is measured on its strongest beam for the user without the
        NOMA split; a gNB without beams is measured on a beam steered at the
        user at the algorithm's default beam power.
        """
        scn = self.scn
        est = np.zeros((scn.num_users, scn.num_gnbs))
        rx = lay.gains * power[None, :]  # (U, B)
        total = rx.sum(axis=1)
        for u in users:
            for j, ids in enumerate(lay.gnb_beams):
                if ids:
                    own = rx[u, ids]
                    sig = own.max()
                    intf = total[u] - own.sum()
                else:
                    sig = self._default_beam_power() * scn.beam_gain[u, j, u]
                    intf = total[u]
                est[u, j] = sig / (intf + self.noise)
        return est

    def run(self) -> RunResult:
        scn, cfg = self.scn, self.cfg
        num_gnbs, num_users = scn.num_gnbs, scn.num_users
        int_users = scn.int_users
        is_q = self.algorithm == "qlearning"
        rewards = np.full((cfg.num_ttis, num_gnbs), np.nan) if is_q else None
        q_abs_max = 0.0

        # TTI 0: measurement on the initial attachment, all beams on
        assoc = tuple(int(j) for j in scn.home)
        lay = self.layout(assoc)
        init_levels = None if not is_q else [[cfg.agent.power_levels_dbm[-1]] * cfg.beams_per_gnb] * num_gnbs
        power = self._powers(lay, init_levels)
        last_sinr = itf.evaluate_links(self._state(lay, power, None)).sinr
        est = self._estimates(lay, power, int_users)
        last_user_gnb = np.asarray(assoc)
        shannon = 0.0
        agent_trace, link_trace = [], []

        for t in range(1, cfg.num_ttis + 1):
            arrivals = self.arrivals[t - 1]
            for u in np.flatnonzero(arrivals):
                self.users[u].enqueue(t, int(arrivals[u]))

            new_assoc = list(scn.home)
            if is_q:
                levels = []
                proposals: dict[int, dict[int, int]] = {u: {} for u in int_users}
                for ag in self.agents:
                    subset = scn.intersection[ag.gnb] if cfg.agent.reward_scope == "intersection" else None
                    avg = itf.avg_sinr_gnb(last_sinr, last_user_gnb, ag.gnb, subset)
                    if subset is not None and avg == 0.0:
                        # no intersection user attached: fall back to the cell average
                        avg = itf.avg_sinr_gnb(last_sinr, last_user_gnb, ag.gnb)
                    step = ag.step(avg, t)
                    if step.reward is not None:
                        rewards[t - 1, ag.gnb] = step.reward
                        q_abs_max = max(q_abs_max, float(np.abs(ag.q).max()) if self.check else 0.0)
                    levels.append(step.powers_dbm)
                    for u, bit in step.delta.items():
                        proposals[u][ag.gnb] = bit
                    if self.traces:
                        agent_trace.append((t, ag.gnb, step.state, step.action, step.reward, step.avg_sinr_db))
                for u in int_users:
                    new_assoc[u] = ue_associate(priority_list(est[u]), proposals[u])
            else:
                levels = None
                for u in int_users:
                    new_assoc[u] = sinr_priority_association(est[u])

            assoc = tuple(int(j) for j in new_assoc)
            lay = self.layout(assoc)
            power = self._powers(lay, levels)
            sinr_est = last_sinr
            radiated = None
            if cfg.idle_beams_silent:
                active = np.zeros(len(power), dtype=bool)
                for u in range(num_users):
                    b = lay.serving_beam[u]
                    if b >= 0 and not active[b] and self.users[u].wants_to_send(t, self.bandwidth, sinr_est[u]):
                        active[b] = True
                radiated = np.where(active, power, 0.0)
            links = itf.evaluate_links(self._state(lay, power, radiated))
            sinr = links.sinr
            for u in range(num_users):
                self.users[u].step(t, self.bandwidth, float(sinr_est[u]), float(sinr[u]))
            shannon += itf.sum_rate(sinr[links.served], self.bandwidth)

            if self.traces:
                for u in np.flatnonzero(links.served):
                    b = lay.serving_beam[u]
                    link_trace.append(
                        (t, lay.beam_gnb[b], lay.beam_index[b], u, links.signal[u], links.i1[u], links.i2[u], sinr[u])
                    )
            if self.check:
                self._check_conservation(t)

            last_sinr = sinr
            last_user_gnb = np.asarray(assoc)
            est = self._estimates(lay, power, int_users)

        metrics = account_metrics(self.counters, self.users, cfg.num_ttis, cfg.mac, shannon / cfg.num_ttis)
        if is_q and not self.check:
            q_abs_max = max(float(np.abs(ag.q).max()) for ag in self.agents)
        return RunResult(
            seed=scn.seed,
            algorithm=self.algorithm,
            offered_load_mbps=self.load_mbps,
            num_users=num_users,
            metrics=metrics,
            rewards=rewards,
            q_abs_max=q_abs_max,
            num_actions=self.agents[0].space.size if is_q else 0,
            agent_trace=agent_trace,
            link_trace=link_trace,
            packet_log=self._packet_log,
            feedback_log=getattr(self, "_feedback_log", None),
            final_assoc=assoc,
            final_layout=lay,
        )

    def _check_conservation(self, t: int) -> None:
        c = self.counters
        queued = sum(u.queued for u in self.users)
        in_flight = sum(u.in_flight for u in self.users)
        if c.generated != queued + in_flight + c.delivered + c.dropped:
            raise AssertionError(f"packet conservation violated at TTI {t}")


def run_once(
    seed: int,
    cfg: ScenarioConfig,
    algorithm: str,
    offered_load_mbps: float,
    **kwargs,
) -> RunResult:
    return Simulation(build_scenario(seed, cfg), algorithm, offered_load_mbps, **kwargs).run()

