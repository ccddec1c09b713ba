"""Downlink MAC: Poisson traffic, FIFO queues, transport blocks and HARQ.

Packets of one user that arrive in the same TTI are kept together as a
batch ``[created_tti, count]``; they are indistinguishable for every metric
and this keeps per-TTI work independent of the offered load.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, RunError


class PacketState(str, Enum):
    QUEUED = "queued"
    IN_FLIGHT = "in_flight"
    DELIVERED = "delivered"
    DROPPED = "dropped"


@dataclass
class Packet:
    id: int
    user: int
    size_bytes: int
    created_tti: int
    delivered_tti: int | None = None
    state: PacketState = PacketState.QUEUED
    retx_count: int = 0


@dataclass(frozen=True)
class MacConfig:
    tti_ms: float = 0.1429
    packet_size_bytes: int = 32
    round_trip_ttis: int = 4
    num_processes: int = 6
    max_retransmissions: int = 1

    def __post_init__(self):
        if self.tti_ms <= 0:
            raise ConfigError("tti_ms", "must be > 0")
        if self.packet_size_bytes < 1:
            raise ConfigError("packet_size_bytes", "must be >= 1")
        if self.round_trip_ttis < 1:
            raise ConfigError("round_trip_ttis", "must be >= 1")
        if self.num_processes < 1:
            raise ConfigError("num_processes", "must be >= 1")
        if self.max_retransmissions < 0:
            raise ConfigError("max_retransmissions", "must be >= 0")

    @property
    def packet_bits(self) -> int:
        return 8 * self.packet_size_bytes

    @property
    def tti_s(self) -> float:
        return self.tti_ms * 1e-3


@dataclass
class TtiClock:
    duration_ms: float = 0.1429
    index: int = 0

    def tick(self) -> int:
        self.index += 1
        return self.index

    @property
    def now_ms(self) -> float:
        return self.index * self.duration_ms


@dataclass
class TransportBlock:
    user: int
    batches: list  # [[created_tti, count], ...]
    sinr_est: float
    tx_tti: int
    retx_count: int = 0
    ok: bool = False

    @property
    def num_packets(self) -> int:
        return sum(c for _, c in self.batches)


@dataclass
class HarqProcess:
    pid: int
    block: TransportBlock | None = None

    @property
    def awaiting_feedback(self) -> bool:
        return self.block is not None


def arrival_rate(offered_load_bps: float, num_users: int, cfg: MacConfig) -> float:
    """Mean packet arrivals per user per TTI for a load split evenly over users."""
    if offered_load_bps < 0:
        raise ConfigError("offered_load", "must be >= 0")
    return offered_load_bps / num_users * cfg.tti_s / cfg.packet_bits


def generate_traffic(rng: np.random.Generator, offered_load_bps: float, num_users: int, num_ttis: int, cfg: MacConfig):
    """Poisson arrival counts, shaped ``(num_ttis, num_users)``."""
    lam = arrival_rate(offered_load_bps, num_users, cfg)
    if lam == 0:
        return np.zeros((num_ttis, num_users), dtype=np.int64)
    return rng.poisson(lam, size=(num_ttis, num_users))


def capacity_bits(bandwidth: float, sinr: float, tti_s: float) -> float:
    return bandwidth * math.log2(1.0 + sinr) * tti_s


@dataclass
class MacCounters:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    delivered_bits: int = 0
    first_tx: int = 0
    first_tx_failed: int = 0
    retx: int = 0
    latency_hist: Counter = field(default_factory=Counter)  # latency in TTIs -> packets


class UserMac:
    """Queue and HARQ entity of one user."""

    def __init__(self, user: int, cfg: MacConfig, counters: MacCounters, packet_log: list | None = None):
        self.user = user
        self.cfg = cfg
        self.queue: deque = deque()
        self.queued = 0
        self.processes = [HarqProcess(pid) for pid in range(cfg.num_processes)]
        self.c = counters
        self.packet_log = packet_log
        self.feedback_log: list | None = None

    def enqueue(self, tti: int, count: int) -> None:
        if count:
            self.queue.append([tti, count])
            self.queued += count
            self.c.generated += count

    @property
    def in_flight(self) -> int:
        return sum(p.block.num_packets for p in self.processes if p.block is not None and not p.block.ok)

    def _due(self, tti: int):
        for p in self.processes:
            if p.block is not None and p.block.tx_tti + self.cfg.round_trip_ttis == tti:
                return p
        return None

    def pending_retx(self, tti: int) -> bool:
        p = self._due(tti)
        return p is not None and not p.block.ok and p.block.retx_count < self.cfg.max_retransmissions

    def _free(self):
        for p in self.processes:
            if p.block is None:
                return p
        return None

    def wants_to_send(self, tti: int, bandwidth: float, sinr_est: float) -> bool:
        """Whether this user puts a transport block on air in ``tti``."""
        if self.pending_retx(tti):
            return True
        if not self.queued:
            return False
        due = self._due(tti)
        if self._free() is None and due is None:
            return False
        cap = capacity_bits(bandwidth, sinr_est, self.cfg.tti_s)
        return cap >= self.cfg.packet_bits

    def step(self, tti: int, bandwidth: float, sinr_est: float, sinr_actual: float) -> None:
        """Process feedback due now, then send one transport block at most."""
        due = self._due(tti)
        if due is not None:
            blk = due.block
            if self.feedback_log is not None:
                self.feedback_log.append((blk.tx_tti, tti))
            if not blk.ok and blk.retx_count < self.cfg.max_retransmissions:
                blk.retx_count += 1
                blk.tx_tti = tti
                self.c.retx += 1
                if sinr_actual >= blk.sinr_est:
                    blk.ok = True
                    self._deliver(blk, tti)
                return
            if not blk.ok:
                self._drop(blk, tti)
            due.block = None
        if not self.queued:
            return
        proc = self._free()
        if proc is None:
            return
        n = min(int(capacity_bits(bandwidth, sinr_est, self.cfg.tti_s) // self.cfg.packet_bits), self.queued)
        if n < 1:
            return
        blk = TransportBlock(user=self.user, batches=self._pop(n), sinr_est=sinr_est, tx_tti=tti)
        proc.block = blk
        self.c.first_tx += 1
        if sinr_actual >= sinr_est:
            blk.ok = True
            self._deliver(blk, tti)
        else:
            self.c.first_tx_failed += 1

    def _pop(self, n: int) -> list:
        out = []
        self.queued -= n
        while n:
            head = self.queue[0]
            take = min(n, head[1])
            out.append([head[0], take])
            head[1] -= take
            n -= take
            if head[1] == 0:
                self.queue.popleft()
        return out

    def _deliver(self, blk: TransportBlock, tti: int) -> None:
        bits = self.cfg.packet_bits
        for created, count in blk.batches:
            if tti < created:
                raise RunError("delivery precedes creation")
            self.c.latency_hist[tti - created + 1] += count
            self.c.delivered += count
            self.c.delivered_bits += count * bits
            if self.packet_log is not None:
                self.packet_log.append((self.user, created, tti, count, blk.retx_count))

    def _drop(self, blk: TransportBlock, tti: int) -> None:
        for created, count in blk.batches:
            self.c.dropped += count
            if self.packet_log is not None:
                self.packet_log.append((self.user, created, None, count, blk.retx_count))


@dataclass
class MetricsRecord:
    generated: int
    delivered: int
    dropped: int
    backlog: int
    sum_rate_mbps: float
    pdr_pct: float
    mean_latency_ms: float
    latency_hist: dict
    shannon_rate_mbps: float
    first_tx: int
    first_tx_failed: int
    retx: int


def account_metrics(counters: MacCounters, users: list[UserMac], num_ttis: int, cfg: MacConfig, shannon_rate_bps: float = 0.0) -> MetricsRecord:
    """Summarize a finished run; rejects runs that carried no packets."""
    finished = counters.delivered + counters.dropped
    if finished == 0:
        raise RunError("no packet was delivered or dropped; metrics are undefined")
    backlog = sum(u.queued + u.in_flight for u in users)
    hist = dict(sorted(counters.latency_hist.items()))
    if counters.delivered:
        mean_lat = sum(k * v for k, v in hist.items()) / counters.delivered * cfg.tti_ms
    else:
        mean_lat = float("nan")
    return MetricsRecord(
        generated=counters.generated,
        delivered=counters.delivered,
        dropped=counters.dropped,
        backlog=backlog,
        sum_rate_mbps=counters.delivered_bits / (num_ttis * cfg.tti_s) / 1e6,
        pdr_pct=100.0 * counters.dropped / finished,
        mean_latency_ms=mean_lat,
        latency_hist=hist,
        shannon_rate_mbps=shannon_rate_bps / 1e6,
        first_tx=counters.first_tx,
        first_tx_failed=counters.first_tx_failed,
        retx=counters.retx,
    )
