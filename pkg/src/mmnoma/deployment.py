"""User placement (Poisson cluster process), link geometry and beam clustering."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, RunError

log = logging.getLogger(__name__)

MAX_RESAMPLES = 100


@dataclass(frozen=True)
class PcpConfig:
    mean_users_per_cluster: float = 7.0
    num_clusters: int = 2
    cluster_radius: float = 30.0
    fixed_total_users: int | None = None

    def __post_init__(self):
        if self.mean_users_per_cluster <= 0:
            raise ConfigError("pcp_mean_users", "must be > 0")
        if self.num_clusters < 1:
            raise ConfigError("num_clusters", "must be >= 1")
        if self.cluster_radius < 0:
            raise ConfigError("cluster_radius", "must be >= 0")
        if self.fixed_total_users is not None and self.fixed_total_users < 1:
            raise ConfigError("num_users", "must be >= 1")


@dataclass(frozen=True)
class TopologyConfig:
    num_gnbs: int = 2
    inter_gnb_distance: float = 150.0

    def __post_init__(self):
        if self.num_gnbs < 1:
            raise ConfigError("num_gnbs", "must be >= 1")
        if self.inter_gnb_distance <= 0:
            raise ConfigError("inter_gnb_distance", "must be > 0")


@dataclass(frozen=True)
class Topology:
    gnb_positions: np.ndarray  # (J, 2)
    user_positions: np.ndarray  # (U, 2)
    parent_positions: np.ndarray  # (K, 2)
    user_parent: np.ndarray  # (U,)
    inter_gnb_distance: float

    @property
    def num_users(self) -> int:
        return len(self.user_positions)

    @property
    def num_gnbs(self) -> int:
        return len(self.gnb_positions)


@dataclass
class ClusterAssignment:
    """Beams of one gNB, ordered by ascending centroid AoD."""

    gnb: int
    members: list[np.ndarray]
    heads: list[int]
    centroid_aod: list[float]
    reduced: bool = False
    beam_of_user: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.beam_of_user:
            self.beam_of_user = {int(u): k for k, m in enumerate(self.members) for u in m}

    @property
    def num_beams(self) -> int:
        return len(self.members)


def gnb_positions(cfg: TopologyConfig) -> np.ndarray:
    xs = np.arange(cfg.num_gnbs) * cfg.inter_gnb_distance
    return np.column_stack([xs, np.zeros(cfg.num_gnbs)])


def deployment_area(cfg: TopologyConfig, pcp: PcpConfig):
    """Rectangle ``(xmin, xmax, ymin, ymax)`` spanning all gNBs padded by one cluster radius."""
    r = pcp.cluster_radius
    return (-r, (cfg.num_gnbs - 1) * cfg.inter_gnb_distance + r, -r, r)


def _uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def draw_topology(rng: np.random.Generator, pcp: PcpConfig, topo_cfg: TopologyConfig) -> Topology:
    """Draw gNB and user positions.

    Parents are uniform over the deployment area. Each parent gets a Poisson
    number of users, placed uniformly on a disk around it. When
    ``fixed_total_users`` is set the cluster sizes are drawn from the Poisson
    law conditioned on that total, i.e. a uniform multinomial split.
    """
    xmin, xmax, ymin, ymax = deployment_area(topo_cfg, pcp)
    k = pcp.num_clusters
    parents = np.column_stack([rng.uniform(xmin, xmax, k), rng.uniform(ymin, ymax, k)])
    if pcp.fixed_total_users is not None:
        counts = rng.multinomial(pcp.fixed_total_users, np.full(k, 1.0 / k))
    else:
        for _ in range(MAX_RESAMPLES):
            counts = rng.poisson(pcp.mean_users_per_cluster, k)
            if counts.sum() > 0:
                break
        else:
            raise RunError(f"PCP drew zero users {MAX_RESAMPLES} times")
    owner = np.repeat(np.arange(k), counts)
    users = parents[owner] + _uniform_disk(rng, len(owner), pcp.cluster_radius)
    return Topology(
        gnb_positions=gnb_positions(topo_cfg),
        user_positions=users,
        parent_positions=parents,
        user_parent=owner,
        inter_gnb_distance=topo_cfg.inter_gnb_distance,
    )


def link_geometry(topology: Topology):
    """Distances and AoDs, both shaped ``(U, J)``.

    Arrays lie along the y axis, so ``sin(aod)`` is the lateral offset over the
    distance. A ULA cannot tell front from back, which keeps AoDs in
    ``[-pi/2, pi/2]``.
    """
    delta = topology.user_positions[:, None, :] - topology.gnb_positions[None, :, :]
    dist = np.hypot(delta[..., 0], delta[..., 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dist > 0, delta[..., 1] / np.where(dist > 0, dist, 1.0), 0.0)
    return dist, np.arcsin(np.clip(s, -1.0, 1.0))


def correlation_matrix(channels: np.ndarray) -> np.ndarray:
    """Pairwise normalized correlation ``|h_u^H h_v| / (|h_u| |h_v|)``."""
    h = np.asarray(channels)
    norms = np.linalg.norm(h, axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    hn = h / norms[:, None]
    return np.abs(hn.conj() @ hn.T)


def kmeans_objective(corr: np.ndarray, labels: np.ndarray, heads) -> float:
    return float(sum(corr[u, heads[labels[u]]] for u in range(len(labels))))


def correlation_kmeans(
    channels: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 100,
    history: list | None = None,
):
    """Group users by channel correlation.

    Heads are users (medoids). Each iteration assigns users to the most
    correlated head, then moves each head to the member with the largest
    summed correlation to its cluster. Neither step can lower the objective.

    Returns ``(labels, heads)``; heads are indices into ``channels``.
    """
    n = len(channels)
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 0:
        return np.zeros(0, dtype=int), []
    if n < k:
        log.info("only %d users for %d beams; using %d beams", n, k, n)
        k = n
    corr = correlation_matrix(channels)
    # farthest-first seeding: random first head, then least-correlated users
    heads = [int(rng.integers(n))]
    while len(heads) < k:
        fit = corr[:, heads].max(axis=1)
        fit[heads] = np.inf
        heads.append(int(np.argmin(fit)))
    labels = np.argmax(corr[:, heads], axis=1)
    for _ in range(max_iter):
        labels = _assign(corr, heads, labels)
        _reseed_empty(corr, heads, labels)
        if history is not None:
            history.append(kmeans_objective(corr, labels, heads))
        new_heads = []
        for c in range(k):
            m = np.flatnonzero(labels == c)
            new_heads.append(int(m[np.argmax(corr[np.ix_(m, m)].sum(axis=1))]))
        if new_heads == heads:
            break
        heads = new_heads
    return labels, heads


def _assign(corr, heads, labels):
    scores = corr[:, heads]
    best = np.argmax(scores, axis=1)
    # keep the current label on ties so the objective never oscillates
    keep = scores[np.arange(len(labels)), labels] >= scores[np.arange(len(labels)), best]
    return np.where(keep, labels, best)


def _reseed_empty(corr, heads, labels):
    for c in range(len(heads)):
        if np.any(labels == c):
            continue
        fit = corr[np.arange(len(labels)), [heads[l] for l in labels]]
        sizes = np.bincount(labels, minlength=len(heads))
        fit = np.where(sizes[labels] > 1, fit, np.inf)
        far = int(np.argmin(fit))
        labels[far] = c
        heads[c] = far


def cluster_gnb(
    gnb: int,
    users: np.ndarray,
    channels: np.ndarray,
    aods: np.ndarray,
    num_beams: int,
    rng: np.random.Generator,
    max_iter: int = 100,
) -> ClusterAssignment:
    """Cluster ``users`` (global ids) attached to ``gnb`` into beams.

    ``channels`` is ``(U, M)`` toward this gNB and ``aods`` is ``(U,)``; both are
    indexed by global user id.
    """
    users = np.asarray(users, dtype=int)
    if len(users) == 0:
        return ClusterAssignment(gnb=gnb, members=[], heads=[], centroid_aod=[])
    labels, heads = correlation_kmeans(channels[users], num_beams, rng, max_iter)
    beams = []
    for c, h in enumerate(heads):
        beams.append((float(aods[users[h]]), users[labels == c], int(users[h])))
    beams.sort(key=lambda b: (b[0], b[2]))
    return ClusterAssignment(
        gnb=gnb,
        members=[b[1] for b in beams],
        heads=[b[2] for b in beams],
        centroid_aod=[b[0] for b in beams],
        reduced=len(heads) < num_beams,
    )


def received_power_db(channel_norm_sq: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(channel_norm_sq)


def strongest_gnb(channel_norm_sq: np.ndarray) -> np.ndarray:
    return np.argmax(channel_norm_sq, axis=1)


def power_gap_db(channel_norm_sq: np.ndarray) -> np.ndarray:
    """Gap in dB between each user's strongest and second-strongest gNB."""
    p = received_power_db(channel_norm_sq)
    if p.shape[1] < 2:
        return np.full(p.shape[0], np.inf)
    top = np.sort(p, axis=1)
    return top[:, -1] - top[:, -2]


def find_intersection_users(
    channel_norm_sq: np.ndarray, margin_db: float, max_users: int | None = None
) -> dict[int, set[int]]:
    """Users eligible for re-association, per gNB.

    A user is in the intersection region when its two strongest gNBs are
    within ``margin_db`` of each other in long-term received power. With
    ``max_users`` only that many users with the smallest gaps are kept. Each
    selected user belongs to the intersection set of its two strongest gNBs.
    """
    num_gnbs = channel_norm_sq.shape[1]
    out = {j: set() for j in range(num_gnbs)}
    if num_gnbs < 2:
        return out
    gap = power_gap_db(channel_norm_sq)
    order = sorted(range(len(gap)), key=lambda u: (gap[u], u))
    chosen = [u for u in order if gap[u] < margin_db]
    if max_users is not None:
        chosen = chosen[:max_users]
    top2 = np.argsort(-channel_norm_sq, axis=1, kind="stable")[:, :2]
    for u in chosen:
        for j in top2[u]:
            out[int(j)].add(int(u))
    return out


def write_topology_csv(path, topology: Topology, serving_gnb, beam_of_user) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "x", "y", "gnb", "beam"])
        for u, (x, y) in enumerate(topology.user_positions):
            w.writerow([u, f"{x:.6f}", f"{y:.6f}", int(serving_gnb[u]), int(beam_of_user.get(u, -1))])


def within_radius(topology: Topology, radius: float, tol: float = 1e-9) -> bool:
    d = np.hypot(*(topology.user_positions - topology.parent_positions[topology.user_parent]).T)
    return bool(np.all(d <= radius + tol))
