"""Aggregation of per-run outputs into summary statistics and CSV files.

Every writer takes already-finished run data and emits plain CSV with a
fixed header and fixed float formatting, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from pathlib import Path

import numpy as np
from scipy import stats

FLOAT_FMT = "{:.10g}"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else FLOAT_FMT.format(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def eccdf(samples):
    """Empirical complementary CDF as step points ``(x, P(X > x))``.

    Accepts raw samples or a ``{value: count}`` mapping. The last point is
    always ``(max, 0)``.
    """
    if isinstance(samples, dict):
        items = sorted((float(k), int(v)) for k, v in samples.items() if v > 0)
    else:
        arr = np.asarray(samples, dtype=float)
        vals, counts = np.unique(arr, return_counts=True)
        items = list(zip(vals.tolist(), counts.tolist()))
    n = sum(c for _, c in items)
    if n == 0:
        raise ValueError("eccdf of an empty sample")
    xs, ps = [], []
    above = n
    for x, c in items:
        above -= c
        xs.append(x)
        ps.append(above / n)
    return np.asarray(xs), np.asarray(ps)


def confidence_interval(values, level: float = 0.95):
    """Mean and Student-t half-width; half-width is NaN with fewer than 2 runs."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("confidence interval of an empty sample")
    mean = float(v.mean())
    if v.size < 2:
        return mean, float("nan")
    s = float(v.std(ddof=1))
    t = stats.t.ppf(0.5 + level / 2.0, v.size - 1)
    return mean, float(t * s / math.sqrt(v.size))


def cumulative_avg_reward(rewards) -> np.ndarray:
    """Running mean c_t of a reward trace; NaN entries (no reward yet) are skipped.

    A 2-D ``(T, agents)`` input is averaged over agents per step first.
    """
    r = np.asarray(rewards, dtype=float)
    if r.ndim == 2:
        valid = ~np.isnan(r)
        num = np.where(valid, r, 0.0).sum(axis=1)
        cnt = valid.sum(axis=1)
    else:
        valid = ~np.isnan(r)
        num = np.where(valid, r, 0.0)
        cnt = valid.astype(float)
    csum, ccnt = np.cumsum(num), np.cumsum(cnt)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ccnt > 0, csum / np.maximum(ccnt, 1), np.nan)


def cross_run_convergence(reward_traces) -> np.ndarray:
    """Mean over runs of each run's cumulative average reward."""
    curves = np.stack([cumulative_avg_reward(r) for r in reward_traces])
    valid = ~np.isnan(curves)
    total = np.where(valid, curves, 0.0).sum(axis=0)
    n = valid.sum(axis=0)
    return np.where(n > 0, total / np.maximum(n, 1), np.nan)


def merge_latency(hists) -> Counter:
    total = Counter()
    for h in hists:
        total.update(h)
    return total


# -- writers -----------------------------------------------------------------


def write_run_summary(path, results):
    rows = [
        (
            r.seed,
            r.offered_load_mbps,
            r.num_users,
            r.algorithm,
            r.metrics.sum_rate_mbps,
            r.metrics.pdr_pct,
            r.metrics.mean_latency_ms,
            r.metrics.generated,
            r.metrics.delivered,
            r.metrics.dropped,
            r.metrics.backlog,
        )
        for r in results
    ]
    header = [
        "seed",
        "load_mbps",
        "num_users",
        "algorithm",
        "sum_rate_mbps",
        "pdr_pct",
        "mean_latency_ms",
        "generated",
        "delivered",
        "dropped",
        "backlog",
    ]
    return write_csv(path, header, rows)


def _grouped(results, key):
    groups: dict = {}
    for r in results:
        groups.setdefault((key(r), r.algorithm), []).append(r)
    return dict(sorted(groups.items()))


def write_metric_vs(path, results, key, key_name, metric, metric_name, level=0.95):
    rows = []
    for (k, algo), rs in _grouped(results, key).items():
        mean, hw = confidence_interval([metric(r) for r in rs], level)
        rows.append((k, algo, len(rs), mean, hw))
    return write_csv(path, [key_name, "algorithm", "runs", f"{metric_name}_mean", f"{metric_name}_ci95"], rows)


def write_sumrate_vs_load(path, results, level=0.95):
    return write_metric_vs(
        path,
        results,
        lambda r: r.offered_load_mbps,
        "load_mbps",
        lambda r: r.metrics.sum_rate_mbps,
        "sum_rate_mbps",
        level,
    )


def write_sumrate_vs_users(path, results, level=0.95):
    return write_metric_vs(
        path, results, lambda r: r.num_users, "num_users", lambda r: r.metrics.sum_rate_mbps, "sum_rate_mbps", level
    )


def write_pdr_vs_load(path, results, level=0.95):
    return write_metric_vs(
        path, results, lambda r: r.offered_load_mbps, "load_mbps", lambda r: r.metrics.pdr_pct, "pdr_pct", level
    )


def write_eccdf_latency(path, results, tti_ms: float):
    rows = []
    for (load, algo), rs in _grouped(results, lambda r: r.offered_load_mbps).items():
        hist = merge_latency(r.metrics.latency_hist for r in rs)
        if not hist:
            continue
        xs, ps = eccdf(hist)
        for x, p in zip(xs, ps):
            rows.append((load, algo, int(x), x * tti_ms, hist[int(x)], p))
    return write_csv(path, ["load_mbps", "algorithm", "latency_ttis", "latency_ms", "packets", "ccdf"], rows)


def write_convergence(path, results):
    rows = []
    groups = _grouped([r for r in results if r.rewards is not None], lambda r: r.offered_load_mbps)
    for (load, algo), rs in groups.items():
        curve = cross_run_convergence([r.rewards for r in rs])
        for t, c in enumerate(curve, start=1):
            rows.append((load, algo, t, c))
    return write_csv(path, ["load_mbps", "algorithm", "tti", "cumulative_avg_reward"], rows)


def write_agent_trace(path, result):
    rows = []
    per_agent: dict[int, list] = {}
    for t, gnb, state, action, reward, avg_db in result.agent_trace:
        hist = per_agent.setdefault(gnb, [0.0, 0])
        if reward is not None:
            hist[0] += reward
            hist[1] += 1
        cum = hist[0] / hist[1] if hist[1] else float("nan")
        rows.append((t, gnb, state, action, reward, avg_db, cum))
    header = ["tti", "gnb", "state", "action_index", "reward", "avg_sinr_db", "cumulative_avg_reward"]
    return write_csv(path, header, rows)


def write_link_trace(path, result, bandwidth: float):
    header = ["tti", "gnb", "beam", "user", "signal_w", "intra_beam_w", "inter_cell_w", "sinr_db", "rate_bps"]
    rows = [
        (t, g, k, u, s, i1, i2, 10 * math.log10(x) if x > 0 else float("-inf"), bandwidth * math.log2(1 + x))
        for t, g, k, u, s, i1, i2, x in result.link_trace
    ]
    return write_csv(path, header, rows)


def write_packets(path, result, tti_ms: float):
    """One row per packet batch; ``count`` packets share every field."""
    rows = []
    for user, created, delivered, count, retx in result.packet_log or []:
        lat = (delivered - created + 1) * tti_ms if delivered is not None else None
        rows.append((user, created, "dropped" if delivered is None else delivered, lat, retx, count))
    header = ["user", "created_tti", "delivered_tti", "latency_ms", "retx_count", "count"]
    return write_csv(path, header, rows)
