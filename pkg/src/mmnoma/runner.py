"""Sweep expansion, run scheduling and output writing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import metrics
from .config import ExperimentConfig, config_from_dict
from .deployment import write_topology_csv
from .errors import ConfigError, RunError
from .interference import link_bandwidth
from .simulation import Simulation, build_scenario

log = logging.getLogger(__name__)

OUT_ENV = "MMNOMA_OUT_DIR"
DEFAULT_OUT = "results"
MANIFEST = "manifest.json"


@dataclasses.dataclass(frozen=True)
class Job:
    sweep: str  # "load" or "users"
    seed: int
    algorithm: str
    load_mbps: float
    num_users: int

    @property
    def run_id(self) -> str:
        return f"{self.sweep}_{self.algorithm}_u{self.num_users}_l{self.load_mbps:g}_s{self.seed}"


def expand_jobs(cfg: ExperimentConfig, seeds=None, algorithms=None) -> list[Job]:
    seeds = list(cfg.seeds() if seeds is None else seeds)
    algorithms = list(cfg.algorithms if algorithms is None else algorithms)
    sweeps = cfg["simulation"]["sweeps"]
    users = cfg["users"]["num_users"]
    jobs = []
    if "load" in sweeps:
        for load in cfg["traffic"]["offered_loads_mbps"]:
            for algo in algorithms:
                jobs.extend(Job("load", s, algo, float(load), users) for s in seeds)
    if "users" in sweeps:
        load = float(cfg["traffic"]["user_sweep_load_mbps"])
        for n in cfg["traffic"]["user_sweep"]:
            for algo in algorithms:
                jobs.extend(Job("users", s, algo, load, n) for s in seeds)
    return jobs


def _write_traces(trace_dir: Path, job: Job, scn, res, tti_ms: float) -> None:
    stem = trace_dir / job.run_id
    if res.agent_trace:
        metrics.write_agent_trace(f"{stem}_agent_trace.csv", res)
    bandwidth = link_bandwidth(scn.cfg.phy.bandwidth, scn.cfg.beams_per_gnb, scn.cfg.subband_matched)
    metrics.write_link_trace(f"{stem}_links.csv", res, bandwidth)
    metrics.write_packets(f"{stem}_packets.csv", res, tti_ms)
    beam_of_user = {}
    for ca in res.final_layout.clusters:
        beam_of_user.update(ca.beam_of_user)
    write_topology_csv(f"{stem}_topology.csv", scn.topology, res.final_assoc, beam_of_user)


def run_job(values: dict, job: Job, trace_dir: str | None = None):
    """Run one job; returns a slim ``RunResult`` or an error record dict."""
    cfg = ExperimentConfig(values)
    try:
        scn = build_scenario(job.seed, cfg.scenario(job.num_users))
        traces = trace_dir is not None
        sim = Simulation(scn, job.algorithm, job.load_mbps, traces=traces, packet_log=traces)
        res = sim.run()
    except RunError as exc:
        log.error("run %s failed: %s", job.run_id, exc)
        return {"run_id": job.run_id, "error": str(exc)}
    if trace_dir is not None:
        _write_traces(Path(trace_dir), job, scn, res, cfg["phy"]["tti_ms"])
    res.agent_trace, res.link_trace, res.packet_log = [], [], None
    res.final_layout = None
    res.sweep = job.sweep
    return res


def _versions() -> dict:
    from importlib.metadata import PackageNotFoundError, version

    try:
        pkg = version("artifact")
    except PackageNotFoundError:
        pkg = "unknown"
    return {
        "mmnoma": pkg,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(
    cfg: ExperimentConfig,
    out_dir,
    seeds=None,
    algorithms=None,
    parallel: int = 1,
    traces: bool = False,
):
    """Execute every job and write all outputs; returns ``(out_dir, errors)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(cfg.seeds() if seeds is None else seeds)
    algorithms = list(cfg.algorithms if algorithms is None else algorithms)
    jobs = expand_jobs(cfg, seeds, algorithms)
    trace_dir = None
    if traces:
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
        trace_dir = str(trace_dir)
    log.info("running %d jobs with %d worker(s)", len(jobs), parallel)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            outcomes = list(ex.map(run_job, [cfg.values] * len(jobs), jobs, [trace_dir] * len(jobs)))
    else:
        outcomes = [run_job(cfg.values, j, trace_dir) for j in jobs]

    results = [r for r in outcomes if not isinstance(r, dict)]
    errors = [r for r in outcomes if isinstance(r, dict)]
    load_runs = [r for r in results if r.sweep == "load"]
    user_runs = [r for r in results if r.sweep == "users"]
    level = cfg["simulation"]["confidence_level"]
    tti_ms = cfg["phy"]["tti_ms"]

    written = [metrics.write_run_summary(out / "run_summary.csv", results)]
    if load_runs:
        written.append(metrics.write_sumrate_vs_load(out / "sumrate_vs_load.csv", load_runs, level))
        written.append(metrics.write_pdr_vs_load(out / "pdr_vs_load.csv", load_runs, level))
        written.append(metrics.write_eccdf_latency(out / "eccdf_latency.csv", load_runs, tti_ms))
        written.append(metrics.write_convergence(out / "convergence.csv", load_runs))
    if user_runs:
        written.append(metrics.write_sumrate_vs_users(out / "sumrate_vs_users.csv", user_runs, level))
    if errors:
        rows = [(e["run_id"], e["error"]) for e in errors]
        written.append(metrics.write_csv(out / "errors.csv", ["run_id", "error"], rows))

    manifest = {
        "config": json.loads(cfg.to_json()),
        "config_sha256": cfg.digest(),
        "seeds": seeds,
        "algorithms": algorithms,
        "traces": traces,
        "versions": _versions(),
        "outputs": {p.name: _sha256(p) for p in sorted(written)},
        "failed_runs": len(errors),
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out, errors


def config_from_manifest(path) -> tuple[ExperimentConfig, list[int], list[str], bool]:
    try:
        man = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("manifest", f"cannot read {path}: {exc}") from None
    for key in ("config", "seeds", "algorithms"):
        if key not in man:
            raise ConfigError(f"manifest.{key}", "missing")
    return config_from_dict(man["config"]), list(man["seeds"]), list(man["algorithms"]), bool(man.get("traces"))


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


def log_to_stderr(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
