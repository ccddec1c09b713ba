"""``simulate`` command line entry point.

Exit codes: 0 on success, 1 for configuration errors, 2 when any run failed.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, RunError
from .runner import OUT_ENV, config_from_manifest, default_out_dir, log_to_stderr, run_experiment
from .simulation import ALGORITHMS

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 1, 2


def _seed_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description="Multi-cell mmWave NOMA Q-learning vs UPA simulator")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML experiment file")
    src.add_argument("--manifest", help="rerun exactly what a previous manifest.json describes")
    p.add_argument("--algo", choices=ALGORITHMS, help="run one algorithm only")
    p.add_argument("--seeds", type=_seed_list, help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--runs", type=int, help="number of seeds starting at simulation.first_seed")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--traces", action="store_true", help="per-run packet, link, agent and topology CSVs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log_to_stderr(args.verbose)
    try:
        if args.manifest:
            cfg, seeds, algos, traces = config_from_manifest(args.manifest)
            traces = traces or args.traces
        else:
            cfg = load_config(args.config)
            seeds, algos, traces = None, None, args.traces
        if args.runs is not None:
            if args.runs < 1:
                raise ConfigError("runs", "must be >= 1")
            first = cfg["simulation"]["first_seed"]
            seeds = list(range(first, first + args.runs))
        if args.seeds:
            seeds = args.seeds[: args.runs] if args.runs else args.seeds
        if args.algo:
            algos = [args.algo]
        if args.parallel < 1:
            raise ConfigError("parallel", "must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or default_out_dir()
    try:
        out_dir, errors = run_experiment(cfg, out, seeds=seeds, algorithms=algos, parallel=args.parallel, traces=traces)
    except (RunError, OSError) as exc:
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN
    if errors:
        print(f"{len(errors)} run(s) failed, see {out_dir / 'errors.csv'}", file=sys.stderr)
        return EXIT_RUN
    print(out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
