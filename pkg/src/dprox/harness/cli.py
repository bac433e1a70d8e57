"""Command line entry point: ``dprox run|sweep|check``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from ..network import MixingError
from ..objectives import ObjectiveError
from ..solver import DivergenceError
from .checks import SUITES, run_suite
from .config import SCHEMA, ConfigError, ExperimentConfig, load_config
from .experiment import execute, write_outputs

logger = logging.getLogger("dprox")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3

SWEEP_KEYS = {
    "condition_target": "problem.condition_target",
    "chi_via_topology": "network.topology",
    "epsilon": "algorithm.epsilon",
    "T": "algorithm.T",
}


def _load(path: str) -> ExperimentConfig | int:
    try:
        return load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO


def _run_one(cfg: ExperimentConfig, outdir: Path):
    """Execute and write outputs; returns ``(exit_code, outcome or None)``."""
    try:
        outcome = execute(cfg)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED, None
    except MixingError as exc:
        print(f"config error: network.certify_samples: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    except (ObjectiveError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO, None
    try:
        write_outputs(cfg, outcome, outdir)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO, None
    return EXIT_OK, outcome


def cli_run(config_path: str, out: str | None = None) -> int:
    cfg = _load(config_path)
    if isinstance(cfg, int):
        return cfg
    outdir = Path(out or cfg["output.dir"])
    code, outcome = _run_one(cfg, outdir)
    if outcome is not None:
        d = outcome.derived
        print(
            f"spec_hash={d['spec_hash']} chi={d['chi']:.6g} T={d['T']} N={d['N']} "
            f"N_comm={d['N_comm']} final_gap={d['final_gap']:.6e} -> {outdir}"
        )
    return code


def cli_sweep(config_path: str, sweep_key: str, values: list[str], out: str | None = None) -> int:
    cfg = _load(config_path)
    if isinstance(cfg, int):
        return cfg
    if sweep_key not in SWEEP_KEYS:
        print(f"config error: --key must be one of {', '.join(SWEEP_KEYS)}", file=sys.stderr)
        return EXIT_CONFIG
    target = SWEEP_KEYS[sweep_key]
    parser = SCHEMA[target][0]
    outdir = Path(out or cfg["output.dir"])
    rows = []
    for raw in (v.strip() for v in values):
        try:
            sub = cfg.replace(**{target: parser(raw)})
        except (ValueError, ConfigError) as exc:
            print(f"config error: {target} = {raw}: {exc}", file=sys.stderr)
            code, outcome = EXIT_CONFIG, None
        else:
            code, outcome = _run_one(sub, outdir / f"sweep-{sweep_key}-{raw}")
        if outcome is None:
            logger.warning("sweep value %s failed with exit code %d", raw, code)
            rows.append([raw, "", "", "nan"])
            continue
        rep = outcome.report
        hit = outcome.derived["settled_at"]
        comm = hit * rep.T if hit is not None else rep.N_comm
        rows.append([raw, "" if hit is None else str(hit), str(comm), f"{rep.records[-1].gap:.17g}"])
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["value", "N_to_eps", "comm_rounds", "final_gap"])
            writer.writerows(rows)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{len(rows)} runs -> {outdir / 'sweep.csv'}")
    return EXIT_OK


def cli_check(suite: str) -> int:
    failed = 0
    print("check_name,n_or_draw,margin,pass")
    for result in run_suite(suite):
        print(result.line(), flush=True)
        failed += not result.passed
    return EXIT_OK if failed == 0 else 1


class _Parser(argparse.ArgumentParser):
    # usage errors count as configuration errors; exit 2 is reserved for divergence
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dprox", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides output.dir)")

    p_sweep = sub.add_parser("sweep", help="run one experiment per value of a sweep key")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--key", required=True, choices=sorted(SWEEP_KEYS))
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out")

    p_check = sub.add_parser("check", help="run a property suite")
    p_check.add_argument("suite", choices=[*SUITES, "all"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cli_run(args.config, args.out)
    if args.command == "sweep":
        return cli_sweep(args.config, args.key, args.values.split(","), args.out)
    return cli_check(args.suite)


if __name__ == "__main__":
    sys.exit(main())
