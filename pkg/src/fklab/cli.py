"""Configuration-driven experiment runner.

Commands: run (full protocol from a JSON config), echo-check (gate-level
preparation fidelity), verify-bounds (analysis suites to CSV), report
(pretty-print a report JSON). Exit codes: 0 success, 2 malformed
config/arguments, 3 capacity guard; echo-check and verify-bounds exit 1 on a
failed check. FKLAB_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import SUITE_NAMES, run_bound_suite
from .errors import CapacityError, FklabError
from .lattice import build_lattice, random_input
from .prover import (
    NoiseModel,
    echo_prepare,
    ideal_history_state,
    make_degraded_model,
    make_honest_model,
)
from .rng import TAG_INPUT, TAG_REPETITION, child_seed, substream
from .simulator import MAX_STATE_QUBITS, state_fidelity
from .verifier import ProtocolConfig, run_protocol

ECHO_FIDELITY_FLOOR = 1.0 - 1e-10


class ConfigError(FklabError, ValueError):
    """Raised for malformed experiment configs; maps to exit code 2."""


def _require(data: dict, key: str, context: str):
    if key not in data:
        raise ConfigError(f"missing required field {key!r} in {context}")
    return data[key]


def load_experiment_config(path: str) -> dict:
    """Parse and validate a run config, returning ready-to-use objects."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    lattice_cfg = _require(raw, "lattice", "config")
    rows = int(_require(lattice_cfg, "rows", "lattice"))
    cols = int(_require(lattice_cfg, "cols", "lattice"))
    if rows * cols > MAX_STATE_QUBITS:
        raise CapacityError(f"{rows}x{cols} lattice exceeds the {MAX_STATE_QUBITS}-qubit guard")
    lattice = build_lattice(rows, cols)

    input_seed = int(raw.get("input_seed", 0))
    spec = random_input(lattice.num_qubits, substream(input_seed, TAG_INPUT))

    prover_cfg = raw.get("prover", {"type": "honest"})
    kind = prover_cfg.get("type", "honest")
    noise = NoiseModel.from_json_dict(prover_cfg.get("noise", {}))
    if kind == "honest":
        model = make_honest_model(lattice, spec, noise)
    elif kind == "degraded":
        model = make_degraded_model(
            lattice,
            spec,
            float(_require(prover_cfg, "target_o10_sq", "prover")),
            float(_require(prover_cfg, "target_f_in", "prover")),
        )
    else:
        raise ConfigError(f"unknown prover type {kind!r}")

    proto_cfg = _require(raw, "protocol", "config")
    window = proto_cfg.get("psamp_window", [0.494, 0.506])
    protocol = ProtocolConfig(
        num_copies=int(_require(proto_cfg, "num_copies", "protocol")),
        master_seed=int(_require(proto_cfg, "master_seed", "protocol")),
        threshold_o10=float(proto_cfg.get("threshold_o10", 0.994)),
        threshold_fin=float(proto_cfg.get("threshold_fin", 0.994)),
        psamp_window=(float(window[0]), float(window[1])),
    )
    return {
        "lattice": lattice,
        "input_spec": spec,
        "model": model,
        "noise": noise,
        "protocol": protocol,
        "repetitions": int(raw.get("repetitions", 1)),
    }


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def cmd_run(args) -> int:
    cfg = load_experiment_config(args.config)
    protocol: ProtocolConfig = cfg["protocol"]
    if args.seed is not None:
        protocol = replace(protocol, master_seed=int(args.seed))
    reps = args.reps if args.reps is not None else cfg["repetitions"]
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)

    summary_rows = []
    for rep in range(reps):
        rep_seed = child_seed(protocol.master_seed, TAG_REPETITION, rep)
        rep_config = replace(protocol, master_seed=rep_seed)
        transcript, report = run_protocol(
            cfg["model"], cfg["lattice"], cfg["input_spec"], rep_config, noise=cfg["noise"]
        )
        _dump_json(out_dir / f"report_rep{rep:03d}.json", report.to_json_dict())
        with open(out_dir / f"samples_rep{rep:03d}.txt", "w") as fh:
            for line in report.sample_bitstrings():
                fh.write(line + "\n")
        if args.transcript:
            with open(out_dir / f"transcript_rep{rep:03d}.jsonl", "w") as fh:
                for record in transcript.iter_records():
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
        summary_rows.append(
            {
                "rep": rep,
                "seed": rep_seed,
                "accepted": int(report.accepted),
                "f_in_m": report.f_in_m,
                "p_samp_m": report.p_samp_m,
                "o10_sq_scaled": report.o10_sq_scaled,
                "num_samples": int(report.samples.size),
            }
        )
        print(
            f"rep {rep}: accepted={bool(report.accepted)} "
            f"f_in_m={report.f_in_m} p_samp_m={report.p_samp_m} "
            f"o10_sq_scaled={report.o10_sq_scaled}"
        )

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary_rows[0].keys()))
        writer.writeheader()
        writer.writerows(summary_rows)
    return 0


def cmd_echo_check(args) -> int:
    lattice = build_lattice(args.rows, args.cols)
    spec = random_input(lattice.num_qubits, substream(args.seed or 0, TAG_INPUT))
    prepared = echo_prepare(lattice, spec)
    fidelity = state_fidelity(prepared, ideal_history_state(lattice, spec))
    print(f"echo fidelity {args.rows}x{args.cols}: {fidelity!r}")
    return 0 if fidelity >= ECHO_FIDELITY_FLOOR else 1


def cmd_verify_bounds(args) -> int:
    result = run_bound_suite(args.suite, args.instances, args.seed or 0)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"bounds_{args.suite}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test_name", "instances", "violations", "max_margin"])
        writer.writerow([result.test_name, result.instances, result.violations, repr(result.max_margin)])
    print(
        f"suite {result.test_name}: {result.violations} violations over "
        f"{result.instances} instances (max margin {result.max_margin:.3e}) -> {path}"
    )
    return 0 if result.violations == 0 else 1


def cmd_report(args) -> int:
    try:
        with open(args.path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report: {exc}") from exc
    print(json.dumps(data, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fklab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the protocol from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the experiment config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--transcript", action="store_true", help="also write per-copy JSONL")
    p_run.add_argument("--reps", type=int, default=None, help="override the repetition count")
    p_run.set_defaults(func=cmd_run)

    p_echo = sub.add_parser("echo-check", help="check the gate-level preparation fidelity")
    p_echo.add_argument("rows", type=int)
    p_echo.add_argument("cols", type=int)
    p_echo.add_argument("--seed", type=int, default=0)
    p_echo.set_defaults(func=cmd_echo_check)

    p_bounds = sub.add_parser("verify-bounds", help="run a bound-verification suite")
    p_bounds.add_argument("suite", help=f"one of {', '.join(SUITE_NAMES)}")
    p_bounds.add_argument("--instances", type=int, default=200)
    p_bounds.add_argument("--seed", type=int, default=0)
    p_bounds.add_argument("--out", default=None)
    p_bounds.set_defaults(func=cmd_verify_bounds)

    p_report = sub.add_parser("report", help="pretty-print a report JSON")
    p_report.add_argument("path")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad arguments, matching the malformed-input code.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FklabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
