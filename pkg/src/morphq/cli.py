"""Command-line front end.

Subcommands: campaign (run a testing campaign), replay (re-execute a
recorded warning), gen (generate one program), qasm-roundtrip (check a
QASM file through export/import), and pair-check (one source/follow-up
comparison). Exit codes: 0 clean, 1 findings, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import defects
from .campaign import (
    CampaignConfig,
    replay_warning,
    run_campaign,
    run_iteration,
    summary_json_text,
)
from .circuit import substitute_params
from .errors import MorphqError, SchemaMismatch
from .generator import GenConfig, generate_program
from .qasm import QasmParseError, emit, parse
from .serialize import canonical_json, program_to_json
from .transforms import TransformChainPolicy

SEED_ENV_VAR = "MORPHQ_SEED"


def _default_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(f"error: {SEED_ENV_VAR} must be an integer, got {env!r}")
    return 0


def _add_gen_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help=f"base seed (default: ${SEED_ENV_VAR} or 0)")
    parser.add_argument("--min-qubits", type=int, default=1)
    parser.add_argument("--max-qubits", type=int, default=11)
    parser.add_argument("--max-gates", type=int, default=30)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphq",
        description="Metamorphic testing toolkit for quantum circuit toolchains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_campaign = sub.add_parser("campaign", help="run a testing campaign")
    budget = p_campaign.add_mutually_exclusive_group(required=True)
    budget.add_argument("--budget", type=float, metavar="SECONDS",
                        help="wall-clock budget in seconds")
    budget.add_argument("--pairs", type=int, metavar="N",
                        help="fixed number of program pairs (deterministic)")
    _add_gen_flags(p_campaign)
    p_campaign.add_argument("--max-transforms", type=int, default=4)
    p_campaign.add_argument("--threshold", type=float, default=0.05,
                            help="p-value threshold for distribution differences")
    p_campaign.add_argument("--workers", type=int, default=1)
    p_campaign.add_argument("--out", required=True, help="report output directory")
    p_campaign.add_argument("--backend", action="append", default=None,
                            metavar="ID", help="restrict generator backend choices")
    p_campaign.add_argument("--defect", action="append", default=[],
                            choices=sorted(defects.KNOWN_DEFECTS),
                            help="plant a known defect in the platform under test")
    p_campaign.add_argument("--no-figures", action="store_true",
                            help="skip rendering the report figures")

    p_replay = sub.add_parser("replay", help="re-execute a recorded warning")
    p_replay.add_argument("warning_file", help="path to a warnings/<pair>.json record")

    p_gen = sub.add_parser("gen", help="generate one source program")
    _add_gen_flags(p_gen)
    p_gen.add_argument("--format", choices=("qasm", "json"), default="qasm")
    p_gen.add_argument("--out", default=None, help="write to file instead of stdout")

    p_round = sub.add_parser("qasm-roundtrip", help="parse/emit fixpoint check")
    p_round.add_argument("qasm_file")

    p_pair = sub.add_parser("pair-check", help="run one metamorphic pair")
    _add_gen_flags(p_pair)
    p_pair.add_argument("--max-transforms", type=int, default=4)
    p_pair.add_argument("--threshold", type=float, default=0.05)
    return parser


def cmd_campaign(args) -> int:
    gen = GenConfig(
        min_qubits=args.min_qubits,
        max_qubits=args.max_qubits,
        max_gates=args.max_gates,
        backend_choices=tuple(args.backend) if args.backend else ("sv-dense", "sv-unitary"),
        seed=_default_seed(args.seed),
    )
    cfg = CampaignConfig(
        gen=gen,
        chain=TransformChainPolicy(args.max_transforms),
        threshold=args.threshold,
        workers=args.workers,
        pairs=args.pairs,
        budget_seconds=args.budget,
        defects=tuple(args.defect),
        out_dir=args.out,
        figures=not args.no_figures,
    )
    report, warnings = run_campaign(cfg)
    sys.stdout.write(summary_json_text(report))
    print(f"report written to {args.out}", file=sys.stderr)
    return 1 if warnings else 0


def cmd_replay(args) -> int:
    path = Path(args.warning_file)
    try:
        record = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read warning record: {exc}", file=sys.stderr)
        return 2
    fresh, matches = replay_warning(record)
    print(json.dumps(fresh, sort_keys=True, indent=2))
    print("verdict matches the record" if matches else "VERDICT MISMATCH",
          file=sys.stderr)
    return 0 if matches else 1


def cmd_gen(args) -> int:
    cfg = GenConfig(
        min_qubits=args.min_qubits,
        max_qubits=args.max_qubits,
        max_gates=args.max_gates,
        seed=_default_seed(args.seed),
    )
    program = generate_program(cfg)
    if args.format == "qasm":
        text = emit(substitute_params(program.circuit, program.bindings))
    else:
        text = canonical_json(program_to_json(program))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_qasm_roundtrip(args) -> int:
    try:
        text = Path(args.qasm_file).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    circuit = parse(text)
    emitted = emit(circuit)
    reparsed = parse(emitted)
    fixpoint = emit(reparsed) == emitted
    print(f"parsed: {circuit.n_qubits} qubits, {len(circuit.instructions)} instructions")
    print(f"emit/parse/emit fixpoint: {'yes' if fixpoint else 'NO'}")
    return 0 if fixpoint else 1


def cmd_pair_check(args) -> int:
    cfg = CampaignConfig(
        gen=GenConfig(
            min_qubits=args.min_qubits,
            max_qubits=args.max_qubits,
            max_gates=args.max_gates,
            seed=_default_seed(args.seed),
        ),
        chain=TransformChainPolicy(args.max_transforms),
        threshold=args.threshold,
        pairs=1,
    )
    row = run_iteration(cfg, 0)
    print(json.dumps(row["verdict"], sort_keys=True, indent=2))
    return 0 if row["verdict"]["kind"] == "ok" else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "campaign": cmd_campaign,
        "replay": cmd_replay,
        "gen": cmd_gen,
        "qasm-roundtrip": cmd_qasm_roundtrip,
        "pair-check": cmd_pair_check,
    }
    try:
        return handlers[args.command](args)
    except QasmParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MorphqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
