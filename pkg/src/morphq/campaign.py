"""Campaign runner: generate, transform, execute, compare, report.

Each iteration generates a source program, derives a follow-up via a
random transformation chain, executes both, and checks the expected output
relation; pairs violating it are recorded as warnings. Iterations are
fully independent (per-iteration seed = campaign seed XOR iteration
index), so results are reproducible pair by pair and independent of the
worker count.

Reports are split into deterministic files (summary.json, clusters.json,
pairs.csv, warnings/*.json) and a nondeterministic timing.json; rerunning
a pair-count campaign with the same seed reproduces the deterministic
files byte for byte.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import defects
from .backend import Crash, ExecutionOutcome, Success, execute
from .compare import (
    CRASH_DIFFERENCE,
    DISTRIBUTION_DIFFERENCE,
    OK,
    Verdict,
    abstract_message,
    check_relation,
    verdict_to_json,
)
from .errors import SchemaMismatch
from .generator import EstimatedShots, FixedShots, GenConfig, generate_program, new_rng
from .qasm import emit
from .serialize import canonical_json, program_to_json
from .transforms import TransformChainPolicy, chain_transforms

REPORT_SCHEMA = "morphq-report/1"
WARNING_SCHEMA = "morphq-warning/1"

_SEED_MASK = (1 << 63) - 1


@dataclass(frozen=True)
class CampaignConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    chain: TransformChainPolicy = field(default_factory=TransformChainPolicy)
    threshold: float = 0.05
    workers: int = 1
    pairs: int | None = None
    budget_seconds: float | None = None
    defects: tuple[str, ...] = ()
    out_dir: str | None = None
    figures: bool = True

    def __post_init__(self) -> None:
        if (self.pairs is None) == (self.budget_seconds is None):
            raise ValueError("set exactly one of pairs / budget_seconds")
        if self.pairs is not None and self.pairs < 0:
            raise ValueError("pairs must be >= 0")
        if self.budget_seconds is not None and self.budget_seconds <= 0:
            raise ValueError("budget_seconds must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


@dataclass(frozen=True)
class CrashCluster:
    abstracted_message: str
    members: tuple[str, ...]  # pair ids

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class CampaignReport:
    config: dict
    counts: dict
    percentages: dict
    transform_stats: dict
    rows: list[dict]
    warnings: list[dict]
    clusters: list[CrashCluster]
    timing: dict


# ---------------------------------------------------------------------------
# Config serialization (embedded in reports and warning records for replay)
# ---------------------------------------------------------------------------


def _policy_to_json(policy) -> dict:
    if isinstance(policy, FixedShots):
        return {"kind": "fixed", "shots": policy.shots}
    return {"kind": "estimated", "z": policy.z, "eps": policy.eps}


def _policy_from_json(d: dict):
    if d["kind"] == "fixed":
        return FixedShots(d["shots"])
    return EstimatedShots(d["z"], d["eps"])


def gen_config_to_json(cfg: GenConfig) -> dict:
    return {
        "min_qubits": cfg.min_qubits,
        "max_qubits": cfg.max_qubits,
        "max_gates": cfg.max_gates,
        "opt_level_choices": list(cfg.opt_level_choices),
        "backend_choices": list(cfg.backend_choices),
        "shots_policy": _policy_to_json(cfg.shots_policy),
        "seed": cfg.seed,
    }


def gen_config_from_json(d: dict) -> GenConfig:
    try:
        return GenConfig(
            min_qubits=d["min_qubits"],
            max_qubits=d["max_qubits"],
            max_gates=d["max_gates"],
            opt_level_choices=tuple(d["opt_level_choices"]),
            backend_choices=tuple(d["backend_choices"]),
            shots_policy=_policy_from_json(d["shots_policy"]),
            seed=d["seed"],
        )
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"malformed generator config: {exc}") from exc


def campaign_config_to_json(cfg: CampaignConfig) -> dict:
    # workers is runtime infrastructure, not semantics: identical campaigns
    # run with different worker counts produce byte-identical reports.
    return {
        "gen": gen_config_to_json(cfg.gen),
        "max_transforms": cfg.chain.max_transforms,
        "threshold": cfg.threshold,
        "pairs": cfg.pairs,
        "budget_seconds": cfg.budget_seconds,
        "defects": sorted(cfg.defects),
    }


def campaign_config_from_json(d: dict) -> CampaignConfig:
    try:
        return CampaignConfig(
            gen=gen_config_from_json(d["gen"]),
            chain=TransformChainPolicy(d["max_transforms"]),
            threshold=d["threshold"],
            workers=d.get("workers", 1),
            pairs=d.get("pairs"),
            budget_seconds=d.get("budget_seconds"),
            defects=tuple(d.get("defects", ())),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"malformed campaign config: {exc}") from exc


# ---------------------------------------------------------------------------
# Single iteration
# ---------------------------------------------------------------------------


def iteration_seed(campaign_seed: int, index: int) -> int:
    return (campaign_seed ^ index) & _SEED_MASK


def _outcome_to_json(outcome: ExecutionOutcome) -> dict:
    if isinstance(outcome, Success):
        return {
            "status": "success",
            "shots": outcome.distribution.shots,
            "distinct_keys": len(outcome.distribution.counts),
        }
    return {"status": "crash", "phase": outcome.phase, "message": outcome.message}


def run_iteration(cfg: CampaignConfig, index: int) -> dict:
    """Run one generate/transform/execute/compare cycle; returns a row dict."""
    seed = iteration_seed(cfg.gen.seed, index)
    rng = new_rng(seed)
    t0 = time.perf_counter()
    source = generate_program(cfg.gen, rng)
    t1 = time.perf_counter()
    followup, records = chain_transforms(source, cfg.chain, rng)
    t2 = time.perf_counter()
    out_s = execute(source)
    if isinstance(followup, tuple):
        out_f = (execute(followup[0]), execute(followup[1]))
    else:
        out_f = execute(followup)
    verdict = check_relation(records, out_s, out_f, cfg.threshold)
    t3 = time.perf_counter()

    pair_id = f"pair-{index:06d}"
    row = {
        "pair_id": pair_id,
        "iteration": index,
        "seed": seed,
        "n_qubits": source.circuit.n_qubits,
        "n_gates": source.circuit.gate_count(),
        "n_transforms": len(records),
        "transforms": [r.display_name for r in records],
        "backend": source.config.backend_id,
        "opt_level": source.config.opt_level,
        "shots": source.config.shots,
        "source_outcome": _outcome_to_json(out_s),
        "followup_outcome": [_outcome_to_json(o) for o in out_f]
        if isinstance(out_f, tuple)
        else _outcome_to_json(out_f),
        "verdict": verdict_to_json(verdict),
        "timing_ms": {
            "generation": (t1 - t0) * 1e3,
            "transformation": (t2 - t1) * 1e3,
            "execution": (t3 - t2) * 1e3,
        },
    }
    if verdict.is_warning:
        row["warning"] = _warning_record(cfg, index, seed, source, followup, records, verdict)
    return row


def _warning_record(cfg, index, seed, source, followup, records, verdict: Verdict) -> dict:
    from .transforms import record_to_json

    if isinstance(followup, tuple):
        followup_json = {"partition": [program_to_json(f) for f in followup]}
    else:
        followup_json = program_to_json(followup)
    return {
        "schema": WARNING_SCHEMA,
        "pair_id": f"pair-{index:06d}",
        "seed": seed,
        "timestamps": {"iteration": index},
        "campaign": campaign_config_to_json(cfg),
        "source": program_to_json(source),
        "followup": followup_json,
        "transforms": [record_to_json(r) for r in records],
        "verdict": verdict_to_json(verdict),
    }


def _pool_iteration(args: tuple[str, int]) -> dict:
    cfg_json, index = args
    cfg = campaign_config_from_json(json.loads(cfg_json))
    defects.set_active(cfg.defects)
    return run_iteration(cfg, index)


# ---------------------------------------------------------------------------
# Campaign loop
# ---------------------------------------------------------------------------


def run_campaign(cfg: CampaignConfig) -> tuple[CampaignReport, list[dict]]:
    """Run the full campaign; returns the report and the warning records.

    With a pair budget the run is deterministic; with a wall-clock budget
    the number of iterations varies but each pair is still reproducible
    from its embedded seed. If cfg.out_dir is set, the report is written.
    """
    defects.set_active(cfg.defects)
    rows: list[dict] = []
    if cfg.pairs is not None:
        indices = range(cfg.pairs)
        if cfg.workers == 1:
            rows = [run_iteration(cfg, i) for i in indices]
        else:
            cfg_json = json.dumps(campaign_config_to_json(cfg))
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                rows = list(pool.map(_pool_iteration, ((cfg_json, i) for i in indices)))
    else:
        deadline = time.monotonic() + cfg.budget_seconds
        index = 0
        if cfg.workers == 1:
            while time.monotonic() < deadline:
                rows.append(run_iteration(cfg, index))
                index += 1
        else:
            cfg_json = json.dumps(campaign_config_to_json(cfg))
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                while time.monotonic() < deadline:
                    wave = [(cfg_json, index + k) for k in range(cfg.workers)]
                    rows.extend(pool.map(_pool_iteration, wave))
                    index += len(wave)
    report = _build_report(cfg, rows)
    if cfg.out_dir is not None:
        write_report(report, cfg.out_dir, figures=cfg.figures)
    return report, report.warnings


def _build_report(cfg: CampaignConfig, rows: list[dict]) -> CampaignReport:
    tested = len(rows)
    source_crashes = sum(1 for r in rows if r["source_outcome"]["status"] == "crash")
    followup_crashes = sum(
        1
        for r in rows
        if r["source_outcome"]["status"] == "success" and _followup_crashed(r)
    )
    successes = tested - source_crashes - followup_crashes
    dist_diffs = sum(
        1 for r in rows if r["verdict"]["kind"] == DISTRIBUTION_DIFFERENCE
    )
    counts = {
        "tested_pairs": tested,
        "source_crashes": source_crashes,
        "followup_crashes": followup_crashes,
        "successful_executions": successes,
        "distribution_differences": dist_diffs,
    }
    pct = {
        key: (round(100.0 * value / tested, 1) if tested else 0.0)
        for key, value in counts.items()
    }
    transform_stats = _transform_stats(rows)
    warnings = [r["warning"] for r in rows if "warning" in r]
    clusters = cluster_warnings(warnings)
    timing = _timing_stats(rows)
    return CampaignReport(
        config=campaign_config_to_json(cfg),
        counts=counts,
        percentages=pct,
        transform_stats=transform_stats,
        rows=rows,
        warnings=warnings,
        clusters=clusters,
        timing=timing,
    )


def _followup_crashed(row: dict) -> bool:
    outcome = row["followup_outcome"]
    if isinstance(outcome, list):
        return any(o["status"] == "crash" for o in outcome)
    return outcome["status"] == "crash"


def _transform_stats(rows: list[dict]) -> dict:
    from .transforms import DISPLAY_NAMES

    stats = {
        name: {"applied": 0, "in_crashing_pairs_by_chain_length": {}}
        for name in sorted(DISPLAY_NAMES.values())
    }
    for row in rows:
        names = row["transforms"]
        crashing = (
            row["source_outcome"]["status"] == "success" and _followup_crashed(row)
        )
        for name in names:
            stats[name]["applied"] += 1
            if crashing:
                bucket = str(len(names))
                by_len = stats[name]["in_crashing_pairs_by_chain_length"]
                by_len[bucket] = by_len.get(bucket, 0) + 1
    for entry in stats.values():
        entry["in_crashing_pairs_by_chain_length"] = dict(
            sorted(entry["in_crashing_pairs_by_chain_length"].items())
        )
    return stats


def _timing_stats(rows: list[dict]) -> dict:
    phases = ("generation", "transformation", "execution")
    out: dict = {"pairs": len(rows)}
    for phase in phases:
        values = [r["timing_ms"][phase] for r in rows]
        total = float(sum(values))
        out[phase] = {
            "total_ms": total,
            "mean_ms": total / len(values) if values else 0.0,
        }
    return out


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------


def cluster_warnings(warnings: list[dict]) -> list[CrashCluster]:
    """Group crash-difference warnings by abstracted message, largest first."""
    groups: dict[str, list[str]] = {}
    for warning in warnings:
        verdict = warning["verdict"]
        if verdict["kind"] != CRASH_DIFFERENCE:
            continue
        groups.setdefault(verdict["abstracted_message"], []).append(warning["pair_id"])
    clusters = [
        CrashCluster(message, tuple(sorted(members)))
        for message, members in groups.items()
    ]
    return sorted(clusters, key=lambda c: (-c.size, c.abstracted_message))


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------


def summary_json_text(report: CampaignReport) -> str:
    payload = {
        "schema": REPORT_SCHEMA,
        "config": report.config,
        "counts": report.counts,
        "percentages": report.percentages,
        "transform_stats": report.transform_stats,
        "n_warnings": len(report.warnings),
        "n_clusters": len(report.clusters),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _csv_cell(value) -> str:
    text = str(value)
    if "," in text or '"' in text:
        return '"' + text.replace('"', '""') + '"'
    return text


def pairs_csv_text(report: CampaignReport) -> str:
    header = [
        "pair_id", "iteration", "seed", "n_qubits", "n_gates", "n_transforms",
        "transforms", "backend", "opt_level", "shots", "verdict", "crash_phase",
        "p_value",
    ]
    lines = [",".join(header)]
    for row in report.rows:
        verdict = row["verdict"]
        lines.append(
            ",".join(
                _csv_cell(v)
                for v in (
                    row["pair_id"], row["iteration"], row["seed"], row["n_qubits"],
                    row["n_gates"], row["n_transforms"], ";".join(row["transforms"]),
                    row["backend"], row["opt_level"], row["shots"], verdict["kind"],
                    verdict.get("phase", ""), verdict.get("p_value", ""),
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_report(report: CampaignReport, out_dir: str | Path, figures: bool = True) -> None:
    """Write summary.json, clusters.json, timing.json, pairs.csv, warning
    records with per-pair QASM dumps, and (optionally) the figure PNGs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(summary_json_text(report))
    (out / "timing.json").write_text(
        json.dumps(report.timing, sort_keys=True, indent=2) + "\n"
    )
    clusters_payload = [
        {"abstracted_message": c.abstracted_message, "size": c.size, "members": list(c.members)}
        for c in report.clusters
    ]
    (out / "clusters.json").write_text(
        json.dumps(clusters_payload, sort_keys=True, indent=2) + "\n"
    )
    (out / "pairs.csv").write_text(pairs_csv_text(report))
    warnings_dir = out / "warnings"
    qasm_dir = out / "qasm"
    if report.warnings:
        warnings_dir.mkdir(exist_ok=True)
        qasm_dir.mkdir(exist_ok=True)
    for warning in report.warnings:
        pair_id = warning["pair_id"]
        (warnings_dir / f"{pair_id}.json").write_text(canonical_json(warning))
        _dump_qasm(qasm_dir, f"{pair_id}.source", warning["source"])
        followup = warning["followup"]
        if "partition" in followup:
            _dump_qasm(qasm_dir, f"{pair_id}.followup-a", followup["partition"][0])
            _dump_qasm(qasm_dir, f"{pair_id}.followup-b", followup["partition"][1])
        else:
            _dump_qasm(qasm_dir, f"{pair_id}.followup", followup)
    if figures:
        from .report import render_figures

        render_figures(report, out / "figures")


def _dump_qasm(qasm_dir: Path, stem: str, program_json: dict) -> None:
    from .serialize import program_from_json

    from .circuit import substitute_params
    from .errors import MorphqError

    try:
        program = program_from_json(program_json)
        circuit = substitute_params(program.circuit, program.bindings)
        (qasm_dir / f"{stem}.qasm").write_text(emit(circuit))
    except MorphqError as exc:
        (qasm_dir / f"{stem}.qasm.err").write_text(f"{type(exc).__name__}: {exc}\n")


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def replay_warning(record: dict) -> tuple[dict, bool]:
    """Re-run a warning's pair from its embedded seed and campaign config.

    Returns the fresh verdict (as JSON) and whether it matches the record.
    """
    if record.get("schema") != WARNING_SCHEMA:
        raise SchemaMismatch(
            f"expected schema {WARNING_SCHEMA!r}, got {record.get('schema')!r}"
        )
    try:
        cfg = campaign_config_from_json(record["campaign"])
        index = record["timestamps"]["iteration"]
        recorded = record["verdict"]
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"malformed warning record: {exc}") from exc
    before = defects.active()
    try:
        defects.set_active(cfg.defects)
        row = run_iteration(cfg, index)
    finally:
        defects.set_active(before)
    fresh = row["verdict"]
    return fresh, fresh == recorded
