"""Campaign runner: determinism, reports, clustering, replay, workers."""

import json
from pathlib import Path

import pytest

from morphq import defects
from morphq.campaign import (
    CampaignConfig,
    campaign_config_from_json,
    campaign_config_to_json,
    cluster_warnings,
    iteration_seed,
    replay_warning,
    run_campaign,
    run_iteration,
    summary_json_text,
    write_report,
)
from morphq.errors import SchemaMismatch
from morphq.generator import GenConfig
from morphq.transforms import TransformChainPolicy


def small_config(**overrides) -> CampaignConfig:
    defaults = dict(
        gen=GenConfig(seed=2024, max_qubits=4, max_gates=8),
        chain=TransformChainPolicy(4),
        pairs=60,
        figures=False,
    )
    defaults.update(overrides)
    return CampaignConfig(**defaults)


@pytest.fixture(scope="module")
def small_run():
    report, warnings = run_campaign(small_config())
    return report, warnings


class TestCounts:
    def test_partition_of_tested_pairs(self, small_run):
        report, _ = small_run
        c = report.counts
        assert c["tested_pairs"] == 60
        assert (
            c["source_crashes"] + c["followup_crashes"] + c["successful_executions"]
            == c["tested_pairs"]
        )
        assert c["distribution_differences"] <= c["successful_executions"]

    def test_no_source_crashes(self, small_run):
        report, _ = small_run
        assert report.counts["source_crashes"] == 0

    def test_percentages_consistent(self, small_run):
        report, _ = small_run
        for key, value in report.counts.items():
            expected = round(100.0 * value / report.counts["tested_pairs"], 1)
            assert report.percentages[key] == expected


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            report, _ = run_campaign(small_config(pairs=40))
            write_report(report, out, figures=False)
        assert (out_a / "summary.json").read_bytes() == (out_b / "summary.json").read_bytes()
        assert (out_a / "pairs.csv").read_bytes() == (out_b / "pairs.csv").read_bytes()
        assert (out_a / "clusters.json").read_bytes() == (out_b / "clusters.json").read_bytes()
        warn_a = sorted(p.name for p in (out_a / "warnings").glob("*.json")) \
            if (out_a / "warnings").exists() else []
        warn_b = sorted(p.name for p in (out_b / "warnings").glob("*.json")) \
            if (out_b / "warnings").exists() else []
        assert warn_a == warn_b
        for name in warn_a:
            assert (out_a / "warnings" / name).read_bytes() == (
                out_b / "warnings" / name
            ).read_bytes()

    def test_worker_count_does_not_change_results(self):
        report_1, _ = run_campaign(small_config(pairs=16))
        report_2, _ = run_campaign(small_config(pairs=16, workers=2))
        assert summary_json_text(report_1) == summary_json_text(report_2)

    def test_iteration_seeds_are_distinct(self):
        seeds = {iteration_seed(2024, i) for i in range(1000)}
        assert len(seeds) == 1000

    def test_iteration_independence(self):
        cfg = small_config()
        row_a = run_iteration(cfg, 17)
        row_b = run_iteration(cfg, 17)
        row_a.pop("timing_ms"), row_b.pop("timing_ms")
        assert row_a == row_b


class TestReportFiles:
    def test_layout(self, tmp_path, small_run):
        report, warnings = small_run
        out = tmp_path / "report"
        write_report(report, out, figures=False)
        assert (out / "summary.json").exists()
        assert (out / "timing.json").exists()
        assert (out / "clusters.json").exists()
        assert (out / "pairs.csv").exists()
        payload = json.loads((out / "summary.json").read_text())
        assert payload["schema"] == "morphq-report/1"
        csv_lines = (out / "pairs.csv").read_text().splitlines()
        assert len(csv_lines) == 1 + report.counts["tested_pairs"]
        for warning in warnings:
            pair_id = warning["pair_id"]
            assert (out / "warnings" / f"{pair_id}.json").exists()
            qasm_dir = out / "qasm"
            assert (qasm_dir / f"{pair_id}.source.qasm").exists() or (
                qasm_dir / f"{pair_id}.source.qasm.err"
            ).exists()

    def test_empty_campaign(self, tmp_path):
        report, warnings = run_campaign(small_config(pairs=0))
        assert report.counts["tested_pairs"] == 0 and not warnings
        out = tmp_path / "empty"
        write_report(report, out, figures=False)
        assert json.loads((out / "summary.json").read_text())["n_warnings"] == 0
        assert not (out / "warnings").exists()

    def test_figures_rendered_when_enabled(self, tmp_path, small_run):
        report, _ = small_run
        out = tmp_path / "with-figures"
        write_report(report, out, figures=True)
        figures = sorted(p.name for p in (out / "figures").glob("*.png"))
        assert figures == [
            "cluster_sizes.png",
            "program_density.png",
            "timing_breakdown.png",
            "transform_involvement.png",
        ]

    def test_timing_has_three_phases(self, small_run):
        report, _ = small_run
        for phase in ("generation", "transformation", "execution"):
            assert report.timing[phase]["mean_ms"] >= 0.0


class TestClustering:
    def test_cluster_sizes_sum_to_crash_warnings(self, small_run):
        report, warnings = small_run
        crash_count = sum(
            1 for w in warnings if w["verdict"]["kind"] == "crash_difference"
        )
        assert sum(c.size for c in report.clusters) == crash_count

    def test_same_abstraction_groups_together(self):
        def fake(pair_id, message):
            return {
                "pair_id": pair_id,
                "verdict": {
                    "kind": "crash_difference",
                    "abstracted_message": message,
                },
            }

        warnings = [
            fake("pair-000001", "Duplicate declaration for gate <ID>"),
            fake("pair-000002", "Duplicate declaration for gate <ID>"),
            fake("pair-000003", "other"),
        ]
        clusters = cluster_warnings(warnings)
        assert [c.size for c in clusters] == [2, 1]
        assert clusters[0].members == ("pair-000001", "pair-000002")

    def test_no_crashes_no_clusters(self):
        assert cluster_warnings([]) == []


class TestReplay:
    def test_replay_reproduces_verdicts(self, small_run):
        _, warnings = small_run
        assert warnings, "expected at least one warning in the seeded run"
        for warning in warnings[:5]:
            fresh, matches = replay_warning(warning)
            assert matches, (warning["pair_id"], fresh, warning["verdict"])

    def test_replay_with_defect_campaign(self):
        cfg = small_config(
            pairs=120,
            gen=GenConfig(seed=77, max_qubits=4, max_gates=10),
            defects=(defects.TRANSLATE_MISSING_ID_RULE,),
        )
        report, warnings = run_campaign(cfg)
        defects.disable_all()
        hits = [
            w
            for w in warnings
            if "no decomposition rule" in (w["verdict"].get("abstracted_message") or "")
        ]
        assert hits, "seeded defect produced no warnings in 120 pairs"
        fresh, matches = replay_warning(hits[0])
        assert matches
        assert not defects.active()  # replay restores the defect state

    def test_corrupt_record_rejected(self):
        with pytest.raises(SchemaMismatch):
            replay_warning({"schema": "bogus"})
        with pytest.raises(SchemaMismatch):
            replay_warning({"schema": "morphq-warning/1", "campaign": {}})


def test_config_json_roundtrip():
    cfg = small_config(defects=(defects.STRICT_BIND_CHECK,))
    back = campaign_config_from_json(campaign_config_to_json(cfg))
    assert back.gen == cfg.gen
    assert back.chain == cfg.chain
    assert back.defects == cfg.defects


def test_config_validation():
    with pytest.raises(ValueError):
        CampaignConfig(pairs=10, budget_seconds=5.0)
    with pytest.raises(ValueError):
        CampaignConfig()
    with pytest.raises(ValueError):
        CampaignConfig(pairs=10, workers=0)


def test_budget_mode_runs_some_pairs():
    cfg = CampaignConfig(
        gen=GenConfig(seed=5, max_qubits=3, max_gates=5),
        pairs=None,
        budget_seconds=1.0,
        figures=False,
    )
    report, _ = run_campaign(cfg)
    assert report.counts["tested_pairs"] >= 1
