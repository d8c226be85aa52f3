"""Matplotlib figure rendering for campaign reports.

Four PNGs accompany the delimited/JSON output: the qubit/gate density of
the generated programs, how often each transformation is involved in
crashing pairs (broken down by chain length), mean time per pipeline
phase, and the crash cluster sizes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_CHAIN_COLORS = ["#c62828", "#ef9a9a", "#9e9e9e", "#212121"]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_figures(report, out_dir: str | Path) -> list[Path]:
    """Render all report figures; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plt = _pyplot()
    written = [
        _fig_program_density(plt, report, out / "program_density.png"),
        _fig_transform_involvement(plt, report, out / "transform_involvement.png"),
        _fig_timing(plt, report, out / "timing_breakdown.png"),
        _fig_clusters(plt, report, out / "cluster_sizes.png"),
    ]
    return written


def _fig_program_density(plt, report, path: Path) -> Path:
    qubits = [row["n_qubits"] for row in report.rows]
    gates = [row["n_gates"] for row in report.rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    if qubits:
        q_max, g_max = max(qubits), max(gates)
        hist = np.zeros((q_max + 1, g_max + 1))
        for q, g in zip(qubits, gates):
            hist[q, g] += 1
        im = ax.imshow(hist, origin="lower", aspect="auto", cmap="Blues")
        fig.colorbar(im, ax=ax, label="programs")
    ax.set_xlabel("number of gates")
    ax.set_ylabel("number of qubits")
    ax.set_title("Generated program characteristics")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _fig_transform_involvement(plt, report, path: Path) -> Path:
    stats = report.transform_stats
    names = sorted(stats)
    tested = max(report.counts["tested_pairs"], 1)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    bottoms = np.zeros(len(names))
    for length in ("1", "2", "3", "4"):
        values = np.array(
            [
                stats[n]["in_crashing_pairs_by_chain_length"].get(length, 0)
                for n in names
            ],
            dtype=float,
        )
        values = 100.0 * values / tested
        color = _CHAIN_COLORS[int(length) - 1]
        ax.barh(names, values, left=bottoms, color=color, label=f"chain length {length}")
        bottoms += values
    ax.set_xlabel("% of tested pairs crashing with this transformation involved")
    ax.set_title("Transformation involvement in crashes")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _fig_timing(plt, report, path: Path) -> Path:
    phases = ("generation", "transformation", "execution")
    means = [report.timing[p]["mean_ms"] for p in phases]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(phases, means, color=["#1565c0", "#43a047", "#ef6c00"])
    ax.set_ylabel("mean time per pair (ms)")
    ax.set_title("Time spent per component")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _fig_clusters(plt, report, path: Path) -> Path:
    clusters = report.clusters[:15]
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.45 * len(clusters) + 1.2)))
    if clusters:
        labels = [
            c.abstracted_message[:60] + ("..." if len(c.abstracted_message) > 60 else "")
            for c in clusters
        ]
        sizes = [c.size for c in clusters]
        ax.barh(labels[::-1], sizes[::-1], color="#6a1b9a")
    ax.set_xlabel("warnings in cluster")
    ax.set_title("Crash clusters by abstracted message")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
