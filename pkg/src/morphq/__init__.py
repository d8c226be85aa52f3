"""morphq: metamorphic testing toolkit for quantum circuit toolchains.

Generates random valid quantum programs, derives follow-up programs via
ten quantum-specific metamorphic transformations, executes both on bundled
simulator backends through a mini-transpiler, and reports crash
differences and statistically significant output-distribution differences.
"""

from .backend import (
    Crash,
    ExecutionOutcome,
    OutputDistribution,
    Success,
    execute,
    registered_backends,
    sample,
    simulate,
)
from .campaign import CampaignConfig, CampaignReport, run_campaign, write_report
from .circuit import (
    Circuit,
    Composite,
    CouplingMap,
    ExecConfig,
    Gate,
    Measure,
    Program,
    Symbol,
    interaction_components,
    inverse_circuit,
)
from .compare import Verdict, check_relation, ks_two_sample
from .gates import GateSpec, build_gate_catalog
from .generator import GenConfig, estimate_shots, generate_program, new_rng
from .transforms import TransformChainPolicy, TransformRecord, chain_transforms

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig",
    "CampaignReport",
    "Circuit",
    "Composite",
    "CouplingMap",
    "Crash",
    "ExecConfig",
    "ExecutionOutcome",
    "Gate",
    "GateSpec",
    "GenConfig",
    "Measure",
    "OutputDistribution",
    "Program",
    "Success",
    "Symbol",
    "TransformChainPolicy",
    "TransformRecord",
    "Verdict",
    "build_gate_catalog",
    "chain_transforms",
    "check_relation",
    "estimate_shots",
    "execute",
    "generate_program",
    "interaction_components",
    "inverse_circuit",
    "ks_two_sample",
    "new_rng",
    "registered_backends",
    "run_campaign",
    "sample",
    "simulate",
    "write_report",
]
