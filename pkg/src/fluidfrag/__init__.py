"""Fermionic Hamiltonian fragmentation with fluid one-electron repartitioning."""

from .fluid import RepartitionSolution, Variant, apply_repartition, iterate
from .fock import BACKEND, ProxyKind, ProxyState, SectorBasis, ground_state
from .fragments import Fragment, FragmentSet, gfro_decompose, lr_decompose
from .metrics import MeasurementReport, ShotSimulator, exact_report, lcu_l1_bound
from .pipeline import PipelineConfig, System, emit_table, run_pipeline
from .tensors import parse_fcidump, read_fcidump, to_chemist

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Fragment",
    "FragmentSet",
    "MeasurementReport",
    "PipelineConfig",
    "ProxyKind",
    "ProxyState",
    "RepartitionSolution",
    "SectorBasis",
    "ShotSimulator",
    "System",
    "Variant",
    "apply_repartition",
    "emit_table",
    "exact_report",
    "gfro_decompose",
    "ground_state",
    "iterate",
    "lcu_l1_bound",
    "lr_decompose",
    "parse_fcidump",
    "read_fcidump",
    "run_pipeline",
    "to_chemist",
]
