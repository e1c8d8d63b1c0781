"""
Deterministic execution, error-site enumeration and injection campaigns.
"""

from src.interp.golden import GoldenTrace, SectionInstance, TraceEntry, run_golden
from src.interp.injector import Injector, ReplayResult, replay_sites, run_campaign
from src.interp.machine import Checkpoint, Machine, MachineState, Trap
from src.interp.sites import count_sites, enumerate_sites

__all__ = [
    "Checkpoint",
    "GoldenTrace",
    "Injector",
    "Machine",
    "MachineState",
    "ReplayResult",
    "SectionInstance",
    "TraceEntry",
    "count_sites",
    "Trap",
    "enumerate_sites",
    "replay_sites",
    "run_campaign",
    "run_golden",
]
