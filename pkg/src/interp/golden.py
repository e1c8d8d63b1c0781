"""
Golden (fault-free) execution and its recorded trace.
"""

import bisect
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from src.config import settings
from src.errors import InvalidBenchmarkError
from src.interp.machine import Checkpoint, Machine, MachineState, Trap
from src.ir.layout import bind_layout, effective_outputs
from src.schemas.injection import DetectorConfig, Scope, ScopeKind
from src.schemas.program import Bank, Opcode, Program, Region, SectionLayout
from src.utils.bits import Word

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceEntry:
    """One executed roi instruction."""

    dyn: int
    pc: int
    reads: Tuple[Word, ...]
    written: Optional[Word]
    instance: Optional[int]


@dataclass
class SectionInstance:
    """One dynamic execution of a static section."""

    index: int
    section: str
    occurrence: int
    begin_pc: int
    end_pc: int
    begin_dyn: int
    inputs: List[Region]
    outputs: List[Region]
    golden_inputs: List[List[Word]]
    entry: Checkpoint
    end_dyn: int = -1
    golden_outputs: List[List[Word]] = field(default_factory=list)
    live_in_regs: Dict[str, Word] = field(default_factory=dict)
    live_in_mem: Dict[int, Word] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.end_dyn - self.begin_dyn + 1

    @property
    def label(self) -> str:
        return f"{self.section}#{self.occurrence}"


@dataclass
class GoldenTrace:
    """Everything injection and sensitivity runs need to know about the golden run."""

    program: Program
    layout: SectionLayout
    entries: List[TraceEntry]
    instances: List[SectionInstance]
    checkpoints: List[Checkpoint]
    total_steps: int
    final_regions: List[Region]
    final_outputs: List[List[Word]]
    pc_counts: Dict[int, int]
    _by_dyn: Dict[int, TraceEntry] = field(default_factory=dict, repr=False)
    _checkpoint_steps: List[int] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self._by_dyn = {entry.dyn: entry for entry in self.entries}
        self._checkpoint_steps = [cp.steps for cp in self.checkpoints]

    @property
    def roi_steps(self) -> int:
        return len(self.entries)

    @property
    def roi_begin_dyn(self) -> int:
        """Dynamic index of the first roi instruction."""
        return self.entries[0].dyn if self.entries else 0

    def entry_at(self, dyn: int) -> TraceEntry:
        return self._by_dyn[dyn]

    def checkpoint_before(self, dyn: int) -> Checkpoint:
        """Latest checkpoint taken at or before dynamic index ``dyn``."""
        i = bisect.bisect_right(self._checkpoint_steps, dyn) - 1
        return self.checkpoints[max(i, 0)]

    def instance_of(self, dyn: int) -> Optional[SectionInstance]:
        entry = self._by_dyn.get(dyn)
        if entry is None or entry.instance is None:
            return None
        return self.instances[entry.instance]

    def scope_entries(self, scope: Scope) -> List[TraceEntry]:
        if scope.kind is ScopeKind.WHOLE:
            return list(self.entries)
        if scope.kind is ScopeKind.UNTESTED:
            return [e for e in self.entries if e.instance is None]
        return [e for e in self.entries if e.instance == scope.instance]

    def scope_steps(self, scope: Scope) -> int:
        """Golden dynamic count the timeout rule compares against.

        A section instance counts its own instructions. The untested set and the
        whole roi run from roi entry to halt, so setup code before the roi is not
        counted.
        """
        if scope.kind is ScopeKind.INSTANCE:
            return self.instances[scope.instance].steps
        return self.total_steps - self.roi_begin_dyn


def read_regions(mem: List[Word], regions: List[Region]) -> List[List[Word]]:
    return [[mem[w] for w in region.words()] for region in regions]


def detector_flags(
    detector: DetectorConfig,
    mem: List[Word],
    banks,
    regions: List[Region],
    golden: List[List[Word]],
    check_all_ranges: bool,
) -> bool:
    """True when the application-level detector fires on a memory state.

    Range checks apply to words of the scope's regions (or everywhere when
    ``check_all_ranges``); the finiteness check applies to float words of the scope.
    """
    if not detector.enabled:
        return False
    scope_words: Set[int] = {w for region in regions for w in region.words()}
    for bound in detector.ranges:
        for word in bound.region.words():
            if not check_all_ranges and word not in scope_words:
                continue
            value = float(mem[word])
            if not bound.lo <= value <= bound.hi:
                return True
    if detector.finite:
        for region, values in zip(regions, golden):
            for word, gold in zip(region.words(), values):
                if banks[word] is Bank.FLOAT:
                    if math.isfinite(float(gold)) and not math.isfinite(float(mem[word])):
                        return True
    return False


def run_golden(
    p: Program,
    layout: SectionLayout,
    detector: Optional[DetectorConfig] = None,
    hard_cap: Optional[int] = None,
    checkpoint_interval: Optional[int] = None,
) -> GoldenTrace:
    """Execute the program fault-free and record its trace.

    Args:
        p: Program to run
        layout: Section layout (bound to the program's markers if not already)
        detector: Detector that must stay silent on the golden outputs
        hard_cap: Maximum number of dynamic instructions
        checkpoint_interval: Dynamic instructions between checkpoints

    Returns:
        The golden trace

    Raises:
        InvalidBenchmarkError: If the run traps, exceeds the cap, or violates the layout
    """
    hard_cap = hard_cap or settings.hard_step_cap
    interval = checkpoint_interval or settings.checkpoint_interval
    if any(sec.begin is None for sec in layout.sections):
        layout = bind_layout(layout, p)
    by_begin = layout.section_by_begin()

    machine = Machine(p)
    state: MachineState = machine.initial_state()
    entries: List[TraceEntry] = []
    instances: List[SectionInstance] = []
    checkpoints: List[Checkpoint] = []
    pc_counts: Counter = Counter()
    occurrences: Counter = Counter()
    current: Optional[SectionInstance] = None
    allowed: Set[int] = set()
    written_regs: Set[str] = set()
    written_mem: Set[int] = set()

    while not state.halted:
        if state.steps >= hard_cap:
            raise InvalidBenchmarkError(f"Golden run exceeds the hard cap of {hard_cap} steps")
        pc, dyn = state.pc, state.steps
        inst = p.instructions[pc] if 0 <= pc < len(p.instructions) else None
        at_begin = inst is not None and inst.opcode is Opcode.SECTION_BEGIN and pc in by_begin

        if dyn % interval == 0 or at_begin:
            checkpoints.append(state.snapshot())
        if at_begin:
            if current is not None:
                raise InvalidBenchmarkError(
                    f"Section '{by_begin[pc].id}' begins inside instance {current.label}"
                )
            sec = by_begin[pc]
            outputs = effective_outputs(sec, layout, p.memory_size)
            current = SectionInstance(
                index=len(instances),
                section=sec.id,
                occurrence=occurrences[sec.id],
                begin_pc=sec.begin,
                end_pc=sec.end,
                begin_dyn=dyn,
                inputs=list(sec.input_regions),
                outputs=outputs,
                golden_inputs=read_regions(state.mem, list(sec.input_regions)),
                entry=checkpoints[-1],
            )
            occurrences[sec.id] += 1
            allowed = {w for region in outputs for w in region.words()}
            written_regs, written_mem = set(), set()

        try:
            effect = machine.step(state)
        except Trap as t:
            raise InvalidBenchmarkError(f"Golden run trapped: {t}")

        if current is not None:
            for reg, value in zip(inst.srcs, effect.reads):
                name = str(reg)
                if name not in written_regs:
                    current.live_in_regs.setdefault(name, value)
            if effect.load_addr is not None and effect.load_addr not in written_mem:
                current.live_in_mem.setdefault(effect.load_addr, state.mem[effect.load_addr])
            if inst.dst is not None:
                written_regs.add(str(inst.dst))
            if effect.store_addr is not None:
                if effect.store_addr not in allowed:
                    raise InvalidBenchmarkError(
                        f"Layout violation: instance {current.label} stores to word "
                        f"{effect.store_addr} outside its effective outputs (pc {pc})"
                    )
                written_mem.add(effect.store_addr)

        if p.in_roi(pc):
            entries.append(
                TraceEntry(
                    dyn=dyn,
                    pc=pc,
                    reads=effect.reads,
                    written=effect.written,
                    instance=current.index if current is not None else None,
                )
            )
            pc_counts[pc] += 1
        elif current is not None:
            raise InvalidBenchmarkError(
                f"Instance {current.label} executes pc {pc} outside the roi"
            )

        if inst.opcode is Opcode.SECTION_END and current is not None:
            if pc != current.end_pc:
                raise InvalidBenchmarkError(f"Unmatched section-end at pc {pc}")
            current.end_dyn = dyn
            current.golden_outputs = read_regions(state.mem, current.outputs)
            instances.append(current)
            current = None

    if current is not None:
        raise InvalidBenchmarkError(f"Program halts inside instance {current.label}")

    final_regions = list(layout.final_outputs)
    final_outputs = read_regions(state.mem, final_regions)
    if detector is not None and detector_flags(
        detector, state.mem, p.banks, final_regions, final_outputs, check_all_ranges=True
    ):
        raise InvalidBenchmarkError("Detector fires on the golden outputs")

    trace = GoldenTrace(
        program=p,
        layout=layout,
        entries=entries,
        instances=instances,
        checkpoints=checkpoints,
        total_steps=state.steps,
        final_regions=final_regions,
        final_outputs=final_outputs,
        pc_counts=dict(pc_counts),
    )
    logger.info(
        f"Golden run: {trace.total_steps} steps, {trace.roi_steps} in roi, "
        f"{len(instances)} section instances"
    )
    return trace
