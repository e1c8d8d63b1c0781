"""
Single-bitflip injection runs and parallel campaigns.

Every run restores the nearest golden checkpoint at or before the site, replays
fault-free up to the site, flips the requested bit and continues to the end of
its scope. Results are pure functions of (program, trace, site), so campaigns can
fan out over worker processes and merge by site id.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from src.errors import TraceMismatchError
from src.interp.golden import GoldenTrace, SectionInstance, detector_flags
from src.interp.machine import Machine, MachineState, Trap
from src.interp.sites import group_by_pilot
from src.schemas.injection import (
    DetectorConfig,
    ErrorSite,
    Outcome,
    OutcomeRecord,
    Scope,
    ScopeKind,
)
from src.schemas.program import Opcode, Region
from src.utils.bits import Word, magnitude

logger = logging.getLogger(__name__)

TIMEOUT_FACTOR = 5

Classified = Tuple[Outcome, Tuple[float, ...]]


@dataclass(frozen=True)
class ReplayResult:
    """Outcomes of one replay at the section boundary and at program end."""

    section: Optional[Classified]
    final: Optional[Classified]


class Injector:
    """Replays a golden trace with one injected bitflip."""

    def __init__(self, trace: GoldenTrace, detector: Optional[DetectorConfig] = None) -> None:
        self.trace = trace
        self.detector = detector or DetectorConfig()
        self.machine = Machine(trace.program)

    def _classify(
        self,
        state: MachineState,
        regions: List[Region],
        golden: List[List[Word]],
        check_all_ranges: bool,
    ) -> Classified:
        if detector_flags(
            self.detector, state.mem, self.machine.banks, regions, golden, check_all_ranges
        ):
            return Outcome.DETECTED, ()
        banks = self.machine.banks
        r = tuple(
            max(
                (magnitude(state.mem[w], g, banks[w]) for w, g in zip(region.words(), values)),
                default=0.0,
            )
            for region, values in zip(regions, golden)
        )
        if all(x == 0.0 for x in r):
            return Outcome.MASKED, r
        return Outcome.SDC, r

    def _classify_section(self, state: MachineState, inst: SectionInstance) -> Classified:
        return self._classify(state, inst.outputs, inst.golden_outputs, check_all_ranges=False)

    def _classify_final(self, state: MachineState) -> Classified:
        return self._classify(
            state, self.trace.final_regions, self.trace.final_outputs, check_all_ranges=True
        )

    def _advance_to(self, site: ErrorSite) -> MachineState:
        state = self.trace.checkpoint_before(site.dyn).restore()
        try:
            while state.steps < site.dyn:
                self.machine.step(state)
        except Trap as t:
            raise TraceMismatchError(f"Fault-free replay trapped before site {site.id}: {t}")
        if state.pc != site.pc:
            raise TraceMismatchError(
                f"Site {site.id} expects pc {site.pc} at dyn {site.dyn}, "
                f"replay reached pc {state.pc}"
            )
        operand = self.trace.program.instructions[state.pc].operand(site.slot)
        if operand is None or str(operand) != site.reg:
            raise TraceMismatchError(f"Site {site.id}: operand {site.slot.value} is not {site.reg}")
        return state

    def replay(self, site: ErrorSite, section: bool = True, final: bool = False) -> ReplayResult:
        """Inject one site and classify its outcome.

        Args:
            site: Site to inject
            section: Classify at the end of the site's section instance
            final: Classify at program halt against the final outputs

        Returns:
            The requested classifications (None where not requested or not applicable)

        Raises:
            TraceMismatchError: If the site cannot be located in the replay
        """
        instance = self.trace.instance_of(site.dyn)
        want_section = section and instance is not None
        section_result: Optional[Classified] = None
        final_result: Optional[Classified] = None

        state = self._advance_to(site)
        section_limit = TIMEOUT_FACTOR * instance.steps if instance is not None else 0
        final_limit = (
            self.trace.roi_begin_dyn + TIMEOUT_FACTOR * self.trace.scope_steps(Scope.whole())
        )

        try:
            effect = self.machine.step(state, (site.slot, site.bit))
            while True:
                if want_section and section_result is None:
                    if effect.opcode is Opcode.SECTION_END or state.halted:
                        section_result = self._classify_section(state, instance)
                    elif state.steps - instance.begin_dyn > section_limit:
                        section_result = (Outcome.TIMEOUT, ())
                    if section_result is not None and not final:
                        break
                if final:
                    if state.halted:
                        final_result = self._classify_final(state)
                        break
                    if state.steps > final_limit:
                        final_result = (Outcome.TIMEOUT, ())
                        break
                elif not want_section:
                    break
                effect = self.machine.step(state)
        except Trap:
            if want_section and section_result is None:
                section_result = (Outcome.CRASH, ())
            if final:
                final_result = (Outcome.CRASH, ())
        return ReplayResult(section=section_result, final=final_result)

    def inject_and_run(self, site: ErrorSite, scope: Scope) -> OutcomeRecord:
        """Inject one site and classify it against its scope's outputs.

        Section-instance scopes stop at the instance's section-end; the untested set
        and the whole roi run to halt and compare final outputs.
        """
        if scope.kind is ScopeKind.INSTANCE:
            if self.trace.entry_at(site.dyn).instance != scope.instance:
                raise TraceMismatchError(f"Site {site.id} is not in {scope}")
            outcome, r = self.replay(site, section=True, final=False).section
        else:
            outcome, r = self.replay(site, section=False, final=True).final
        return OutcomeRecord(site=site, outcome=outcome, r=r)


_worker: Optional[Injector] = None


def _init_worker(trace: GoldenTrace, detector: DetectorConfig) -> None:
    global _worker
    _worker = Injector(trace, detector)


def _replay_chunk(
    chunk: List[ErrorSite], section: bool, final: bool
) -> List[Tuple[int, ReplayResult]]:
    return [(site.id, _worker.replay(site, section=section, final=final)) for site in chunk]


def _chunks(sites: List[ErrorSite], jobs: int) -> List[List[ErrorSite]]:
    count = max(1, min(len(sites), jobs * 8))
    size = -(-len(sites) // count)
    return [sites[i : i + size] for i in range(0, len(sites), size)]


def replay_sites(
    trace: GoldenTrace,
    sites: List[ErrorSite],
    detector: Optional[DetectorConfig] = None,
    section: bool = True,
    final: bool = False,
    jobs: int = 1,
) -> Dict[int, ReplayResult]:
    """Replay many sites, serially or over a process pool, keyed by site id."""
    detector = detector or DetectorConfig()
    results: Dict[int, ReplayResult] = {}
    if not sites:
        return results
    if jobs <= 1 or len(sites) < 2:
        injector = Injector(trace, detector)
        for site in sites:
            results[site.id] = injector.replay(site, section=section, final=final)
        return dict(sorted(results.items()))

    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(trace, detector)
    ) as executor:
        futures = [
            executor.submit(_replay_chunk, chunk, section, final)
            for chunk in _chunks(sites, jobs)
        ]
        for future in futures:
            results.update(future.result())
    return dict(sorted(results.items()))


def expand_outcomes(
    sites: List[ErrorSite], injected: Dict[int, Classified]
) -> Dict[int, OutcomeRecord]:
    """Attach outcomes to injected sites and copy pilot outcomes onto pruned members."""
    by_id = {site.id: site for site in sites}
    records: Dict[int, OutcomeRecord] = {}
    for pilot_id, members in group_by_pilot(sites).items():
        outcome, r = injected[pilot_id]
        record = OutcomeRecord(site=by_id[pilot_id], outcome=outcome, r=r)
        records[pilot_id] = record
        for member in members:
            records[member.id] = record.inferred_for(member)
    return dict(sorted(records.items()))


def run_campaign(
    trace: GoldenTrace,
    sites: List[ErrorSite],
    scope: Scope,
    detector: Optional[DetectorConfig] = None,
    jobs: int = 1,
) -> Dict[int, OutcomeRecord]:
    """Inject every pilot or individual site of a scope and infer the pruned ones.

    Args:
        trace: Golden trace
        sites: Sites from ``enumerate_sites`` for the same scope
        scope: Section instance (classified at section end) or untested/whole roi
            (classified at program end)
        detector: Application-level detector
        jobs: Worker processes

    Returns:
        One OutcomeRecord per site, ordered by site id
    """
    section = scope.kind is ScopeKind.INSTANCE
    injected_sites = [site for site in sites if site.injected]
    replays = replay_sites(
        trace, injected_sites, detector, section=section, final=not section, jobs=jobs
    )
    injected = {
        sid: (result.section if section else result.final) for sid, result in replays.items()
    }
    records = expand_outcomes(sites, injected)
    logger.info(f"Campaign over {scope}: {len(injected_sites)} runs, {len(records)} sites")
    return records
