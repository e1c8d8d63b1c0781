"""
End-to-end analysis pipeline.

golden run → per-instance injection campaigns (cache-aware) → sensitivity
specifications → composition → protection values → selections, optionally
with the monolithic baseline, target adjustment and utility metrics.
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

from src.baseline import (
    GroundTruth,
    adjust_target,
    run_monolithic,
    step_modification,
    utility_report,
)
from src.campaign.store import SectionStore, cache_entry, restore_outcomes, section_key
from src.config import settings
from src.errors import ConfigError, FlipForgeError, LayoutDriftError, LayoutError, PipelineError
from src.interp import GoldenTrace, count_sites, enumerate_sites, replay_sites, run_golden
from src.interp.injector import Classified, expand_outcomes
from src.ir import bind_layout, load_layout, parse_program, print_program, validate_layout
from src.propagation import compose, render
from src.protection import KnapsackTable, compute_values, identity_model
from src.schemas.configs import AnalysisMode, RunConfig
from src.schemas.injection import ErrorSite, OutcomeRecord, Scope
from src.schemas.program import Program, SectionLayout
from src.schemas.protection import ProtectionModel, Selection
from src.schemas.reports import (
    AdjustState,
    CampaignReport,
    InstanceAccount,
    StepMode,
    UtilityReport,
)
from src.schemas.specs import AffineSdcSpec, EndToEndSpec
from src.sensitivity import estimate_spec, totalize
from src.utils.digest import sha256_hex
from src.utils.jsonio import write_json, write_jsonl

logger = logging.getLogger(__name__)


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Annotate component errors with the pipeline stage they occurred in."""
    logger.debug(f"Stage {name}")
    try:
        yield
    except PipelineError:
        raise
    except FlipForgeError as e:
        raise PipelineError(name, e) from e


def load_inputs(config: RunConfig) -> Tuple[Program, SectionLayout]:
    """Parse the program and layout files named by a run configuration.

    Raises:
        ConfigError: If either file is not given or does not exist
        PipelineError: If either file is malformed (stage ``parse`` or ``layout``)
    """
    paths = []
    for field, value in (("program", config.program), ("layout", config.layout)):
        if not value:
            raise ConfigError(f"No {field} file given")
        if not Path(value).is_file():
            raise ConfigError(f"{field.capitalize()} file not found: {value}")
        paths.append(Path(value))
    with stage("parse"):
        program = parse_program(paths[0].read_text(encoding="utf-8"))
    with stage("layout"):
        layout = load_layout(paths[1], program)
    return program, layout


def _check_layout(program: Program, layout: SectionLayout) -> SectionLayout:
    if any(sec.begin is None for sec in layout.sections):
        layout = bind_layout(layout, program)
    diagnostics = validate_layout(program, layout)
    if diagnostics:
        raise LayoutError(
            f"Layout has {len(diagnostics)} problem(s): {diagnostics[0].message}", diagnostics
        )
    return layout


def program_digest(program: Program) -> str:
    """Content digest of a program version (its canonical listing)."""
    return sha256_hex(print_program(program))


class _Compositional:
    """Per-instance results gathered by the compositional analysis."""

    def __init__(self) -> None:
        self.sites: Dict[int, List[ErrorSite]] = {}
        self.outcomes: Dict[int, Dict[int, OutcomeRecord]] = {}
        self.specs: Dict[int, AffineSdcSpec] = {}
        self.accounts: List[InstanceAccount] = []
        self.reanalyzed: List[int] = []
        self.final: Dict[int, Classified] = {}
        self.shared = 0


def _runs(sites: List[ErrorSite]) -> int:
    return sum(1 for site in sites if site.injected)


def _compositional(
    trace: GoldenTrace,
    config: RunConfig,
    store: Optional[SectionStore],
    share_final: bool,
) -> _Compositional:
    """Run (or reuse) every instance campaign and its sensitivity estimate.

    When ``share_final`` is set, each replay of an analyzed instance also
    classifies the final outputs so the monolithic analysis can reuse it.
    """
    result = _Compositional()
    banks = trace.program.banks
    keys: Dict[int, str] = {}
    misses: List[int] = []

    with stage("sites"):
        for inst in trace.instances:
            sites = enumerate_sites(
                trace, Scope.of_instance(inst.index), config.prune, config.sites
            )
            result.sites[inst.index] = sites
            keys[inst.index] = key = section_key(trace, inst, config)
            entry = store.lookup(key, inst, banks) if store is not None else None
            records = restore_outcomes(entry, inst, sites) if entry is not None else None
            if records is None:
                misses.append(inst.index)
                continue
            result.outcomes[inst.index] = records
            result.specs[inst.index] = entry.spec.model_copy(update={"instance": inst.index})

    with stage("inject"):
        pending = [site for i in misses for site in result.sites[i] if site.injected]
        replays = replay_sites(
            trace, pending, config.detector, section=True, final=share_final, jobs=config.jobs
        )
        for i in misses:
            injected = {
                site.id: replays[site.id].section for site in result.sites[i] if site.injected
            }
            result.outcomes[i] = expand_outcomes(result.sites[i], injected)
        if share_final:
            result.final = {sid: replay.final for sid, replay in replays.items()}
            result.shared = len(replays)

    with stage("sensitivity"):
        for i in misses:
            result.specs[i] = estimate_spec(trace, i, config.sensitivity)

    for inst in trace.instances:
        i = inst.index
        runs = _runs(result.sites[i])
        reused = i not in misses
        if not reused and store is not None:
            store.put(cache_entry(keys[i], inst, result.specs[i], result.outcomes[i], runs))
        result.accounts.append(
            InstanceAccount(
                instance=i,
                section=inst.section,
                key=keys[i],
                sites=len(result.sites[i]),
                runs=runs,
                reused=reused,
            )
        )
    result.reanalyzed = misses
    logger.info(
        f"Compositional campaigns: {len(misses)} of {len(trace.instances)} instances analyzed, "
        f"{len(pending)} injection runs"
    )
    return result


def _monolithic(
    trace: GoldenTrace, config: RunConfig, comp: Optional[_Compositional]
) -> Tuple[Dict[int, OutcomeRecord], int]:
    """Whole-roi outcomes, replaying only the sites no shared replay covered."""
    if comp is None:
        records = run_monolithic(trace, config.detector, config.prune, config.sites, config.jobs)
        return records, sum(1 for r in records.values() if r.site.injected)
    sites = enumerate_sites(trace, Scope.whole(), config.prune, config.sites)
    injected = dict(comp.final)
    pending = [site for site in sites if site.injected and site.id not in injected]
    replays = replay_sites(
        trace, pending, config.detector, section=False, final=True, jobs=config.jobs
    )
    injected.update({sid: replay.final for sid, replay in replays.items()})
    return expand_outcomes(sites, injected), len(injected)


def _selections(
    config: RunConfig,
    model: ProtectionModel,
    truth: Optional[GroundTruth],
    mono_model: Optional[ProtectionModel],
    state: Optional[AdjustState],
    step_mode: Optional[StepMode],
) -> Tuple[List[Selection], List[UtilityReport], Optional[AdjustState]]:
    table = KnapsackTable(model)
    selections: List[Selection] = []
    utility: List[UtilityReport] = []
    mono_table = KnapsackTable(mono_model) if mono_model is not None else None
    adjusted: Dict[str, float] = {}

    for v in config.targets:
        if truth is None:
            stored = state.adjusted.get(str(v)) if state is not None else None
            if stored is None:
                selections.append(table.select(v))
            else:
                selections.append(table.select(stored, target=v))
            continue
        v_adj, reached = adjust_target(table, truth, v)
        adjusted[str(v)] = v_adj
        selection = table.select(v_adj, target=v)
        selections.append(selection)
        utility.append(
            utility_report(
                v,
                (v_adj, reached),
                selection,
                table.select(v),
                mono_table.select(v),
                truth,
                config.prune.misprediction_rate,
            )
        )
    if state is not None and step_mode is StepMode.FULL_ADJUST:
        state = state.model_copy(update={"adjusted": adjusted})
    return selections, utility, state


def account(report: CampaignReport) -> Dict[str, Optional[float]]:
    """Run-count speedups of an analysis.

    ``speedup`` is the fresh compositional run count over the runs executed and
    ``monolithic_ratio`` the monolithic run count over the runs executed; both
    are None when nothing was executed.
    """
    executed = report.runs_executed
    return {
        "executed": executed,
        "reused": report.runs_reused,
        "fresh_total": report.fresh_total,
        "speedup": report.fresh_total / executed if executed else None,
        "monolithic_ratio": report.monolithic_runs / executed if executed else None,
    }


def diff_sections(
    old: GoldenTrace, new: GoldenTrace, config: RunConfig
) -> Set[int]:
    """Instances of the new version whose cache key differs from the old version's.

    Raises:
        LayoutDriftError: If the two versions do not declare the same section ids
    """
    old_ids = [sec.id for sec in old.layout.sections]
    new_ids = [sec.id for sec in new.layout.sections]
    if sorted(old_ids) != sorted(new_ids):
        raise LayoutDriftError(
            f"Section ids differ between versions: {sorted(set(old_ids) ^ set(new_ids))}"
        )
    old_keys = {section_key(old, inst, config) for inst in old.instances}
    return {
        inst.index for inst in new.instances if section_key(new, inst, config) not in old_keys
    }


def write_reports(
    out: Path,
    report: CampaignReport,
    e2e: Optional[EndToEndSpec],
    specs: List[AffineSdcSpec],
    model: Optional[ProtectionModel],
    outcomes: List[dict],
) -> None:
    """Write the reports tree of one program version."""
    version = settings.schema_version
    if e2e is not None:
        write_json(
            out / "e2e.json",
            {
                "schema_version": version,
                "forms": e2e.dump(),
                "rendered": render(e2e),
                "specs": specs,
            },
        )
    if model is not None:
        write_json(out / "values.json", {"schema_version": version, "model": model})
    write_json(
        out / "selections.json", {"schema_version": version, "selections": report.selections}
    )
    if report.utility:
        write_json(out / "utility.json", {"schema_version": version, "utility": report.utility})
    write_jsonl(out / "outcomes.jsonl", [{"schema_version": version, **row} for row in outcomes])
    write_json(out / "report.json", report)
    logger.info(f"Reports written to {out}")


def analyze(
    program: Program,
    layout: SectionLayout,
    config: RunConfig,
    store: Optional[SectionStore] = None,
    out_dir: Optional[Union[str, Path]] = None,
) -> CampaignReport:
    """Run the complete analysis of one program version.

    Args:
        program: Parsed program
        layout: Section layout (bound to the program's markers if it is not yet)
        config: Run configuration
        store: Section cache; None disables reuse
        out_dir: Root of the reports tree; reports go to ``<out_dir>/<version>/``

    Returns:
        The campaign report

    Raises:
        PipelineError: Wrapping any component error with its stage name
    """
    with stage("layout"):
        layout = _check_layout(program, layout)
    with stage("golden"):
        detector = config.detector if config.detector.enabled else None
        trace = run_golden(program, layout, detector)

    mode = config.mode
    state: Optional[AdjustState] = None
    step_mode: Optional[StepMode] = None
    if config.adjust_period is not None and mode is not AnalysisMode.MONOLITHIC:
        state = store.load_adjust_state() if store is not None else None
        if state is None or state.p_adj != config.adjust_period:
            state = AdjustState.fresh(config.adjust_period)
        step_mode, state = step_modification(state, program_digest(program))
        mode = (
            AnalysisMode.BOTH if step_mode is StepMode.FULL_ADJUST else AnalysisMode.COMPOSITIONAL
        )

    want_comp = mode is not AnalysisMode.MONOLITHIC
    want_mono = mode is not AnalysisMode.COMPOSITIONAL

    comp: Optional[_Compositional] = None
    e2e: Optional[EndToEndSpec] = None
    specs: List[AffineSdcSpec] = []
    model: Optional[ProtectionModel] = None
    outcome_rows: List[dict] = []

    if want_comp:
        comp = _compositional(trace, config, store, share_final=want_mono)
        specs = [comp.specs[inst.index] for inst in trace.instances]
        with stage("compose"):
            totals = [totalize(comp.specs[inst.index], inst) for inst in trace.instances]
            e2e = compose(trace.layout, totals, [inst.index for inst in trace.instances])
        with stage("values"):
            untested = enumerate_sites(trace, Scope.untested(), config.prune, config.sites)
            model = compute_values(
                comp.outcomes, e2e, config.thresholds, untested, trace, config.sites, comp.sites
            )
        for i in sorted(comp.outcomes):
            for record in comp.outcomes[i].values():
                outcome_rows.append({"scope": f"instance {i}", **record.record()})

    truth: Optional[GroundTruth] = None
    mono_model: Optional[ProtectionModel] = None
    mono_runs = 0
    if want_mono:
        with stage("monolithic"):
            mono, mono_runs = _monolithic(trace, config, comp)
            truth = GroundTruth(trace, mono, config.thresholds, config.sites)
            mono_model = identity_model(trace, mono, config.thresholds, config.sites)
        for record in mono.values():
            outcome_rows.append({"scope": "whole", **record.record()})

    with stage("select"):
        if model is None:
            selections = [KnapsackTable(mono_model).select(v) for v in config.targets]
            utility: List[UtilityReport] = []
        else:
            selections, utility, state = _selections(
                config, model, truth, mono_model, state, step_mode
            )

    report = CampaignReport(
        schema_version=settings.schema_version,
        version=config.version,
        mode=mode.value,
        step_mode=step_mode,
        program_digest=program_digest(program),
        sites_total=count_sites(trace, config.sites),
        monolithic_runs=mono_runs,
        selections=selections,
        utility=utility,
    )
    if comp is not None:
        executed = sum(a.runs for a in comp.accounts if not a.reused)
        reused = sum(a.runs for a in comp.accounts if a.reused)
        report = report.model_copy(
            update={
                "runs_executed": executed,
                "runs_reused": reused,
                "fresh_total": executed + reused,
                "sections_reanalyzed": comp.reanalyzed,
                "shared_runs_saved": comp.shared,
                "instances": comp.accounts,
            }
        )
        summary = account(report)
        report = report.model_copy(
            update={"speedup": summary["speedup"], "monolithic_ratio": summary["monolithic_ratio"]}
        )

    if store is not None and state is not None:
        store.save_adjust_state(state)
    if out_dir is not None:
        with stage("report"):
            write_reports(Path(out_dir) / config.version, report, e2e, specs, model, outcome_rows)
    logger.info(
        f"Analysis {config.version} ({mode.value}): {report.runs_executed} runs executed, "
        f"{report.runs_reused} reused"
    )
    return report
