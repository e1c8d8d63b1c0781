"""
Tests for the end-to-end pipeline, the section cache and incremental re-analysis.
"""

import copy
import json
import math

import pytest
from conftest import LOOP_ASM, LOOP_LAYOUT, PIPELINE_ASM, PIPELINE_LAYOUT, asm, tree

from src.baseline import run_monolithic
from src.benchmarks import golden_trace, load_variant
from src.campaign import (
    SectionStore,
    account,
    analyze,
    diff_sections,
    load_inputs,
    program_digest,
)
from src.config import settings
from src.errors import ConfigError, LayoutDriftError, PipelineError
from src.interp import enumerate_sites, replay_sites, run_golden
from src.ir import load_layout
from src.schemas.configs import AnalysisMode, RunConfig
from src.schemas.injection import Outcome, Scope, SiteConfig
from src.schemas.protection import ProtectionModel
from src.schemas.reports import CampaignReport, StepMode
from src.utils.jsonio import read_json

SHIFTED_ASM = PIPELINE_ASM.replace("ldi f4, 0.5", "ldi f4, 0.75")
RELOCATED_ASM = PIPELINE_ASM.replace("ldi r1, 7", "ldi r1, 7\n    ldi r2, 3")
ALL_REPORTS = {
    "e2e.json",
    "values.json",
    "selections.json",
    "utility.json",
    "outcomes.jsonl",
    "report.json",
}


def run_config(**kwargs):
    return RunConfig(**{"sensitivity": {"samples": 20, "seed": 1}, "jobs": 1, **kwargs})


def run(source, config, store=None, out_dir=None):
    program = asm(source)
    return analyze(program, load_layout(PIPELINE_LAYOUT, program), config, store, out_dir)


def without_accounting(files):
    return {name: data for name, data in files.items() if not name.endswith("report.json")}


class TestAnalyze:
    def test_both_modes_share_replays(self, tmp_path, store):
        report = run(PIPELINE_ASM, run_config(mode=AnalysisMode.BOTH), store, tmp_path)
        assert set(tree(tmp_path / "v0")) == ALL_REPORTS
        assert report.mode == "both"
        assert (report.runs_executed, report.runs_reused, report.fresh_total) == (768, 0, 768)
        assert report.sections_reanalyzed == [0, 1]
        assert report.monolithic_runs == 960
        assert report.shared_runs_saved == 768
        assert report.program_digest == program_digest(asm(PIPELINE_ASM))
        assert report.sites_total == 960
        assert report.speedup == 1.0
        assert report.monolithic_ratio == pytest.approx(1.25)
        assert [u.v_trgt for u in report.utility] == [0.90, 0.95, 0.99, 1.00]

    def test_compositional_reports(self, tmp_path):
        report = run(PIPELINE_ASM, run_config(version="v3"), out_dir=tmp_path)
        assert set(tree(tmp_path / "v3")) == ALL_REPORTS - {"utility.json"}
        assert report.monolithic_runs == 0
        assert report.utility == []
        e2e = read_json(tmp_path / "v3" / "e2e.json")
        assert set(e2e["forms"]) == {"q"}
        assert [spec["section"] for spec in e2e["specs"]] == ["scale", "shift"]

    def test_monolithic_only(self, tmp_path):
        report = run(PIPELINE_ASM, run_config(mode=AnalysisMode.MONOLITHIC), out_dir=tmp_path)
        assert set(tree(tmp_path / "v0")) == {"selections.json", "outcomes.jsonl", "report.json"}
        assert report.runs_executed == 0
        assert report.speedup is None
        assert report.monolithic_runs == 960
        assert len(report.selections) == 4

    def test_values_sum_to_one(self, tmp_path):
        run(PIPELINE_ASM, run_config(), out_dir=tmp_path)
        model = ProtectionModel.model_validate(
            read_json(tmp_path / "v0" / "values.json")["model"]
        )
        assert model.total_raw > 0
        assert math.fsum(e.value for e in model.entries) == pytest.approx(1.0, abs=1e-12)

    def test_outcome_rows_name_their_scope(self, tmp_path):
        run(PIPELINE_ASM, run_config(mode=AnalysisMode.BOTH), out_dir=tmp_path)
        lines = (tmp_path / "v0" / "outcomes.jsonl").read_text().splitlines()
        rows = [json.loads(line) for line in lines]
        assert {row["schema_version"] for row in rows} == {settings.schema_version}
        scopes = [row["scope"] for row in rows]
        assert scopes.count("instance 0") == 384
        assert scopes.count("instance 1") == 384
        assert scopes.count("whole") == 960

    def test_parallel_runs_write_identical_reports(self, tmp_path):
        for jobs in (1, 8):
            config = run_config(mode=AnalysisMode.BOTH, jobs=jobs)
            run(PIPELINE_ASM, config, out_dir=tmp_path / str(jobs))
        assert tree(tmp_path / "1") == tree(tmp_path / "8")

    def test_invalid_layout_names_its_stage(self, pipeline_program):
        data = copy.deepcopy(PIPELINE_LAYOUT)
        data["sections"][0]["inputs"][0]["bank"] = "int"
        with pytest.raises(PipelineError) as info:
            analyze(pipeline_program, load_layout(data, pipeline_program), run_config())
        assert info.value.stage == "layout"
        assert info.value.cause.details[0].code == "bank-mismatch"


class TestCache:
    def test_second_run_reuses_everything(self, store):
        run(PIPELINE_ASM, run_config(), store)
        report = run(PIPELINE_ASM, run_config(), store)
        assert (report.runs_executed, report.runs_reused) == (0, 768)
        assert report.sections_reanalyzed == []
        assert report.speedup is None
        assert all(a.reused for a in report.instances)
        assert [row["section"] for row in store.inspect()] == ["scale", "shift"]

    def test_relocated_sections_are_reused(self, store):
        run(PIPELINE_ASM, run_config(), store)
        report = run(RELOCATED_ASM, run_config(), store)
        assert report.runs_executed == 0
        assert report.runs_reused == 768

    def test_modified_section_is_reanalyzed(self, store):
        run(PIPELINE_ASM, run_config(), store)
        report = run(SHIFTED_ASM, run_config(), store)
        assert report.sections_reanalyzed == [1]
        assert (report.runs_executed, report.runs_reused) == (384, 384)
        assert report.speedup == 2.0
        assert len(store.inspect()) == 3

    def test_incremental_reports_match_a_cold_analysis(self, tmp_path, store):
        run(PIPELINE_ASM, run_config(), store)
        run(SHIFTED_ASM, run_config(version="v1"), store, tmp_path / "warm")
        run(SHIFTED_ASM, run_config(version="v1"), None, tmp_path / "cold")
        warm = without_accounting(tree(tmp_path / "warm"))
        assert warm == without_accounting(tree(tmp_path / "cold"))
        assert len(warm) == 4

    def test_analysis_settings_are_part_of_the_key(self, store):
        run(PIPELINE_ASM, run_config(), store)
        report = run(PIPELINE_ASM, run_config(sites=SiteConfig(bits=(0, 63))), store)
        assert report.sections_reanalyzed == [0, 1]
        assert report.runs_executed == 2 * 12

    def test_stale_golden_outputs_are_ignored(self, store):
        run(PIPELINE_ASM, run_config(), store)
        for row in store.inspect():
            path = store.root / f"{row['key']}.json"
            entry = read_json(path)
            entry["golden_outputs"] = [[99.0]]
            path.write_text(json.dumps(entry))
        report = run(PIPELINE_ASM, run_config(), store)
        assert report.sections_reanalyzed == [0, 1]

    def test_clear(self, store):
        run(PIPELINE_ASM, run_config(), store)
        assert store.clear() == 2
        assert store.inspect() == []
        assert SectionStore(store.root).inspect() == []


class TestAdjustSchedule:
    def test_period_of_two(self, store):
        cfg = run_config(adjust_period=2)
        first = run(PIPELINE_ASM, cfg, store)
        second = run(SHIFTED_ASM, cfg, store)
        third = run(RELOCATED_ASM, cfg, store)

        assert [r.step_mode for r in (first, second, third)] == [
            StepMode.FULL_ADJUST,
            StepMode.INCREMENTAL,
            StepMode.FULL_ADJUST,
        ]
        assert (first.mode, second.mode) == ("both", "compositional")
        assert len(first.utility) == 4
        assert second.utility == []
        assert [s.adjusted_target for s in second.selections] == [
            u.v_trgt_adj for u in first.utility
        ]
        assert store.load_adjust_state().m_adj == 1

    def test_reanalyzing_a_version_keeps_its_mode(self, store):
        cfg = run_config(adjust_period=3)
        run(PIPELINE_ASM, cfg, store)
        run(SHIFTED_ASM, cfg, store)
        again = run(SHIFTED_ASM, cfg, store)
        assert again.step_mode is StepMode.INCREMENTAL
        assert store.load_adjust_state().m_adj == 2


class TestHelpers:
    def test_load_inputs(self, tmp_path):
        prog = tmp_path / "prog.asm"
        layout = tmp_path / "layout.json"
        prog.write_text(PIPELINE_ASM)
        layout.write_text(json.dumps(PIPELINE_LAYOUT))
        program, bound = load_inputs(RunConfig(program=str(prog), layout=str(layout)))
        assert len(program.instructions) == 15
        assert [s.begin for s in bound.sections] == [1, 8]

    def test_load_inputs_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="No program file given"):
            load_inputs(RunConfig(layout="layout.json"))
        with pytest.raises(ConfigError, match="Program file not found"):
            load_inputs(RunConfig(program=str(tmp_path / "x.asm"), layout="layout.json"))
        prog = tmp_path / "prog.asm"
        layout = tmp_path / "layout.json"
        prog.write_text("bogus r1\n")
        layout.write_text(json.dumps(PIPELINE_LAYOUT))
        with pytest.raises(PipelineError) as info:
            load_inputs(RunConfig(program=str(prog), layout=str(layout)))
        assert info.value.stage == "parse"

    def test_diff_sections(self, pipeline_trace):
        config = run_config()
        shifted = asm(SHIFTED_ASM)
        new = run_golden(shifted, load_layout(PIPELINE_LAYOUT, shifted))
        assert diff_sections(pipeline_trace, new, config) == {1}
        assert diff_sections(pipeline_trace, pipeline_trace, config) == set()

    def test_diff_sections_rejects_layout_drift(self, pipeline_trace):
        program = asm(LOOP_ASM)
        other = run_golden(program, load_layout(LOOP_LAYOUT, program))
        with pytest.raises(LayoutDriftError, match="Section ids differ"):
            diff_sections(pipeline_trace, other, run_config())

    def test_account_without_executed_runs(self):
        report = CampaignReport(schema_version=1, version="v0", mode="compositional")
        summary = account(report)
        assert summary["speedup"] is None
        assert summary["monolithic_ratio"] is None

    def test_program_digest(self, pipeline_program):
        assert program_digest(pipeline_program) == program_digest(asm(PIPELINE_ASM))
        assert program_digest(pipeline_program) != program_digest(asm(SHIFTED_ASM))


def test_masker_needs_target_adjustment(suite):
    bench = load_variant(suite, "masker", jobs=1)
    report = analyze(bench.program, bench.layout, bench.config)
    by_target = {u.v_trgt: u for u in report.utility}
    for target in (0.90, 0.95, 0.99):
        assert by_target[target].adjust_reached
        assert by_target[target].v_achv >= target
    assert any(by_target[t].v_achv_unadjusted < t for t in (0.90, 0.95, 0.99))


@pytest.mark.parametrize(
    "name, overrides",
    [
        ("affine", {}),
        ("masker", {}),
        ("hash", {"sites": {"bits": [0, 17, 31, 47, 62, 63]}}),
        pytest.param("lu", {"sites": {"bits": [0, 52, 62]}}, marks=pytest.mark.slow),
        pytest.param("fft", {"sites": {"bits": [0, 30, 52, 62]}}, marks=pytest.mark.slow),
        pytest.param("bscholes", {"sites": {"bits": [0, 52, 62]}}, marks=pytest.mark.slow),
    ],
)
def test_full_protection_is_exact(suite, tmp_path, name, overrides):
    bench = load_variant(suite, name, mode="both", jobs=1, **overrides)
    report = analyze(bench.program, bench.layout, bench.config, out_dir=tmp_path)
    full = next(u for u in report.utility if u.v_trgt == 1.0)
    assert full.v_achv == 1.0
    costs = {s.target: s.cost for s in report.selections}
    assert costs[1.0] >= costs[0.99]
    model = ProtectionModel.model_validate(read_json(tmp_path / "base" / "values.json")["model"])
    if model.total_raw:
        assert math.fsum(e.value for e in model.entries) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.slow
def test_lu_small_modification_is_incremental(suite, tmp_path):
    overrides = {"sites": {"bits": [0, 52, 62]}, "jobs": 4}
    base = load_variant(suite, "lu", **overrides)
    small = load_variant(suite, "lu", "small", **overrides)
    store = SectionStore(tmp_path / "store")
    analyze(base.program, base.layout, base.config, store)
    warm = analyze(small.program, small.layout, small.config, store, tmp_path / "warm")
    analyze(small.program, small.layout, small.config, None, tmp_path / "cold")

    assert warm.sections_reanalyzed == [3, 7]
    assert warm.speedup >= 2.0
    assert without_accounting(tree(tmp_path / "warm")) == without_accounting(
        tree(tmp_path / "cold")
    )


@pytest.mark.slow
def test_duplication_reduces_sdc_fraction(suite):
    bits = SiteConfig(bits=(0, 20, 40, 52, 62, 63))

    def sdc_fraction(variant):
        bench = load_variant(suite, "bscholes", variant)
        trace = golden_trace(bench)
        sites = enumerate_sites(trace, Scope.of_instance(0), cfg=bits)
        replays = replay_sites(
            trace, sites, bench.config.detector, section=False, final=True, jobs=4
        )
        sdc = sum(1 for r in replays.values() if r.final[0] is Outcome.SDC)
        return sdc / len(replays)

    base, guarded = sdc_fraction("base"), sdc_fraction("errdetect")
    assert base > 0
    assert guarded <= 0.5 * base


@pytest.mark.slow
@pytest.mark.parametrize("name", ["lu", "fft", "bscholes", "hash", "masker", "affine"])
def test_benchmark_reports_are_deterministic(suite, tmp_path, name):
    for jobs in (1, 8):
        bench = load_variant(suite, name, mode="both", jobs=jobs, sites={"bits": [62]})
        analyze(bench.program, bench.layout, bench.config, out_dir=tmp_path / str(jobs))
    assert tree(tmp_path / "1") == tree(tmp_path / "8")


def test_monolithic_ground_truth_is_shared(pipeline_trace):
    shared = run(PIPELINE_ASM, run_config(mode=AnalysisMode.BOTH))
    records = run_monolithic(pipeline_trace)
    assert shared.monolithic_runs == len(records)
