"""
Tests for protection values and minimum-cost selection.
"""

import math

import numpy as np
import pytest

from src.errors import ContractViolation
from src.interp import enumerate_sites
from src.propagation import compose
from src.protection import (
    KnapsackTable,
    compute_values,
    final_sdc_bad,
    identity_model,
    solve_knapsack,
    sweep,
    target_units,
)
from src.protection import knapsack
from src.schemas.injection import Outcome, OutcomeRecord, Scope, SiteConfig
from src.schemas.program import SdcThresholds
from src.schemas.protection import PcValue, ProtectionModel
from src.schemas.specs import TotalSdcSpec

# Outcome per pc for every site of the pipeline's section instances.
HAND_OUTCOMES = {
    2: (Outcome.DETECTED, ()),
    3: (Outcome.CRASH, ()),
    4: (Outcome.SDC, (0.5,)),
    5: (Outcome.SDC, (0.001,)),
    11: (Outcome.SDC, (1.0,)),
}


def make_model(items, total_dynamic=None):
    """Model from (pc, raw, cost) triples."""
    total = sum(raw for _, raw, _ in items)
    entries = tuple(
        PcValue(pc=pc, raw=raw, value=raw / total if total else 0.0, cost=cost)
        for pc, raw, cost in sorted(items)
    )
    return ProtectionModel(
        entries=entries,
        total_raw=total,
        total_dynamic=total_dynamic or sum(cost for _, _, cost in items),
    )


def brute_force_cost(items, need):
    """Cheapest subset reaching ``need`` units, by enumerating every subset sum."""
    raws = np.zeros(1, dtype=np.int64)
    costs = np.zeros(1, dtype=np.int64)
    for _, raw, cost in items:
        raws = np.concatenate([raws, raws + raw])
        costs = np.concatenate([costs, costs + cost])
    return int(costs[raws >= need].min())


@pytest.fixture
def pipeline_e2e(pipeline_layout):
    specs = [
        TotalSdcSpec(
            instance=0,
            section="scale",
            inputs=("x",),
            outputs=("p",),
            K=((2.0,),),
            symbols=("phi[scale#0:p]",),
        ),
        TotalSdcSpec(
            instance=1,
            section="shift",
            inputs=("p",),
            outputs=("q",),
            K=((1.0,),),
            symbols=("phi[shift#0:q]",),
        ),
    ]
    return compose(pipeline_layout, specs)


def hand_outcomes(trace):
    outcomes = {}
    sites = {}
    for inst in trace.instances:
        sites[inst.index] = enumerate_sites(trace, Scope.of_instance(inst.index))
        outcomes[inst.index] = {
            site.id: OutcomeRecord(
                site=site,
                outcome=HAND_OUTCOMES.get(site.pc, (Outcome.MASKED, (0.0,)))[0],
                r=HAND_OUTCOMES.get(site.pc, (Outcome.MASKED, (0.0,)))[1],
            )
            for site in sites[inst.index]
        }
    return outcomes, sites


class TestValues:
    def test_bookkeeping(self, pipeline_trace, pipeline_e2e):
        outcomes, sites = hand_outcomes(pipeline_trace)
        untested = enumerate_sites(pipeline_trace, Scope.untested())
        model = compute_values(
            outcomes, pipeline_e2e, SdcThresholds.uniform(0.01), untested, pipeline_trace,
            sites=sites,
        )
        raw = {e.pc: e.raw for e in model.entries if e.raw}
        assert raw == {0: 64, 4: 192, 7: 128, 11: 192}
        assert model.total_raw == 576
        assert model.total_dynamic == 14
        assert [e.pc for e in model.entries] == list(range(14))
        assert all(e.cost == 1 for e in model.entries)
        assert math.fsum(e.value for e in model.entries) == pytest.approx(1.0)

    def test_threshold_decides_small_errors(self, pipeline_trace, pipeline_e2e):
        outcomes, _ = hand_outcomes(pipeline_trace)
        model = compute_values(
            outcomes, pipeline_e2e, SdcThresholds.uniform(0.0001), [], pipeline_trace
        )
        assert model.by_pc()[5].raw == 64
        loose = compute_values(
            outcomes, pipeline_e2e, SdcThresholds.uniform(1.0), [], pipeline_trace
        )
        assert {e.pc for e in loose.entries if e.raw} == set()

    def test_weight_table_scales_units(self, pipeline_trace, pipeline_e2e):
        outcomes, _ = hand_outcomes(pipeline_trace)
        cfg = SiteConfig(weights={4: "2", 11: "1/2"})
        model = compute_values(
            outcomes, pipeline_e2e, SdcThresholds.uniform(0.01), [], pipeline_trace, cfg
        )
        raw = {e.pc: e.raw for e in model.entries if e.raw}
        assert model.unit_denominator == 2
        assert raw == {4: 768, 11: 192}

    def test_missing_outcomes(self, pipeline_trace, pipeline_e2e):
        outcomes, sites = hand_outcomes(pipeline_trace)
        first = next(iter(outcomes[0]))
        del outcomes[0][first]
        with pytest.raises(ContractViolation, match="no outcome"):
            compute_values(
                outcomes, pipeline_e2e, SdcThresholds(), [], pipeline_trace, sites=sites
            )

    def test_no_bad_sites(self, pipeline_trace, pipeline_e2e):
        outcomes, _ = hand_outcomes(pipeline_trace)
        model = compute_values(
            outcomes, pipeline_e2e, SdcThresholds.uniform(math.inf), [], pipeline_trace
        )
        assert model.total_raw == 0
        assert all(e.value == 0.0 for e in model.entries)
        assert solve_knapsack(model, 0.9).pcs == ()

    def test_identity_model_uses_final_outputs(self, pipeline_trace):
        site = enumerate_sites(pipeline_trace, Scope.whole())[0]
        bad = OutcomeRecord(site=site, outcome=Outcome.SDC, r=(0.5,))
        assert final_sdc_bad(bad, ["q"], SdcThresholds.uniform(0.01))
        assert not final_sdc_bad(bad, ["q"], SdcThresholds(epsilon={"q": 0.5}))
        detected = OutcomeRecord(site=site, outcome=Outcome.DETECTED)
        assert not final_sdc_bad(detected, ["q"], SdcThresholds())
        model = identity_model(pipeline_trace, {site.id: bad}, SdcThresholds.uniform(0.01))
        assert model.by_pc()[site.pc].raw == 1


class TestKnapsack:
    def test_target_units(self):
        assert target_units(0.1, 30) == 3
        assert target_units(0.0, 30) == 0
        assert target_units(1.0, 7) == 7
        assert target_units(0.5, 7) == 4

    @pytest.mark.parametrize("bad", [-0.1, 1.5, math.nan])
    def test_target_outside_unit_interval(self, bad):
        with pytest.raises(ContractViolation):
            target_units(bad, 10)

    def test_optimal_against_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(1, 21))
            raws = rng.integers(0, 10, size=n)
            raws[0] = max(raws[0], 1)
            items = [
                (pc, int(raw), int(rng.integers(1, 6)))
                for pc, raw in zip(rng.permutation(40)[:n].tolist(), raws)
            ]
            model = make_model(items)
            table = KnapsackTable(model)
            for v in (0.0, float(rng.random()), 1.0):
                need = target_units(v, model.total_raw)
                selection = table.select(v)
                assert selection.raw >= need
                assert selection.cost == brute_force_cost(items, need)
                assert list(selection.pcs) == sorted(selection.pcs)

    def test_uniform_cost_scaling_keeps_the_selection(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            items = [(pc, int(rng.integers(1, 10)), int(rng.integers(1, 6))) for pc in range(n)]
            table = KnapsackTable(make_model(items))
            for scale in (2, 7):
                scaled = KnapsackTable(
                    make_model([(pc, raw, cost * scale) for pc, raw, cost in items])
                )
                for v in (0.3, 0.77, 1.0):
                    base, other = table.select(v), scaled.select(v)
                    assert other.pcs == base.pcs
                    assert other.cost == scale * base.cost
                    assert other.normalized_cost == pytest.approx(base.normalized_cost)

    def test_ties_prefer_lower_pcs(self):
        model = make_model([(3, 4, 2), (7, 4, 2)])
        assert solve_knapsack(model, 0.5).pcs == (3,)

    def test_ties_prefer_fewer_instructions(self):
        model = make_model([(1, 5, 2), (2, 3, 1), (3, 2, 1)])
        assert solve_knapsack(model, 0.5).pcs == (1,)

    def test_selection_fields(self):
        model = make_model([(0, 0, 3), (1, 6, 2), (2, 4, 5)], total_dynamic=20)
        selection = solve_knapsack(model, 0.6)
        assert selection.pcs == (1,)
        assert selection.value == pytest.approx(0.6)
        assert selection.normalized_cost == pytest.approx(0.1)
        assert selection.adjusted_target is None
        full = solve_knapsack(model, 1.0)
        assert full.pcs == (1, 2)
        assert full.value == 1.0

    def test_adjusted_selection_reports_both_targets(self):
        table = KnapsackTable(make_model([(1, 6, 2), (2, 4, 5)]))
        selection = table.select(1.0, target=0.9)
        assert (selection.target, selection.adjusted_target) == (0.9, 1.0)

    def test_sweep_costs_grow_with_target(self):
        model = make_model([(pc, pc % 5 + 1, pc % 3 + 1) for pc in range(12)])
        selections = sweep(model, [0.5, 0.9, 0.99, 1.0])
        costs = [s.cost for s in selections]
        assert costs == sorted(costs)
        assert selections[-1].value == 1.0

    def test_table_size_limit(self, monkeypatch):
        monkeypatch.setattr(knapsack, "MAX_TABLE_CELLS", 10)
        with pytest.raises(ContractViolation, match="exceeds"):
            KnapsackTable(make_model([(1, 6, 2), (2, 4, 5)]))
