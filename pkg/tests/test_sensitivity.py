"""
Tests for Lipschitz-constant estimation.
"""

import copy

import numpy as np
import pytest
from conftest import INDEXED_ASM, INDEXED_LAYOUT, asm

from src.errors import SensitivityError
from src.interp import run_golden
from src.ir import load_layout
from src.schemas.configs import PerturbationPattern, SensitivityConfig
from src.sensitivity import estimate_spec, symbol_name, totalize
from src.sensitivity.estimator import _choose, _pattern


SQUARE_ASM = """
.mem 0 7 float 2.0
.entry start
.roi start finish
.section square square_begin square_end

start:
square_begin: section-begin
    load f0, [0]
    fmul f1, f0, f0
    store f1, [5]
square_end: section-end
finish:
    halt
"""

SQUARE_LAYOUT = {
    "sections": [
        {
            "id": "square",
            "inputs": [{"name": "i", "addr": 0, "len": 1, "bank": "float"}],
            "outputs": [{"name": "o", "addr": 5, "len": 1, "bank": "float"}],
        }
    ],
    "outputs": [{"name": "o", "addr": 5, "len": 1, "bank": "float"}],
    "dataflow": [{"from": [0, "o"], "to": ["final", "o"]}],
}

def config(**kwargs):
    return SensitivityConfig(**{"samples": 20, "seed": 3, **kwargs})


class TestEstimate:
    def test_product_section(self, pipeline_trace):
        spec = estimate_spec(pipeline_trace, 0, config(pattern=PerturbationPattern.SINGLE))
        assert spec.inputs == ("x",)
        assert spec.outputs == ("p",)
        assert spec.K[0][0] == pytest.approx(2.0, rel=1e-6)
        assert spec.samples == 20
        assert spec.discarded == 0

    def test_joint_perturbation_bounds_cross_terms(self, pipeline_trace):
        spec = estimate_spec(pipeline_trace, 0, config(pattern=PerturbationPattern.ALL))
        assert 2.0 < spec.K[0][0] < 3.6

    def test_additive_section(self, pipeline_trace):
        spec = estimate_spec(pipeline_trace, 1, config())
        assert spec.section == "shift"
        assert spec.K[0][0] == pytest.approx(1.0, rel=1e-6)

    def test_square_is_bounded_by_its_derivative(self):
        program = asm(SQUARE_ASM)
        trace = run_golden(program, load_layout(SQUARE_LAYOUT, program))
        spec = estimate_spec(trace, 0, config(phi_max=0.01, samples=50))
        assert 4.0 <= spec.K[0][0] <= 4.01 + 1e-9

    @pytest.mark.parametrize("pattern", list(PerturbationPattern))
    def test_more_samples_never_lower_k(self, pipeline_trace, pattern):
        estimates = [
            estimate_spec(pipeline_trace, 0, config(pattern=pattern, samples=n)).K[0][0]
            for n in (1, 5, 20, 60)
        ]
        assert estimates == sorted(estimates)
        assert estimates[0] > 0.0

    def test_integer_inputs_move_by_whole_units(self, loop_trace):
        spec = estimate_spec(loop_trace, 0, config())
        assert spec.K == ((1.0,),)

    def test_same_seed_same_spec(self, pipeline_trace):
        first = estimate_spec(pipeline_trace, 0, config(pattern=PerturbationPattern.MIXED))
        second = estimate_spec(pipeline_trace, 0, config(pattern=PerturbationPattern.MIXED))
        assert first == second

    def test_trapping_section_is_unstable(self):
        program = asm(INDEXED_ASM)
        layout = copy.deepcopy(INDEXED_LAYOUT)
        layout["sections"][0]["inputs"] = layout["sections"][0]["inputs"][:1]
        trace = run_golden(program, load_layout(layout, program))
        with pytest.raises(SensitivityError, match="not perturbation-stable"):
            estimate_spec(trace, 0, config(phi_max=100.0))

    def test_totalize_adds_one_symbol_per_output(self, pipeline_trace):
        inst = pipeline_trace.instances[1]
        spec = totalize(estimate_spec(pipeline_trace, 1, config()), inst)
        assert spec.symbols == ("phi[shift#0:q]",)
        assert spec.symbol_of("q") == symbol_name(inst, "q")


class TestPatterns:
    def test_mixed_cycles_through_patterns(self):
        cfg = config(pattern=PerturbationPattern.MIXED)
        assert [_pattern(cfg, d) for d in range(4)] == [
            PerturbationPattern.SINGLE,
            PerturbationPattern.SUBSET,
            PerturbationPattern.ALL,
            PerturbationPattern.SINGLE,
        ]

    @pytest.mark.parametrize("pattern", [PerturbationPattern.SINGLE, PerturbationPattern.SUBSET])
    def test_chosen_elements_are_non_empty(self, pattern):
        rng = np.random.default_rng(0)
        for _ in range(200):
            chosen = _choose(rng, pattern, 5)
            assert 1 <= len(chosen) <= 5
            assert set(chosen) <= set(range(5))
        assert len(_choose(rng, PerturbationPattern.ALL, 5)) == 5
