"""
Tests for composing section specifications into end-to-end bounds.
"""

import math

import numpy as np
import pytest

from src.benchmarks import golden_trace, load_variant
from src.errors import ContractViolation, PropagationError
from src.interp import enumerate_sites, replay_sites
from src.propagation import compose, evaluate, render, specialize
from src.schemas.injection import Outcome, Scope
from src.schemas.program import SectionLayout
from src.schemas.specs import AffineForm, TotalSdcSpec
from src.sensitivity import estimate_spec, totalize


def total_spec(instance, section, inputs, outputs, K):
    return TotalSdcSpec(
        instance=instance,
        section=section,
        inputs=inputs,
        outputs=outputs,
        K=K,
        symbols=tuple(f"phi[{section}#0:{o}]" for o in outputs),
    )


@pytest.fixture
def pipeline_specs():
    return [
        total_spec(0, "scale", ("x",), ("p",), ((2.0,),)),
        total_spec(1, "shift", ("p",), ("q",), ((3.0,),)),
    ]


def random_dag(rng, n):
    """Chain-ordered DAG: node j feeds node i > j through input ``in{j}``."""
    edges = [(j, i) for i in range(n) for j in range(i) if rng.random() < 0.4]
    finals = {
        name: [j for j in range(n) if rng.random() < 0.5] for name in ("y0", "y1")
    }
    K = {}
    specs = []
    for i in range(n):
        inputs = tuple(f"in{j}" for j, t in edges if t == i)
        row = tuple(
            0.0 if rng.random() < 0.2 else float(rng.uniform(0.0, 3.0)) for _ in inputs
        )
        K[i] = dict(zip(inputs, row))
        specs.append(total_spec(i, f"s{i}", inputs, ("o",), (row,)))
    layout = SectionLayout.model_validate(
        {
            "sections": [],
            "outputs": [{"name": name, "addr": 0, "len": 1} for name in finals],
            "dataflow": [{"from": [j, "o"], "to": [i, f"in{j}"]} for j, i in edges]
            + [
                {"from": [j, "o"], "to": ["final", name]}
                for name, sources in finals.items()
                for j in sources
            ],
        }
    )
    return layout, specs, edges, finals, K


def topological_order(rng, n, edges):
    """A random execution order that keeps every edge forward."""
    producers = {i: {j for j, t in edges if t == i} for i in range(n)}
    order = []
    while len(order) < n:
        ready = [i for i in range(n) if i not in order and producers[i] <= set(order)]
        order.append(int(rng.choice(ready)))
    return order


def path_coefficients(n, edges, finals, K):
    """Sum over every path of the product of coefficients, by explicit enumeration."""
    successors = {j: [i for s, i in edges if s == j] for j in range(n)}
    result = {name: {} for name in finals}

    def walk(origin, node, product):
        for name, sources in finals.items():
            if node in sources:
                symbol = f"phi[s{origin}#0:o]"
                result[name][symbol] = result[name].get(symbol, 0.0) + product
        for nxt in successors[node]:
            walk(origin, nxt, product * K[nxt][f"in{node}"])

    for origin in range(n):
        walk(origin, origin, 1.0)
    return result


class TestCompose:
    def test_pipeline(self, pipeline_layout, pipeline_specs):
        e2e = compose(pipeline_layout, pipeline_specs)
        assert e2e.outputs == ("q",)
        assert e2e.forms["q"].terms == {"phi[scale#0:p]": 3.0, "phi[shift#0:q]": 1.0}
        assert e2e.instance_symbols == {0: ("phi[scale#0:p]",), 1: ("phi[shift#0:q]",)}
        assert render(e2e) == {"q": "Δ(q) ≤ 3·phi[scale#0:p] + 1·phi[shift#0:q]"}
        assert e2e.dump() == {
            "q": [
                {"symbol": "phi[scale#0:p]", "coeff": 3.0},
                {"symbol": "phi[shift#0:q]", "coeff": 1.0},
            ]
        }

    def test_zero_coefficient_drops_symbol(self, pipeline_layout):
        specs = [
            total_spec(0, "scale", ("x",), ("p",), ((2.0,),)),
            total_spec(1, "shift", ("p",), ("q",), ((0.0,),)),
        ]
        e2e = compose(pipeline_layout, specs)
        assert e2e.forms["q"].terms == {"phi[shift#0:q]": 1.0}

    def test_infinite_coefficients_propagate(self, pipeline_layout):
        specs = [
            total_spec(0, "scale", ("x",), ("p",), ((2.0,),)),
            total_spec(1, "shift", ("p",), ("q",), ((math.inf,),)),
        ]
        e2e = compose(pipeline_layout, specs)
        assert e2e.forms["q"].terms["phi[scale#0:p]"] == math.inf

    def test_output_without_edges_has_empty_bound(self, pipeline_specs):
        layout = SectionLayout.model_validate(
            {"sections": [], "outputs": [{"name": "q", "addr": 5, "len": 1}]}
        )
        e2e = compose(layout, pipeline_specs)
        assert e2e.forms["q"].terms == {}
        assert render(e2e) == {"q": "Δ(q) ≤ 0"}

    def test_padded_output_names_resolve(self):
        specs = [
            total_spec(0, "a", (), ("u+v",), ((),)),
            total_spec(1, "b", ("v",), ("w",), ((3.0,),)),
        ]
        layout = SectionLayout.model_validate(
            {
                "sections": [],
                "outputs": [{"name": "w", "addr": 0, "len": 1}],
                "dataflow": [
                    {"from": [0, "v"], "to": [1, "v"]},
                    {"from": [1, "w"], "to": ["final", "w"]},
                ],
            }
        )
        terms = compose(layout, specs).forms["w"].terms
        assert terms == {"phi[a#0:u+v]": 3.0, "phi[b#0:w]": 1.0}

    @pytest.mark.parametrize(
        "edge, message",
        [
            ({"from": [0, "zz"], "to": [1, "p"]}, "no output 'zz'"),
            ({"from": [0, "p"], "to": [1, "zz"]}, "no input 'zz'"),
            ({"from": [0, "p"], "to": [7, "p"]}, "consumer 7"),
            ({"from": [5, "p"], "to": [1, "p"]}, "producer 5"),
        ],
    )
    def test_dangling_edges(self, pipeline_specs, edge, message):
        layout = SectionLayout.model_validate({"sections": [], "dataflow": [edge]})
        with pytest.raises(PropagationError, match=message):
            compose(layout, pipeline_specs)

    def test_edges_must_point_forward(self, pipeline_layout, pipeline_specs):
        with pytest.raises(PropagationError, match="not forward"):
            compose(pipeline_layout, pipeline_specs, order=[1, 0])

    def test_matches_path_enumeration(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            layout, specs, edges, finals, K = random_dag(rng, n)
            e2e = compose(layout, specs)
            expected = path_coefficients(n, edges, finals, K)
            for name in finals:
                terms = e2e.forms[name].terms
                for symbol in set(terms) | set(expected[name]):
                    want = expected[name].get(symbol, 0.0)
                    assert terms.get(symbol, 0.0) == pytest.approx(want, rel=1e-9, abs=1e-12)

    def test_independent_of_topological_order(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            n = int(rng.integers(2, 9))
            layout, specs, edges, finals, _ = random_dag(rng, n)
            reference = compose(layout, specs)
            order = topological_order(rng, n, edges)
            e2e = compose(layout, [specs[i] for i in order], order=order)
            for name in finals:
                want, got = reference.forms[name], e2e.forms[name]
                assert got.always_infinite == want.always_infinite
                assert set(got.terms) == set(want.terms)
                for symbol, coefficient in want.terms.items():
                    assert got.terms[symbol] == pytest.approx(coefficient, rel=1e-12)


class TestSpecializeAndEvaluate:
    def test_specialize_keeps_own_symbols(self, pipeline_layout, pipeline_specs):
        e2e = compose(pipeline_layout, pipeline_specs)
        assert specialize(e2e, 0)["q"].terms == {"phi[scale#0:p]": 3.0}
        assert specialize(e2e, 1)["q"].terms == {"phi[shift#0:q]": 1.0}
        assert specialize(e2e, None)["q"].always_infinite
        with pytest.raises(PropagationError):
            specialize(e2e, 9)

    def test_evaluate(self):
        form = AffineForm(terms={"a": 2.0, "b": 0.0})
        assert evaluate(form, {"a": 0.25, "b": 1.0}) == 0.5
        assert evaluate(form, {"a": math.inf, "b": math.inf}) == math.inf
        assert evaluate(AffineForm(terms={"b": 0.0}), {"b": math.inf}) == 0.0
        assert evaluate(AffineForm(always_infinite=True), {}) == math.inf
        assert evaluate(AffineForm(), {}) == 0.0

    @pytest.mark.parametrize("phi", [{"a": -1.0}, {"a": math.nan}, {}])
    def test_evaluate_rejects_bad_magnitudes(self, phi):
        with pytest.raises(ContractViolation):
            evaluate(AffineForm(terms={"a": 1.0}), phi)


def test_affine_bounds_are_conservative(suite):
    bench = load_variant(suite, "affine")
    trace = golden_trace(bench)
    specs = [estimate_spec(trace, inst.index, bench.config.sensitivity) for inst in trace.instances]
    assert [spec.K for spec in specs] == [((2.0,),), ((0.25,),), ((0.5,),)]
    totals = [totalize(spec, inst) for spec, inst in zip(specs, trace.instances)]
    e2e = compose(trace.layout, totals)

    for inst in trace.instances:
        forms = specialize(e2e, inst.index)
        symbols = e2e.instance_symbols[inst.index]
        sites = enumerate_sites(trace, Scope.of_instance(inst.index))
        replays = replay_sites(trace, sites, section=True, final=True)
        for sid, replay in replays.items():
            section_outcome, section_r = replay.section
            final_outcome, final_r = replay.final
            if section_outcome not in (Outcome.SDC, Outcome.MASKED):
                continue
            if final_outcome is not Outcome.SDC:
                continue
            bound = evaluate(forms["d"], dict(zip(symbols, section_r)))
            assert bound >= final_r[0] * (1 - 1e-9), f"site {sid}"
