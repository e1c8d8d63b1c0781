"""
Composition of per-instance SDC specifications into end-to-end bounds.

Forms are affine in the symbolic error variables with constant 0. Products use
the convention 0·∞ = 0: a zero coefficient means the symbol cannot reach the output.
"""

import logging
import math
from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from src.errors import ContractViolation, PropagationError
from src.ir.layout import resolve_output
from src.schemas.program import Endpoint, SectionLayout
from src.schemas.specs import AffineForm, EndToEndSpec, TotalSdcSpec

logger = logging.getLogger(__name__)

Terms = Dict[str, float]


def _mul(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def _add_scaled(acc: Terms, terms: Mapping[str, float], scale: float) -> None:
    for symbol, coeff in terms.items():
        term = _mul(scale, coeff)
        if term != 0.0:
            acc[symbol] = acc.get(symbol, 0.0) + term


def _resolve_output(spec: TotalSdcSpec, region: str) -> str:
    try:
        return resolve_output(region, spec.outputs)
    except KeyError:
        raise PropagationError(
            f"Dangling dataflow edge: instance {spec.instance} ({spec.section}) "
            f"has no output '{region}'"
        ) from None


def compose(
    layout: SectionLayout,
    specs: Sequence[TotalSdcSpec],
    order: Optional[Sequence[int]] = None,
) -> EndToEndSpec:
    """Substitute producer bounds into consumer inputs along the dataflow graph.

    Args:
        layout: Layout holding the dataflow edges and final outputs
        specs: One total specification per section instance
        order: Instance execution order (defaults to ascending instance index)

    Returns:
        Bounds on every final output as affine forms over all symbols

    Raises:
        PropagationError: On dangling or non-forward dataflow edges
    """
    by_instance = {spec.instance: spec for spec in specs}
    order = list(order) if order is not None else sorted(by_instance)
    position = {inst: i for i, inst in enumerate(order)}

    incoming: Dict[Tuple[int, str], List[Endpoint]] = defaultdict(list)
    final_in: Dict[str, List[Endpoint]] = defaultdict(list)
    for edge in layout.dataflow:
        src, dst = edge.source, edge.target
        if src.is_final or src.instance not in by_instance:
            raise PropagationError(
                f"Dangling dataflow edge: no specification for producer {src.instance}"
            )
        _resolve_output(by_instance[src.instance], src.region)
        if dst.is_final:
            final_in[dst.region].append(src)
            continue
        consumer = by_instance.get(dst.instance)
        if consumer is None:
            raise PropagationError(
                f"Dangling dataflow edge: no specification for consumer {dst.instance}"
            )
        if dst.region not in consumer.inputs:
            raise PropagationError(
                f"Dangling dataflow edge: instance {dst.instance} has no input '{dst.region}'"
            )
        if position[src.instance] >= position[dst.instance]:
            raise PropagationError(
                f"Dataflow edge from instance {src.instance} to {dst.instance} is not forward"
            )
        incoming[(dst.instance, dst.region)].append(src)

    bounds: Dict[Tuple[int, str], Terms] = {}
    for inst in order:
        spec = by_instance.get(inst)
        if spec is None:
            raise PropagationError(f"No specification for instance {inst}")
        input_bounds: Dict[str, Terms] = {}
        for m in spec.inputs:
            acc: Terms = {}
            for src in incoming.get((inst, m), []):
                producer = by_instance[src.instance]
                _add_scaled(acc, bounds[(src.instance, _resolve_output(producer, src.region))], 1.0)
            input_bounds[m] = acc
        for k, output in enumerate(spec.outputs):
            acc = {spec.symbols[k]: 1.0}
            for mi, m in enumerate(spec.inputs):
                _add_scaled(acc, input_bounds[m], spec.K[k][mi])
            bounds[(inst, output)] = acc

    forms: Dict[str, AffineForm] = {}
    for region in layout.final_outputs:
        acc = {}
        for src in final_in.get(region.name, []):
            producer = by_instance[src.instance]
            _add_scaled(acc, bounds[(src.instance, _resolve_output(producer, src.region))], 1.0)
        forms[region.name] = AffineForm(terms=acc)

    e2e = EndToEndSpec(
        outputs=tuple(region.name for region in layout.final_outputs),
        forms=forms,
        instance_symbols={inst: by_instance[inst].symbols for inst in order},
    )
    logger.info(f"Composed end-to-end specification over {len(order)} instances")
    return e2e


def specialize(e2e: EndToEndSpec, instance: Optional[int]) -> Dict[str, AffineForm]:
    """Restrict every final-output form to one instance's symbols.

    ``None`` selects the untested set, whose forms are always infinite.

    Raises:
        PropagationError: If the instance is unknown
    """
    if instance is None:
        return {name: AffineForm(always_infinite=True) for name in e2e.outputs}
    if instance not in e2e.instance_symbols:
        raise PropagationError(f"Unknown section instance {instance}")
    own = set(e2e.instance_symbols[instance])
    return {
        name: AffineForm(
            terms={s: c for s, c in e2e.forms[name].terms.items() if s in own}
        )
        for name in e2e.outputs
    }


def evaluate(form: AffineForm, phi: Mapping[str, float]) -> float:
    """Σ coeff·φ with +∞ absorbing and 0·∞ = 0.

    Raises:
        ContractViolation: If a φ is negative or missing
    """
    if form.always_infinite:
        return math.inf
    total = 0.0
    for symbol, coeff in form.terms.items():
        if symbol not in phi:
            raise ContractViolation(f"No value for symbol {symbol}")
        value = phi[symbol]
        if value < 0 or math.isnan(value):
            raise ContractViolation(f"Negative SDC magnitude for {symbol}: {value}")
        total += _mul(coeff, value)
    return total


def phi_values(symbols: Iterable[str], r: Sequence[float]) -> Dict[str, float]:
    """Bind an outcome's per-output magnitudes to the instance symbols."""
    return dict(zip(symbols, r))


def render(e2e: EndToEndSpec) -> Dict[str, str]:
    """Human-readable inequalities, one per final output."""
    ordered: List[str] = [s for symbols in e2e.instance_symbols.values() for s in symbols]
    lines: Dict[str, str] = {}
    for name in e2e.outputs:
        terms = e2e.forms[name].terms
        parts = [f"{terms[s]:.6g}·{s}" for s in ordered if s in terms]
        lines[name] = f"Δ({name}) ≤ " + (" + ".join(parts) if parts else "0")
    return lines
