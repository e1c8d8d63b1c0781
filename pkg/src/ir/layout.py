"""
Section layouts: loading, static validation and effective output regions.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from pydantic import ValidationError

from src.errors import LayoutError
from src.schemas.program import (
    Opcode,
    Program,
    Region,
    SectionLayout,
    StaticSection,
)
from src.schemas.responses import ErrorDetail

logger = logging.getLogger(__name__)


def load_layout(source: Union[str, Path, dict], program: Optional[Program] = None) -> SectionLayout:
    """Load a layout document and bind its sections to the program's markers.

    Args:
        source: Path of a JSON document, JSON text, or an already decoded document
        program: Program whose ``.section`` directives give the marker pcs

    Returns:
        The layout, with ``begin``/``end`` filled in when a program is given

    Raises:
        LayoutError: If the document is malformed or names unknown sections
    """
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if isinstance(source, Path) or not text.lstrip().startswith("{"):
            path = Path(source)
            if not path.is_file():
                raise LayoutError(f"Layout file not found: {path}")
            text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise LayoutError(f"Layout is not valid JSON: {e}")

    try:
        layout = SectionLayout.model_validate(data)
    except ValidationError as e:
        raise LayoutError(f"Invalid layout document: {e}")

    if program is not None:
        layout = bind_layout(layout, program)
    return layout


def bind_layout(layout: SectionLayout, program: Program) -> SectionLayout:
    """Attach section-begin/section-end pcs from the program to each section."""
    bound = []
    for sec in layout.sections:
        if sec.id not in program.sections:
            raise LayoutError(
                f"Section '{sec.id}' has no .section directive in the program",
                [ErrorDetail(code="unknown-section", message="no markers", field=sec.id)],
            )
        begin, end = program.sections[sec.id]
        bound.append(sec.model_copy(update={"begin": begin, "end": end}))
    return layout.model_copy(update={"sections": tuple(bound)})


def effective_outputs(
    sec: StaticSection, layout: SectionLayout, memory_size: Optional[int] = None
) -> List[Region]:
    """Declared outputs widened by the adjacency pad, plus future-use regions.

    Widened regions are clamped to memory bounds; overlapping regions are merged
    and named by joining their names with ``+``. The result is disjoint and sorted.
    """
    regions: List[Region] = []
    for out in sec.output_regions:
        lo = max(0, out.addr - sec.adjacency_pad)
        hi = out.end + sec.adjacency_pad
        if memory_size is not None:
            hi = min(hi, memory_size)
        regions.append(out.model_copy(update={"addr": lo, "len": max(0, hi - lo)}))
    regions.extend(layout.future_use.get(sec.id, ()))

    merged: List[Region] = []
    for region in sorted(regions, key=lambda r: (r.addr, r.end, r.name)):
        if merged and region.addr < merged[-1].end:
            last = merged[-1]
            names = last.name.split("+")
            if region.name not in names:
                names.append(region.name)
            end = max(last.end, region.end)
            merged[-1] = last.model_copy(
                update={"name": "+".join(names), "len": end - last.addr}
            )
        else:
            merged.append(region)
    return merged


def resolve_output(region_name: str, effective: Iterable[str]) -> str:
    """Name of the effective output region a declared output was widened or merged into."""
    for name in effective:
        if name == region_name or region_name in name.split("+"):
            return name
    raise KeyError(region_name)


def validate_layout(p: Program, layout: SectionLayout) -> List[ErrorDetail]:
    """Check a layout statically against its program.

    Args:
        p: Parsed program
        layout: Layout to check

    Returns:
        Diagnostics; empty when the layout is consistent
    """
    diagnostics: List[ErrorDetail] = []

    def report(code: str, message: str, field: Optional[str] = None) -> None:
        diagnostics.append(ErrorDetail(code=code, message=message, field=field))

    seen: Dict[str, StaticSection] = {}
    spans = []
    for sec in layout.sections:
        if sec.id in seen:
            report("duplicate-section", "section declared twice", sec.id)
            continue
        seen[sec.id] = sec
        markers = p.sections.get(sec.id)
        if markers is None:
            report("unknown-section", "no .section directive in the program", sec.id)
        else:
            begin, end = markers
            if not (p.in_roi(begin) and p.in_roi(end)):
                report("outside-roi", "section markers lie outside the roi", sec.id)
            spans.append((begin, end, sec.id))

        for kind, regions in (("input", sec.input_regions), ("output", sec.output_regions)):
            names = [r.name for r in regions]
            if len(names) != len(set(names)):
                report("duplicate-region", f"duplicate {kind} region name", sec.id)
            for region in regions:
                _check_bounds(p, region, sec.id, report)
        outs = sec.output_regions
        for i, a in enumerate(outs):
            for b in outs[i + 1:]:
                if a.overlaps(b):
                    report("region-overlap", f"outputs {a.name} and {b.name} overlap", sec.id)

    spans.sort()
    for (b1, e1, id1), (b2, e2, id2) in zip(spans, spans[1:]):
        if b2 <= e1:
            report("section-overlap", f"sections {id1} and {id2} overlap", id2)

    for sec_id in layout.future_use:
        if sec_id not in seen:
            report("unknown-section", "future_use names an unknown section", sec_id)

    final_names = {r.name for r in layout.final_outputs}
    for region in layout.final_outputs:
        _check_bounds(p, region, "final", report)
    for edge in layout.dataflow:
        src, dst = edge.source, edge.target
        if src.is_final:
            report("backward-edge", "an edge cannot start at the final outputs", src.region)
        elif not dst.is_final and int(dst.instance) <= int(src.instance):
            report(
                "backward-edge",
                f"edge from instance {src.instance} to instance {dst.instance}",
                dst.region,
            )
        if dst.is_final and dst.region not in final_names:
            report("unknown-output", "edge targets an undeclared final output", dst.region)

    for sec_id, (begin, end) in p.sections.items():
        sec = seen.get(sec_id)
        if sec is None:
            continue
        allowed = effective_outputs(sec, layout, p.memory_size)
        for inst in p.instructions[begin:end]:
            if inst.opcode is Opcode.STORE and len(inst.srcs) == 1:
                addr = inst.offset or 0
                if not any(addr in r.words() for r in allowed):
                    report(
                        "store-outside-outputs",
                        f"store at pc {inst.pc} writes word {addr} outside the section outputs",
                        sec_id,
                    )

    if diagnostics:
        logger.info(f"Layout validation found {len(diagnostics)} problem(s)")
    return diagnostics


def _check_bounds(p: Program, region: Region, owner: str, report) -> None:
    if region.end > p.memory_size:
        report("region-bounds", f"region {region.name} exceeds memory", owner)
        return
    for word in region.words():
        if p.banks[word] is not region.bank:
            report(
                "bank-mismatch",
                f"word {word} of region {region.name} is tagged {p.banks[word].value}",
                owner,
            )
            return
