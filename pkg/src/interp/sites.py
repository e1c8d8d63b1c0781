"""
Error-site enumeration and equivalence-class pruning.
"""

import logging
import math
from collections import defaultdict
from typing import Any, Dict, List, Optional, Tuple

from src.interp.golden import GoldenTrace, TraceEntry
from src.schemas.injection import (
    ErrorSite,
    PruneConfig,
    PruneStatus,
    Scope,
    ScopeKind,
    SiteConfig,
    site_id,
)
from src.schemas.program import OperandSlot
from src.utils.bits import word_bits

logger = logging.getLogger(__name__)

ClassKey = Tuple[int, OperandSlot, int, int]


def _compositional_scopes(trace: GoldenTrace) -> List[Scope]:
    scopes = [Scope.of_instance(inst.index) for inst in trace.instances]
    scopes.append(Scope.untested())
    return scopes


def _raw_sites(
    trace: GoldenTrace, entries: List[TraceEntry], cfg: SiteConfig, prune: PruneConfig
) -> List[Dict[str, Any]]:
    """Field values of one compositional scope's sites, prune status included.

    Sites fall into one pruning class when they share pc, operand slot, bit and the
    operand value the flip lands on. Sources are flipped as they are read, so their
    value is the one read. A destination is flipped right after the instruction
    writes it, so its value is the written one; the register content from before the
    instruction is overwritten and never reaches the faulty run.
    """
    bits = cfg.bit_positions()
    code = trace.program.instructions
    found: List[Dict[str, Any]] = []
    classes: Dict[ClassKey, List[int]] = defaultdict(list)

    for entry in entries:
        inst = code[entry.pc]
        for slot, reg in inst.register_slots():
            if slot is OperandSlot.DST:
                value = entry.written
            else:
                value = entry.reads[0 if slot is OperandSlot.SRC0 else 1]
            pattern = word_bits(value, reg.bank)
            for bit in bits:
                if prune.enabled:
                    classes[(entry.pc, slot, bit, pattern)].append(len(found))
                found.append(
                    {
                        "id": site_id(entry.dyn, slot, bit),
                        "dyn": entry.dyn,
                        "pc": entry.pc,
                        "slot": slot,
                        "reg": str(reg),
                        "bank": reg.bank,
                        "bit": bit,
                        "prune": PruneStatus.INDIVIDUAL,
                        "pilot": None,
                    }
                )

    for members in classes.values():
        if len(members) < 2:
            continue
        pilot = found[members[0]]
        pilot["prune"] = PruneStatus.PILOT
        for index in members[1:]:
            found[index]["prune"] = PruneStatus.PRUNED
            found[index]["pilot"] = pilot["id"]
    return found


def _build_sites(fields: List[Dict[str, Any]], cfg: SiteConfig) -> List[ErrorSite]:
    if not fields:
        return []
    if cfg.weights:
        total = sum(cfg.weight_of(f["pc"]) for f in fields)
        weights = [float(cfg.weight_of(f["pc"]) / total) for f in fields]
    else:
        weights = [1.0 / len(fields)] * len(fields)
    return [ErrorSite.model_construct(**f, weight=w) for f, w in zip(fields, weights)]


def enumerate_sites(
    trace: GoldenTrace,
    scope: Scope,
    prune: Optional[PruneConfig] = None,
    cfg: Optional[SiteConfig] = None,
) -> List[ErrorSite]:
    """Enumerate the error sites of a scope in id order.

    Pruning classes are always formed within a section instance or the untested set,
    so the whole-roi site list is exactly the union of the compositional ones, with
    identical ids, pilots and statuses.

    Args:
        trace: Golden trace
        scope: Section instance, untested set or whole roi
        prune: Pruning configuration (disabled by default)
        cfg: Bit subset and weight table

    Returns:
        Sites sorted by id, with p(j) normalized over the scope
    """
    prune = prune or PruneConfig()
    cfg = cfg or SiteConfig()
    if scope.kind is ScopeKind.WHOLE:
        fields: List[Dict[str, Any]] = []
        for part in _compositional_scopes(trace):
            fields.extend(_raw_sites(trace, trace.scope_entries(part), cfg, prune))
    else:
        fields = _raw_sites(trace, trace.scope_entries(scope), cfg, prune)
    fields.sort(key=lambda f: f["id"])
    sites = _build_sites(fields, cfg)
    logger.debug(f"Enumerated {len(sites)} sites in {scope}")
    return sites


def count_sites(trace: GoldenTrace, cfg: Optional[SiteConfig] = None) -> int:
    """Number of error sites in the whole roi, pruned ones included."""
    cfg = cfg or SiteConfig()
    code = trace.program.instructions
    slots = sum(len(code[entry.pc].register_slots()) for entry in trace.entries)
    return slots * len(cfg.bit_positions())


def site_weight_units(
    sites: List[ErrorSite], cfg: Optional[SiteConfig]
) -> Tuple[Dict[int, int], int]:
    """Integer value units per site id and their common denominator.

    Uniform distributions give one unit per site; weight tables are scaled by the
    least common denominator of their fractions.
    """
    if cfg is None or not cfg.weights:
        return {site.id: 1 for site in sites}, 1
    weights = {site.id: cfg.weight_of(site.pc) for site in sites}
    denominator = 1
    for w in set(weights.values()):
        denominator = math.lcm(denominator, w.denominator)
    return {sid: int(w * denominator) for sid, w in weights.items()}, denominator


def group_by_pilot(sites: List[ErrorSite]) -> Dict[int, List[ErrorSite]]:
    """Map each injected site id to the pruned sites inheriting its outcome."""
    groups: Dict[int, List[ErrorSite]] = {site.id: [] for site in sites if site.injected}
    for site in sites:
        if not site.injected:
            groups[site.pilot].append(site)
    return groups

