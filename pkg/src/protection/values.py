"""
Protection value of every static instruction.

A site counts towards its pc when its error is SDC-Bad: for a site in a section
instance, some final output's specialized bound evaluated at the site's section
magnitudes exceeds that output's threshold; every untested site counts
unconditionally. Detected outcomes (crash, timeout, detector) never count.
"""

import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from src.errors import ContractViolation
from src.interp.golden import GoldenTrace
from src.interp.sites import site_weight_units
from src.propagation import evaluate, phi_values, specialize
from src.schemas.injection import ErrorSite, Outcome, OutcomeRecord, SiteConfig
from src.schemas.program import SdcThresholds
from src.schemas.protection import PcValue, ProtectionModel
from src.schemas.specs import AffineForm, EndToEndSpec

logger = logging.getLogger(__name__)


def exceeds(bounds: Mapping[str, float], thresholds: SdcThresholds) -> bool:
    """True when any output bound is above its threshold."""
    return any(bound > thresholds.for_output(name) for name, bound in bounds.items())


def section_sdc_bad(
    record: OutcomeRecord,
    forms: Mapping[str, AffineForm],
    symbols: Sequence[str],
    thresholds: SdcThresholds,
) -> bool:
    """Compositional label of one section-scope outcome under its specialized forms."""
    if record.outcome is not Outcome.SDC:
        return False
    phi = phi_values(symbols, record.r)
    return exceeds({name: evaluate(form, phi) for name, form in forms.items()}, thresholds)


def final_sdc_bad(record: OutcomeRecord, outputs: Sequence[str], thresholds: SdcThresholds) -> bool:
    """Label of a whole-program outcome measured at the final outputs."""
    if record.outcome is not Outcome.SDC:
        return False
    return exceeds(dict(zip(outputs, record.r)), thresholds)


def build_model(
    trace: GoldenTrace,
    universe: Iterable[ErrorSite],
    bad_ids: Iterable[int],
    thresholds: SdcThresholds,
    cfg: Optional[SiteConfig] = None,
) -> ProtectionModel:
    """Accumulate the value units of SDC-Bad sites per pc and attach dynamic costs.

    Args:
        trace: Golden trace providing per-pc dynamic counts
        universe: Every error site of the analysis
        bad_ids: Ids of the SDC-Bad sites
        thresholds: Thresholds the labels were computed with
        cfg: Site configuration carrying the optional weight table

    Returns:
        The normalized protection model
    """
    sites = list(universe)
    units, denominator = site_weight_units(sites, cfg)
    by_id = {site.id: site for site in sites}
    raw: Dict[int, int] = defaultdict(int)
    for sid in bad_ids:
        raw[by_id[sid].pc] += units[sid]

    total_raw = sum(raw.values())
    entries = [
        PcValue(
            pc=pc,
            raw=raw.get(pc, 0),
            value=raw.get(pc, 0) / total_raw if total_raw else 0.0,
            cost=count,
        )
        for pc, count in sorted(trace.pc_counts.items())
    ]
    return ProtectionModel(
        entries=tuple(entries),
        total_raw=total_raw,
        total_dynamic=trace.roi_steps,
        unit_denominator=denominator,
        thresholds=thresholds,
    )


def compute_values(
    outcomes: Mapping[int, Mapping[int, OutcomeRecord]],
    e2e: EndToEndSpec,
    thresholds: SdcThresholds,
    untested: List[ErrorSite],
    trace: GoldenTrace,
    cfg: Optional[SiteConfig] = None,
    sites: Optional[Mapping[int, List[ErrorSite]]] = None,
) -> ProtectionModel:
    """Compute the protection value of every pc from compositional outcomes.

    Args:
        outcomes: Per instance index, the outcome record of every site keyed by id
        e2e: Composed end-to-end specification
        thresholds: ε per final output
        untested: Sites outside every section instance
        trace: Golden trace
        cfg: Site configuration (weights)
        sites: Per instance, the enumerated sites; when given every site must have an outcome

    Returns:
        The normalized protection model

    Raises:
        ContractViolation: If an enumerated site has no outcome
    """
    universe: List[ErrorSite] = list(untested)
    bad: List[int] = [site.id for site in untested]
    for instance in sorted(outcomes):
        records = outcomes[instance]
        if sites is not None:
            missing = [s.id for s in sites.get(instance, []) if s.id not in records]
            if missing:
                raise ContractViolation(
                    f"Instance {instance}: {len(missing)} sites have no outcome (first {missing[0]})"
                )
        forms = specialize(e2e, instance)
        symbols = e2e.instance_symbols[instance]
        for sid, record in records.items():
            universe.append(record.site)
            if section_sdc_bad(record, forms, symbols, thresholds):
                bad.append(sid)

    model = build_model(trace, universe, bad, thresholds, cfg)
    if model.total_raw == 0:
        logger.warning("No SDC-Bad site found; every protection value is 0")
    logger.info(
        f"Protection values: {len(bad)} SDC-Bad of {len(universe)} sites "
        f"({len(untested)} untested), {len(model.entries)} pcs"
    )
    return model


def identity_model(
    trace: GoldenTrace,
    mono: Mapping[int, OutcomeRecord],
    thresholds: SdcThresholds,
    cfg: Optional[SiteConfig] = None,
) -> ProtectionModel:
    """Model of the whole roi as one section whose outputs are the final outputs."""
    outputs = [region.name for region in trace.final_regions]
    bad = [sid for sid, record in mono.items() if final_sdc_bad(record, outputs, thresholds)]
    return build_model(trace, (r.site for r in mono.values()), bad, thresholds, cfg)
