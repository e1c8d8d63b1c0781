"""
Monolithic whole-roi analysis and utility metrics.

The monolithic campaign injects every site of the roi and classifies it at the
final outputs; its SDC-Bad labels serve as ground truth when measuring how much
value a compositional selection actually achieves.
"""

import logging
from collections import defaultdict
from typing import Dict, Iterable, Mapping, Optional, Tuple

from src.interp.golden import GoldenTrace
from src.interp.injector import run_campaign
from src.interp.sites import enumerate_sites, site_weight_units
from src.protection.values import final_sdc_bad
from src.schemas.injection import DetectorConfig, OutcomeRecord, PruneConfig, Scope, SiteConfig
from src.schemas.program import SdcThresholds
from src.schemas.protection import Selection
from src.schemas.reports import CategoryCounts, ErrorRange, UtilityReport

logger = logging.getLogger(__name__)


def run_monolithic(
    trace: GoldenTrace,
    detector: Optional[DetectorConfig] = None,
    prune: Optional[PruneConfig] = None,
    cfg: Optional[SiteConfig] = None,
    jobs: int = 1,
) -> Dict[int, OutcomeRecord]:
    """Inject every site of the roi and classify it against the final outputs.

    The site universe (ids, pilots and prune statuses) equals the union of the
    section-instance and untested sites of the compositional analysis.
    """
    sites = enumerate_sites(trace, Scope.whole(), prune, cfg)
    return run_campaign(trace, sites, Scope.whole(), detector, jobs)


class GroundTruth:
    """Monolithic SDC-Bad labels, aggregated per pc in value units."""

    def __init__(
        self,
        trace: GoldenTrace,
        mono: Mapping[int, OutcomeRecord],
        thresholds: SdcThresholds,
        cfg: Optional[SiteConfig] = None,
    ) -> None:
        outputs = [region.name for region in trace.final_regions]
        self.records = mono
        self.bad = {
            sid for sid, record in mono.items() if final_sdc_bad(record, outputs, thresholds)
        }
        units, _ = site_weight_units([r.site for r in mono.values()], cfg)
        self.units_by_pc: Dict[int, int] = defaultdict(int)
        for sid in self.bad:
            self.units_by_pc[mono[sid].site.pc] += units[sid]
        self.total_units = sum(self.units_by_pc.values())

    @property
    def empty(self) -> bool:
        return self.total_units == 0

    def achieved(self, pcs: Iterable[int]) -> float:
        if self.empty:
            return 1.0
        return sum(self.units_by_pc.get(pc, 0) for pc in set(pcs)) / self.total_units


def achieved_value(
    selection: Selection,
    mono: Mapping[int, OutcomeRecord],
    thresholds: SdcThresholds,
    trace: GoldenTrace,
    cfg: Optional[SiteConfig] = None,
) -> float:
    """Fraction of monolithic SDC-Bad sites whose pc the selection protects (1 if none)."""
    return GroundTruth(trace, mono, thresholds, cfg).achieved(selection.pcs)


def categories(selection: Selection, truth: GroundTruth) -> CategoryCounts:
    """Split every site by protection, injection and SDC-Bad label (counts A to H)."""
    protected = set(selection.pcs)
    counts = {key: 0 for key in "abcdefgh"}
    for sid, record in truth.records.items():
        column = (0 if record.site.injected else 2) + (0 if sid in truth.bad else 1)
        row = 0 if record.site.pc in protected else 4
        counts["abcdefgh"[row + column]] += 1
    return CategoryCounts(**counts)


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 1.0


def error_range(counts: CategoryCounts, R: float) -> ErrorRange:
    """Bounds on the true protection value given a pruning misprediction rate R.

    A zero denominator means no SDC-Bad site exists anywhere, and the
    corresponding quantity is 1.
    """
    a, c, d, e, g, h = counts.a, counts.c, counts.d, counts.e, counts.g, counts.h
    low = a + (1 - R) * c
    high = a + c + R * d
    return ErrorRange(
        v_min=_ratio(low, low + e + g + R * h),
        v_calc=_ratio(a + c, a + c + e + g),
        v_max=_ratio(high, high + e + (1 - R) * g),
    )


def utility_report(
    v_trgt: float,
    adjusted: Tuple[float, bool],
    selection: Selection,
    unadjusted: Selection,
    mono_selection: Selection,
    truth: GroundTruth,
    R: float,
) -> UtilityReport:
    """Compare a compositional selection with the monolithic one at the same target.

    Args:
        v_trgt: Original target
        adjusted: Adjusted target and whether it reaches ``v_trgt``
        selection: Compositional selection solved at the adjusted target
        unadjusted: Compositional selection solved at ``v_trgt``
        mono_selection: Selection of the monolithic identity model at ``v_trgt``
        truth: Monolithic ground-truth labels
        R: Pruning misprediction rate

    Returns:
        The utility report
    """
    v_adj, reached = adjusted
    v_achv = truth.achieved(selection.pcs)
    counts = categories(selection, truth)
    bounds = error_range(counts, R)
    if truth.empty:
        logger.warning(f"No monolithic SDC-Bad site at target {v_trgt}; achieved value is 1")
    return UtilityReport(
        v_trgt=v_trgt,
        v_trgt_adj=v_adj,
        adjust_reached=reached,
        v_achv=v_achv,
        v_achv_unadjusted=truth.achieved(unadjusted.pcs),
        v_loss=v_trgt - v_achv,
        c_ff=selection.normalized_cost,
        c_mono=mono_selection.normalized_cost,
        c_excess=selection.normalized_cost - mono_selection.normalized_cost,
        counts=counts,
        R=R,
        v_min=bounds.v_min,
        v_calc=bounds.v_calc,
        v_max=bounds.v_max,
        within_range=bounds.v_max >= v_trgt,
        zero_sdc_bad=truth.empty,
    )
