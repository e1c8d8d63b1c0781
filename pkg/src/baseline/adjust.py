"""
Target adjustment and the adjustment schedule across program versions.
"""

import logging
from typing import Dict, Optional, Tuple

from src.baseline.monolithic import GroundTruth
from src.protection.knapsack import KnapsackTable
from src.schemas.reports import AdjustState, StepMode

logger = logging.getLogger(__name__)


def adjust_target(table: KnapsackTable, truth: GroundTruth, v_trgt: float) -> Tuple[float, bool]:
    """Smallest achievable model target whose selection reaches ``v_trgt`` under ground truth.

    Candidates are the fractions u/total of the model's integer value units.
    Bisection assumes the achieved value grows with the target; a linear scan
    over the candidates below the bisection result then confirms minimality,
    since the achieved value need not be monotone.

    Args:
        table: Knapsack table of the compositional model
        truth: Monolithic SDC-Bad labels of the same program version
        v_trgt: Original target

    Returns:
        The adjusted target and whether it reaches ``v_trgt``; when no candidate
        reaches it the adjusted target is 1.0 and the flag is False
    """
    if v_trgt >= 1.0:
        return 1.0, truth.achieved(table.select(1.0).pcs) >= 1.0
    total = table.total
    if total == 0:
        return v_trgt, truth.achieved(()) >= v_trgt

    achieved: Dict[int, float] = {}

    def reaches(u: int) -> bool:
        if u not in achieved:
            achieved[u] = truth.achieved(table.select(u / total).pcs)
        return achieved[u] >= v_trgt

    if not reaches(total):
        logger.warning(f"No adjusted target reaches {v_trgt}; using 1.0")
        return 1.0, False

    lo, hi = 0, total
    while lo < hi:
        mid = (lo + hi) // 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid + 1
    found: Optional[int] = next((u for u in range(lo) if reaches(u)), None)
    u = lo if found is None else found
    logger.debug(f"Adjusted target {v_trgt} → {u}/{total}")
    return u / total, True


def step_modification(state: AdjustState, digest: str) -> Tuple[StepMode, AdjustState]:
    """Choose the analysis mode for a program version.

    Every period of ``p_adj`` modifications triggers a full analysis with target
    adjustment; the versions in between reuse the stored adjusted targets.
    Re-analyzing the version last seen keeps its mode and counter.

    Args:
        state: Persisted adjustment state
        digest: Content digest of the program version

    Returns:
        The analysis mode and the updated state
    """
    if state.last_digest == digest and state.last_mode is not None:
        return state.last_mode, state
    if state.m_adj >= state.p_adj:
        mode, m_adj = StepMode.FULL_ADJUST, 0
    else:
        mode, m_adj = StepMode.INCREMENTAL, state.m_adj
    updated = state.model_copy(
        update={"m_adj": m_adj + 1, "last_digest": digest, "last_mode": mode}
    )
    logger.info(f"Modification step: {mode.value} (m_adj={updated.m_adj}, P_adj={state.p_adj})")
    return mode, updated
