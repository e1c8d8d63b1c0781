"""
Minimum-cost instruction selection (0-1 knapsack over integer value units).

The table is built once per model: ``best[v]`` after processing items i..n-1 is
the minimum key of any subset of those items reaching at least ``v`` value units,
where key = cost·(n+1) + size orders subsets by cost, then by size. Items are
processed from the highest pc down, and a forward reconstruction that takes an
item whenever taking it is optimal yields the lexicographically smallest pc set.
"""

import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from src.errors import ContractViolation
from src.schemas.protection import PcValue, ProtectionModel, Selection

logger = logging.getLogger(__name__)

MAX_TABLE_CELLS = 200_000_000
_INF = np.int64(2**62)


def target_units(v_trgt: float, total_raw: int) -> int:
    """Smallest integer number of value units reaching the fraction ``v_trgt``."""
    if not 0.0 <= v_trgt <= 1.0 or math.isnan(v_trgt):
        raise ContractViolation(f"Target value {v_trgt} outside [0, 1]")
    return math.ceil(Fraction(v_trgt).limit_denominator(10**9) * total_raw)


class KnapsackTable:
    """Suffix dynamic-programming table shared by every target of one model."""

    def __init__(self, model: ProtectionModel) -> None:
        self.model = model
        self.items: List[PcValue] = [e for e in model.entries if e.raw > 0]
        self.total = model.total_raw
        n = len(self.items)
        if n * (self.total + 1) > MAX_TABLE_CELLS:
            raise ContractViolation(
                f"Knapsack table of {n}×{self.total + 1} cells exceeds {MAX_TABLE_CELLS}; "
                f"reduce the weight denominator"
            )

        width = self.total + 1
        values = np.arange(width)
        best = np.full(width, _INF, dtype=np.int64)
        best[0] = 0
        self.take = np.zeros((n, width), dtype=bool)
        for i in range(n - 1, -1, -1):
            item = self.items[i]
            key = np.int64(item.cost * (n + 1) + 1)
            candidate = best[np.maximum(values - item.raw, 0)] + key
            take = candidate <= best
            self.take[i] = take
            best = np.where(take, candidate, best)
        self.best = best
        logger.debug(f"Knapsack table: {n} items, {width} value units")

    def select(self, v_trgt: float, target: Optional[float] = None) -> Selection:
        """Optimal selection reaching ``v_trgt``.

        Args:
            v_trgt: Value the knapsack is solved at
            target: Original target to report when ``v_trgt`` is an adjusted one

        Returns:
            The minimum-cost selection
        """
        need = target_units(v_trgt, self.total)
        pcs: List[int] = []
        raw = cost = 0
        for i, item in enumerate(self.items):
            if need <= 0:
                break
            if self.take[i, need]:
                pcs.append(item.pc)
                raw += item.raw
                cost += item.cost
                need = max(0, need - item.raw)
        total_dynamic = self.model.total_dynamic
        return Selection(
            target=v_trgt if target is None else target,
            adjusted_target=None if target is None else v_trgt,
            pcs=tuple(pcs),
            raw=raw,
            value=raw / self.total if self.total else 0.0,
            cost=cost,
            normalized_cost=cost / total_dynamic if total_dynamic else 0.0,
        )


def solve_knapsack(model: ProtectionModel, v_trgt: float) -> Selection:
    """Minimum-cost set of pcs whose protection value reaches ``v_trgt``.

    Raises:
        ContractViolation: If ``v_trgt`` is outside [0, 1] or the table is too large
    """
    return KnapsackTable(model).select(v_trgt)


def sweep(model: ProtectionModel, targets: Sequence[float]) -> List[Selection]:
    """One optimal selection per target (ε-constraint method)."""
    table = KnapsackTable(model)
    selections = [table.select(v) for v in targets]
    logger.info(
        "Sweep: " + ", ".join(f"{s.target:.2f}→{s.cost}" for s in selections)
    )
    return selections
