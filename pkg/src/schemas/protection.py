"""
Protection model schemas.
"""

from typing import Dict, Iterable, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.program import SdcThresholds


class PcValue(BaseModel):
    """Value and cost of protecting one static instruction."""

    model_config = ConfigDict(frozen=True)

    pc: int = Field(..., ge=0)
    raw: int = Field(..., ge=0, description="SDC-Bad-causing sites, in integer value units")
    value: float = Field(..., ge=0.0, le=1.0, description="raw / total raw")
    cost: int = Field(..., ge=1, description="Dynamic instances of the pc in the roi")


class ProtectionModel(BaseModel):
    """Per-pc protection values and costs for one analysis."""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[PcValue, ...] = Field(..., description="Sorted by pc")
    total_raw: int = Field(..., ge=0)
    total_dynamic: int = Field(..., ge=0, description="Dynamic instruction count of the roi")
    unit_denominator: int = Field(1, ge=1, description="Common denominator of p(j) weights")
    thresholds: SdcThresholds = Field(default_factory=SdcThresholds)

    @model_validator(mode="after")
    def _check_totals(self) -> "ProtectionModel":
        pcs = [e.pc for e in self.entries]
        if pcs != sorted(set(pcs)):
            raise ValueError("entries must be sorted by unique pc")
        if sum(e.raw for e in self.entries) != self.total_raw:
            raise ValueError("total_raw must equal the sum of raw values")
        return self

    def by_pc(self) -> Dict[int, PcValue]:
        return {e.pc: e for e in self.entries}

    def value_of(self, pcs: Iterable[int]) -> float:
        if self.total_raw == 0:
            return 0.0
        table = self.by_pc()
        return sum(table[pc].raw for pc in pcs) / self.total_raw

    def cost_of(self, pcs: Iterable[int]) -> int:
        table = self.by_pc()
        return sum(table[pc].cost for pc in pcs)


class Selection(BaseModel):
    """The set of protected instructions chosen for one target value."""

    model_config = ConfigDict(frozen=True)

    target: float = Field(..., ge=0.0, le=1.0)
    adjusted_target: Optional[float] = Field(None, description="Target the knapsack was solved at")
    pcs: Tuple[int, ...] = ()
    raw: int = Field(0, ge=0)
    value: float = 0.0
    cost: int = Field(0, ge=0)
    normalized_cost: float = Field(0.0, description="cost / total roi dynamic count")
