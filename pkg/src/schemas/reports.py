"""
Report and persistence schemas.

This module provides the utility comparison report, the adjustment state kept
across program versions, cached per-instance results and the campaign report.
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import Self

from src.schemas.injection import Outcome, PruneStatus
from src.schemas.program import Bank, OperandSlot
from src.schemas.protection import Selection
from src.schemas.specs import AffineSdcSpec


class CategoryCounts(BaseModel):
    """Error sites split by injected/pruned, SDC-Bad/other and protected/unprotected.

    ``a``..``d`` are protected sites, ``e``..``h`` unprotected ones; within each row the
    columns are injected SDC-Bad, injected other, pruned SDC-Bad, pruned other.
    """

    model_config = ConfigDict(frozen=True)

    a: int = Field(0, ge=0)
    b: int = Field(0, ge=0)
    c: int = Field(0, ge=0)
    d: int = Field(0, ge=0)
    e: int = Field(0, ge=0)
    f: int = Field(0, ge=0)
    g: int = Field(0, ge=0)
    h: int = Field(0, ge=0)

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d + self.e + self.f + self.g + self.h


class ErrorRange(BaseModel):
    """Bounds on the actual protection value given pruning misprediction rate R."""

    model_config = ConfigDict(frozen=True)

    v_min: float
    v_calc: float
    v_max: float


class UtilityReport(BaseModel):
    """Compositional selection measured against monolithic ground-truth labels."""

    model_config = ConfigDict(frozen=True)

    v_trgt: float
    v_trgt_adj: float = Field(..., description="Adjusted target v_trgt'")
    adjust_reached: bool = Field(True, description="False when no adjusted target reaches v_trgt")
    v_achv: float = Field(..., description="Achieved value of the selection at v_trgt'")
    v_achv_unadjusted: float = Field(..., description="Achieved value of the selection at v_trgt")
    v_loss: float
    c_ff: float
    c_mono: float
    c_excess: float
    counts: CategoryCounts
    R: float = Field(..., ge=0.0, le=1.0)
    v_min: float
    v_calc: float
    v_max: float
    within_range: bool = Field(..., description="v_max >= v_trgt")
    zero_sdc_bad: bool = Field(False, description="Monolithic analysis found no SDC-Bad site")


class StepMode(str, Enum):
    """Analysis mode chosen for one program version."""

    FULL_ADJUST = "full+adjust"
    INCREMENTAL = "incremental"


class AdjustState(BaseModel):
    """Adjustment bookkeeping kept across program versions."""

    m_adj: int = Field(..., ge=0, description="Modifications since the last adjustment")
    p_adj: int = Field(..., ge=1, description="Adjustment period")
    adjusted: Dict[str, float] = Field(
        default_factory=dict, description="Adjusted target per original target"
    )
    last_digest: Optional[str] = None
    last_mode: Optional[StepMode] = None

    @classmethod
    def fresh(cls, p_adj: int) -> Self:
        return cls(m_adj=p_adj, p_adj=p_adj)


class CachedOutcome(BaseModel):
    """An outcome stored with pc and dynamic index relative to the section-begin marker."""

    model_config = ConfigDict(frozen=True)

    dyn: int
    pc: int
    slot: OperandSlot
    reg: str
    bank: Bank
    bit: int
    prune: PruneStatus
    pilot_dyn: Optional[int] = None
    pilot_slot: Optional[OperandSlot] = None
    outcome: Outcome
    r: Tuple[float, ...] = ()
    inferred: bool = False


class SectionCacheEntry(BaseModel):
    """Reusable results of one analyzed section instance."""

    key: str
    section: str
    golden_outputs: List[List[Union[int, float]]]
    spec: AffineSdcSpec
    sites: int = Field(..., ge=0)
    runs: int = Field(..., ge=0, description="Injection runs performed for the instance")
    outcomes: List[CachedOutcome]


class InstanceAccount(BaseModel):
    """Run accounting for one section instance."""

    instance: int
    section: str
    key: str
    sites: int
    runs: int
    reused: bool


class CampaignReport(BaseModel):
    """Run accounting and downstream results of one analysis."""

    schema_version: int
    version: str
    mode: str
    step_mode: Optional[StepMode] = None
    program_digest: Optional[str] = Field(None, description="SHA-256 of the printed program")
    sites_total: Optional[int] = Field(None, description="Error sites of the whole roi")
    runs_executed: int = Field(0, description="Compositional injection runs executed")
    runs_reused: int = Field(0, description="Compositional injection runs served from the cache")
    fresh_total: int = Field(0, description="Runs of a fresh compositional analysis")
    sections_reanalyzed: List[int] = Field(default_factory=list)
    monolithic_runs: int = 0
    shared_runs_saved: int = Field(0, description="Replays that served both analyses")
    speedup: Optional[float] = None
    monolithic_ratio: Optional[float] = None
    instances: List[InstanceAccount] = Field(default_factory=list)
    selections: List[Selection] = Field(default_factory=list)
    utility: List[UtilityReport] = Field(default_factory=list)
