"""
Data models for flipforge.

This package provides the pydantic models shared by every pipeline stage.
Run configuration models live in ``src.schemas.configs``.
"""

from src.schemas.injection import (
    DetectorConfig,
    DetectorRange,
    ErrorSite,
    Outcome,
    OutcomeRecord,
    PruneConfig,
    PruneStatus,
    Scope,
    ScopeKind,
    SiteConfig,
)
from src.schemas.program import (
    Bank,
    DataflowEdge,
    Endpoint,
    Instruction,
    Opcode,
    OperandSlot,
    Program,
    Reg,
    Region,
    SdcThresholds,
    SectionLayout,
    StaticSection,
)
from src.schemas.protection import PcValue, ProtectionModel, Selection
from src.schemas.reports import (
    AdjustState,
    CampaignReport,
    CategoryCounts,
    ErrorRange,
    SectionCacheEntry,
    StepMode,
    UtilityReport,
)
from src.schemas.responses import ErrorDetail
from src.schemas.specs import AffineForm, AffineSdcSpec, EndToEndSpec, TotalSdcSpec

__all__ = [
    # Program models
    "Bank",
    "DataflowEdge",
    "Endpoint",
    "Instruction",
    "Opcode",
    "OperandSlot",
    "Program",
    "Reg",
    "Region",
    "SdcThresholds",
    "SectionLayout",
    "StaticSection",
    # Injection models
    "DetectorConfig",
    "DetectorRange",
    "ErrorSite",
    "Outcome",
    "OutcomeRecord",
    "PruneConfig",
    "PruneStatus",
    "Scope",
    "ScopeKind",
    "SiteConfig",
    # Specification models
    "AffineForm",
    "AffineSdcSpec",
    "EndToEndSpec",
    "TotalSdcSpec",
    # Protection models
    "PcValue",
    "ProtectionModel",
    "Selection",
    # Report models
    "AdjustState",
    "CampaignReport",
    "CategoryCounts",
    "ErrorRange",
    "SectionCacheEntry",
    "StepMode",
    "UtilityReport",
    # Response models
    "ErrorDetail",
]
