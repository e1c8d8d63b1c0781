"""
Error-site and outcome schemas.

This module provides the data models for injection scopes, error sites, their
classified outcomes, and the configuration of site enumeration and detection.
"""

from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing_extensions import Self

from src.schemas.program import WORD_BITS, Bank, OperandSlot, Region

SLOT_INDEX: Dict[OperandSlot, int] = {
    OperandSlot.SRC0: 0,
    OperandSlot.SRC1: 1,
    OperandSlot.DST: 2,
}
SITES_PER_DYN = 3 * WORD_BITS


def site_id(dyn: int, slot: OperandSlot, bit: int) -> int:
    """Global, deterministic id of the site (dyn, slot, bit)."""
    return dyn * SITES_PER_DYN + SLOT_INDEX[slot] * WORD_BITS + bit


class ScopeKind(str, Enum):
    """Kinds of injection scope."""

    INSTANCE = "instance"
    UNTESTED = "untested"
    WHOLE = "whole"


class Scope(BaseModel):
    """An injection scope: one section instance, the untested set, or the whole roi."""

    model_config = ConfigDict(frozen=True)

    kind: ScopeKind
    instance: Optional[int] = None

    @classmethod
    def of_instance(cls, index: int) -> Self:
        return cls(kind=ScopeKind.INSTANCE, instance=index)

    @classmethod
    def untested(cls) -> Self:
        return cls(kind=ScopeKind.UNTESTED)

    @classmethod
    def whole(cls) -> Self:
        return cls(kind=ScopeKind.WHOLE)

    def __str__(self) -> str:
        if self.kind is ScopeKind.INSTANCE:
            return f"instance {self.instance}"
        return self.kind.value


class PruneStatus(str, Enum):
    """How an error site's outcome is obtained."""

    PILOT = "pilot"
    PRUNED = "pruned"
    INDIVIDUAL = "individual"


class Outcome(str, Enum):
    """Outcome taxonomy of a single injection."""

    MASKED = "masked"
    CRASH = "crash"
    TIMEOUT = "timeout"
    DETECTED = "detected"
    SDC = "sdc"


class ErrorSite(BaseModel):
    """A single (dynamic instruction, register operand, bit) injection point."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0)
    dyn: int = Field(..., ge=0, description="Dynamic instruction index in the golden run")
    pc: int = Field(..., ge=0)
    slot: OperandSlot
    reg: str = Field(..., description="Register name, e.g. r3 or f7")
    bank: Bank
    bit: int = Field(..., ge=0, lt=WORD_BITS)
    prune: PruneStatus = PruneStatus.INDIVIDUAL
    pilot: Optional[int] = Field(None, description="Pilot site id for pruned sites")
    weight: float = Field(0.0, ge=0.0, description="Probability p(j) within the enumerated scope")

    @property
    def injected(self) -> bool:
        return self.prune is not PruneStatus.PRUNED

    def record(self) -> Dict[str, Any]:
        """Compact form used in outcome dumps."""
        return {
            "id": self.id,
            "dyn": self.dyn,
            "pc": self.pc,
            "slot": self.slot.value,
            "reg": self.reg,
            "bit": self.bit,
            "prune": self.prune.value,
        }


class OutcomeRecord(BaseModel):
    """Classified result of injecting one error site."""

    model_config = ConfigDict(frozen=True)

    site: ErrorSite
    outcome: Outcome
    r: Tuple[float, ...] = Field((), description="SDC magnitude per scope output")
    inferred: bool = Field(False, description="Copied from the class pilot")

    def inferred_for(self, site: ErrorSite) -> "OutcomeRecord":
        """Copy this (pilot) outcome onto a pruned member of its class."""
        return OutcomeRecord(site=site, outcome=self.outcome, r=self.r, inferred=True)

    def record(self) -> Dict[str, Any]:
        """JSON-lines form: {site, outcome, r}."""
        return {
            "site": self.site.record(),
            "outcome": self.outcome.value,
            "r": list(self.r),
            "inferred": self.inferred,
        }


class PruneConfig(BaseModel):
    """Equivalence-class pruning of error sites."""

    model_config = ConfigDict(frozen=True)

    enabled: bool = False
    misprediction_rate: float = Field(
        0.04, ge=0.0, le=1.0, description="Rate R of outcome misprediction for pruned sites"
    )


class SiteConfig(BaseModel):
    """Restrictions and weights applied while enumerating error sites."""

    model_config = ConfigDict(frozen=True)

    bits: Optional[Tuple[int, ...]] = Field(
        None, description="Bit positions to enumerate (default: all 64)"
    )
    weights: Optional[Dict[int, str]] = Field(
        None, description="Per-pc rational weight of p(j), e.g. {'12': '3/2'}"
    )

    @field_validator("bits")
    @classmethod
    def _valid_bits(cls, v: Optional[Tuple[int, ...]]) -> Optional[Tuple[int, ...]]:
        if v is None:
            return v
        if not v:
            raise ValueError("bit subset must not be empty")
        for bit in v:
            if not 0 <= bit < WORD_BITS:
                raise ValueError(f"bit position {bit} out of range")
        return tuple(sorted(set(v)))

    @field_validator("weights", mode="before")
    @classmethod
    def _valid_weights(cls, v: Any) -> Any:
        if v is None:
            return v
        cleaned = {}
        for pc, weight in dict(v).items():
            fraction = Fraction(str(weight))
            if fraction <= 0:
                raise ValueError(f"weight of pc {pc} must be positive")
            cleaned[pc] = str(fraction)
        return cleaned

    def bit_positions(self) -> Tuple[int, ...]:
        return self.bits if self.bits is not None else tuple(range(WORD_BITS))

    def weight_of(self, pc: int) -> Fraction:
        if not self.weights:
            return Fraction(1)
        return Fraction(self.weights.get(pc, "1"))


class DetectorRange(BaseModel):
    """Inclusive value bounds on a memory region."""

    model_config = ConfigDict(frozen=True)

    region: Region
    lo: float
    hi: float


class DetectorConfig(BaseModel):
    """Application-level output check (range bounds plus a finiteness test)."""

    model_config = ConfigDict(frozen=True)

    enabled: bool = False
    ranges: Tuple[DetectorRange, ...] = ()
    finite: bool = Field(
        True, description="Flag non-finite float outputs whose golden value is finite"
    )
