"""
Program and layout schemas for the toy register machine.

This module provides the data models for instructions, programs, memory regions,
static sections and the inter-section dataflow specification.
"""

from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_serializer,
    model_validator,
)
from typing_extensions import Self

NUM_REGISTERS = 32
WORD_BITS = 64


class Bank(str, Enum):
    """Register and memory banks."""

    INT = "int"
    FLOAT = "float"


class Opcode(str, Enum):
    """Opcodes of the toy ISA."""

    CONST = "const"
    MOV = "mov"
    IADD = "iadd"
    IADDI = "iaddi"
    ISUB = "isub"
    IMUL = "imul"
    IDIV = "idiv"
    IXOR = "ixor"
    IAND = "iand"
    IOR = "ior"
    ISHL = "ishl"
    ISHR = "ishr"
    ICMP_LT = "icmp-lt"
    ICMP_LE = "icmp-le"
    ICMP_EQ = "icmp-eq"
    FADD = "fadd"
    FSUB = "fsub"
    FMUL = "fmul"
    FDIV = "fdiv"
    FNEG = "fneg"
    FABS = "fabs"
    FSQRT = "fsqrt"
    FEXP = "fexp"
    FLOG = "flog"
    FCMP_LT = "fcmp-lt"
    FCMP_LE = "fcmp-le"
    FCMP_EQ = "fcmp-eq"
    ITOF = "itof"
    FTOI = "ftoi"
    LOAD = "load"
    STORE = "store"
    JUMP = "jump"
    BRANCH_IF = "branch-if"
    SECTION_BEGIN = "section-begin"
    SECTION_END = "section-end"
    HALT = "halt"


class OperandSlot(str, Enum):
    """Register operand slots that can hold an error site."""

    SRC0 = "source-0"
    SRC1 = "source-1"
    DST = "destination"


class Reg(BaseModel):
    """A register reference."""

    model_config = ConfigDict(frozen=True)

    bank: Bank
    index: int = Field(..., ge=0, lt=NUM_REGISTERS)

    def __str__(self) -> str:
        return f"{'r' if self.bank is Bank.INT else 'f'}{self.index}"


class Instruction(BaseModel):
    """A single static instruction.

    Memory instructions keep their base register in a source slot: ``load`` uses
    ``srcs[0]`` as the base, ``store`` holds the stored value in ``srcs[0]`` and the
    base in ``srcs[1]``. A memory operand without a base register is absolute.
    """

    model_config = ConfigDict(frozen=True)

    pc: int = Field(..., ge=0)
    opcode: Opcode
    dst: Optional[Reg] = None
    srcs: Tuple[Reg, ...] = ()
    imm: Optional[Union[int, float]] = None
    offset: Optional[int] = Field(None, description="Memory offset in words")
    target: Optional[int] = Field(None, description="Branch or jump target pc")

    @field_validator("srcs")
    @classmethod
    def _at_most_two_sources(cls, v: Tuple[Reg, ...]) -> Tuple[Reg, ...]:
        if len(v) > 2:
            raise ValueError("at most two source registers")
        return v

    def operand(self, slot: OperandSlot) -> Optional[Reg]:
        """Return the register held by an operand slot, if any."""
        if slot is OperandSlot.DST:
            return self.dst
        index = 0 if slot is OperandSlot.SRC0 else 1
        return self.srcs[index] if index < len(self.srcs) else None

    def register_slots(self) -> List[Tuple[OperandSlot, Reg]]:
        """List the register operands in slot order (source-0, source-1, destination)."""
        slots: List[Tuple[OperandSlot, Reg]] = []
        for slot, reg in zip((OperandSlot.SRC0, OperandSlot.SRC1), self.srcs):
            slots.append((slot, reg))
        if self.dst is not None:
            slots.append((OperandSlot.DST, self.dst))
        return slots


class Program(BaseModel):
    """A parsed toy-ISA program with its initial memory image."""

    model_config = ConfigDict(frozen=True)

    instructions: Tuple[Instruction, ...]
    memory: Tuple[Union[int, float], ...] = ()
    banks: Tuple[Bank, ...] = ()
    roi: Tuple[int, int]
    entry: int = 0
    sections: Dict[str, Tuple[int, int]] = Field(
        default_factory=dict, description="Section id -> (section-begin pc, section-end pc)"
    )
    labels: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_shape(self) -> "Program":
        if len(self.memory) != len(self.banks):
            raise ValueError("memory image and bank tags differ in length")
        begin, end = self.roi
        if not 0 <= begin <= end <= len(self.instructions):
            raise ValueError(f"roi {self.roi} outside program bounds")
        return self

    @property
    def memory_size(self) -> int:
        return len(self.memory)

    def in_roi(self, pc: int) -> bool:
        return self.roi[0] <= pc < self.roi[1]


class Region(BaseModel):
    """A named contiguous memory range of one bank."""

    model_config = ConfigDict(frozen=True)

    name: str
    addr: int = Field(..., ge=0)
    len: int = Field(..., ge=0)
    bank: Bank = Bank.FLOAT

    @property
    def end(self) -> int:
        return self.addr + self.len

    def words(self) -> range:
        return range(self.addr, self.end)

    def overlaps(self, other: "Region") -> bool:
        return self.addr < other.end and other.addr < self.end

    def contains(self, other: "Region") -> bool:
        return self.addr <= other.addr and other.end <= self.end


class StaticSection(BaseModel):
    """A static program section and its declared memory interface."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: str
    input_regions: Tuple[Region, ...] = Field((), alias="inputs")
    output_regions: Tuple[Region, ...] = Field((), alias="outputs")
    adjacency_pad: int = Field(1, alias="pad", ge=0)
    begin: Optional[int] = Field(None, description="pc of the section-begin marker")
    end: Optional[int] = Field(None, description="pc of the section-end marker")


class Endpoint(BaseModel):
    """One end of a dataflow edge: a section instance (or the final outputs) and a region."""

    model_config = ConfigDict(frozen=True)

    instance: Union[int, Literal["final"]]
    region: str

    @model_validator(mode="before")
    @classmethod
    def _from_pair(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            if len(data) != 2:
                raise ValueError("dataflow endpoint must be [instance, region]")
            return {"instance": data[0], "region": data[1]}
        return data

    @model_serializer
    def _as_pair(self) -> List[Any]:
        return [self.instance, self.region]

    @property
    def is_final(self) -> bool:
        return self.instance == "final"


class DataflowEdge(BaseModel):
    """Producer output region flowing into a consumer input region."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    source: Endpoint = Field(..., alias="from")
    target: Endpoint = Field(..., alias="to")


class SectionLayout(BaseModel):
    """Partition of a program into static sections plus the dataflow specification."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    sections: Tuple[StaticSection, ...]
    final_outputs: Tuple[Region, ...] = Field((), alias="outputs")
    dataflow: Tuple[DataflowEdge, ...] = ()
    future_use: Dict[str, Tuple[Region, ...]] = Field(default_factory=dict)

    def section(self, section_id: str) -> StaticSection:
        for sec in self.sections:
            if sec.id == section_id:
                return sec
        raise KeyError(section_id)

    def section_by_begin(self) -> Dict[int, StaticSection]:
        return {sec.begin: sec for sec in self.sections if sec.begin is not None}


class SdcThresholds(BaseModel):
    """Maximum acceptable SDC magnitude per final output."""

    model_config = ConfigDict(frozen=True)

    epsilon: Dict[str, float] = Field(default_factory=dict)
    default: float = Field(0.0, ge=0.0, description="Threshold for outputs not listed")

    @field_validator("epsilon")
    @classmethod
    def _non_negative(cls, v: Dict[str, float]) -> Dict[str, float]:
        for name, eps in v.items():
            if eps < 0:
                raise ValueError(f"threshold for {name} must be non-negative")
        return v

    def for_output(self, name: str) -> float:
        return self.epsilon.get(name, self.default)

    @classmethod
    def uniform(cls, eps: float) -> Self:
        return cls(default=eps)
