"""
Deterministic interpreter for the toy register machine.

A ``Machine`` executes one instruction at a time on a mutable ``MachineState``;
an optional flip request corrupts one bit of a source operand (the consumed value
only) or of the destination register (after writeback).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

from src.errors import TraceMismatchError
from src.schemas.program import NUM_REGISTERS, Bank, Opcode, OperandSlot, Program, Reg
from src.utils.bits import INT64_MIN, Word, flip_bit, reinterpret, to_signed64

Flip = Tuple[OperandSlot, int]


class Trap(Exception):
    """A hardware-trap analogue: the faulty (or broken) execution crashed."""

    def __init__(self, reason: str, pc: int) -> None:
        self.reason = reason
        self.pc = pc
        super().__init__(f"{reason} at pc {pc}")


def _idiv(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError
    q = abs(a) // abs(b)
    return to_signed64(q if (a < 0) == (b < 0) else -q)


def _fdiv(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _fsqrt(a: float) -> float:
    return math.nan if a < 0.0 else math.sqrt(a)


def _fexp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _flog(a: float) -> float:
    if math.isnan(a) or a < 0.0:
        return math.nan
    if a == 0.0:
        return -math.inf
    return math.log(a)


def _ftoi(a: float) -> int:
    if not math.isfinite(a):
        return INT64_MIN
    t = math.trunc(a)
    return t if -(1 << 63) <= t < (1 << 63) else INT64_MIN


_INT_BINARY: Dict[Opcode, Callable[[int, int], int]] = {
    Opcode.IADD: lambda a, b: to_signed64(a + b),
    Opcode.ISUB: lambda a, b: to_signed64(a - b),
    Opcode.IMUL: lambda a, b: to_signed64(a * b),
    Opcode.IDIV: _idiv,
    Opcode.IXOR: lambda a, b: a ^ b,
    Opcode.IAND: lambda a, b: a & b,
    Opcode.IOR: lambda a, b: a | b,
    Opcode.ISHL: lambda a, b: to_signed64(a << (b & 63)),
    Opcode.ISHR: lambda a, b: to_signed64((a & 0xFFFF_FFFF_FFFF_FFFF) >> (b & 63)),
    Opcode.ICMP_LT: lambda a, b: int(a < b),
    Opcode.ICMP_LE: lambda a, b: int(a <= b),
    Opcode.ICMP_EQ: lambda a, b: int(a == b),
}

_FLOAT_BINARY: Dict[Opcode, Callable[[float, float], Word]] = {
    Opcode.FADD: lambda a, b: a + b,
    Opcode.FSUB: lambda a, b: a - b,
    Opcode.FMUL: lambda a, b: a * b,
    Opcode.FDIV: _fdiv,
    Opcode.FCMP_LT: lambda a, b: int(a < b),
    Opcode.FCMP_LE: lambda a, b: int(a <= b),
    Opcode.FCMP_EQ: lambda a, b: int(a == b),
}

_UNARY: Dict[Opcode, Callable[[Word], Word]] = {
    Opcode.MOV: lambda a: a,
    Opcode.FNEG: lambda a: -a,
    Opcode.FABS: abs,
    Opcode.FSQRT: _fsqrt,
    Opcode.FEXP: _fexp,
    Opcode.FLOG: _flog,
    Opcode.ITOF: float,
    Opcode.FTOI: _ftoi,
}


@dataclass(frozen=True)
class Checkpoint:
    """Immutable copy of a machine state."""

    pc: int
    ir: Tuple[int, ...]
    fr: Tuple[float, ...]
    mem: Tuple[Word, ...]
    steps: int

    def restore(self) -> "MachineState":
        return MachineState(
            pc=self.pc, ir=list(self.ir), fr=list(self.fr), mem=list(self.mem), steps=self.steps
        )


@dataclass
class MachineState:
    """Registers, memory and program counter.

    ``steps`` is the dynamic index of the next instruction.
    """

    pc: int
    ir: List[int] = field(default_factory=lambda: [0] * NUM_REGISTERS)
    fr: List[float] = field(default_factory=lambda: [0.0] * NUM_REGISTERS)
    mem: List[Word] = field(default_factory=list)
    steps: int = 0
    halted: bool = False

    def snapshot(self) -> Checkpoint:
        return Checkpoint(
            pc=self.pc, ir=tuple(self.ir), fr=tuple(self.fr), mem=tuple(self.mem), steps=self.steps
        )

    def read(self, reg: Reg) -> Word:
        return self.ir[reg.index] if reg.bank is Bank.INT else self.fr[reg.index]

    def write(self, reg: Reg, value: Word) -> None:
        if reg.bank is Bank.INT:
            self.ir[reg.index] = int(value)
        else:
            self.fr[reg.index] = float(value)


class Effect(NamedTuple):
    """What one executed instruction did."""

    pc: int
    opcode: Opcode
    reads: Tuple[Word, ...]
    written: Optional[Word]
    load_addr: Optional[int]
    store_addr: Optional[int]


class Machine:
    """Executes a Program; holds no mutable state of its own."""

    def __init__(self, program: Program) -> None:
        self.program = program
        self.code = program.instructions
        self.banks = program.banks
        self.size = program.memory_size

    def initial_state(self) -> MachineState:
        return MachineState(pc=self.program.entry, mem=list(self.program.memory))

    def _address(self, base: int, inst_offset: Optional[int], pc: int) -> int:
        addr = base + (inst_offset or 0)
        if not 0 <= addr < self.size:
            raise Trap(f"memory access out of bounds ({addr})", pc)
        return addr

    def step(self, state: MachineState, flip: Optional[Flip] = None) -> Effect:
        """Execute the instruction at ``state.pc``.

        Args:
            state: State to advance in place
            flip: Optional (operand slot, bit) to corrupt during this instruction

        Returns:
            The instruction's effect

        Raises:
            Trap: On out-of-bounds accesses, integer division by zero or a pc outside the program
            TraceMismatchError: If the flip names an operand the instruction does not have
        """
        pc = state.pc
        if not 0 <= pc < len(self.code):
            raise Trap("pc outside program", pc)
        inst = self.code[pc]
        op = inst.opcode
        reads = [state.read(reg) for reg in inst.srcs]

        if flip is not None and flip[0] is not OperandSlot.DST:
            k = 0 if flip[0] is OperandSlot.SRC0 else 1
            if k >= len(reads):
                raise TraceMismatchError(f"pc {pc} has no operand {flip[0].value}")
            reads[k] = flip_bit(reads[k], inst.srcs[k].bank, flip[1])

        next_pc = pc + 1
        written: Optional[Word] = None
        load_addr: Optional[int] = None
        store_addr: Optional[int] = None

        if op in _INT_BINARY:
            try:
                written = _INT_BINARY[op](reads[0], reads[1])
            except ZeroDivisionError:
                raise Trap("integer divide by zero", pc)
        elif op in _FLOAT_BINARY:
            written = _FLOAT_BINARY[op](reads[0], reads[1])
        elif op in _UNARY:
            written = _UNARY[op](reads[0])
        elif op is Opcode.CONST:
            written = inst.imm
        elif op is Opcode.IADDI:
            written = to_signed64(reads[0] + int(inst.imm or 0))
        elif op is Opcode.LOAD:
            load_addr = self._address(reads[0] if reads else 0, inst.offset, pc)
            written = reinterpret(state.mem[load_addr], self.banks[load_addr], inst.dst.bank)
        elif op is Opcode.STORE:
            store_addr = self._address(reads[1] if len(reads) == 2 else 0, inst.offset, pc)
            state.mem[store_addr] = reinterpret(
                reads[0], inst.srcs[0].bank, self.banks[store_addr]
            )
        elif op is Opcode.JUMP:
            next_pc = inst.target
        elif op is Opcode.BRANCH_IF:
            if reads[0] != 0:
                next_pc = inst.target
        elif op is Opcode.HALT:
            state.halted = True
            next_pc = pc

        if written is not None:
            state.write(inst.dst, written)
            if flip is not None and flip[0] is OperandSlot.DST:
                state.write(inst.dst, flip_bit(state.read(inst.dst), inst.dst.bank, flip[1]))
        elif flip is not None and flip[0] is OperandSlot.DST:
            raise TraceMismatchError(f"pc {pc} has no destination operand")

        state.pc = next_pc
        state.steps += 1
        return Effect(pc, op, tuple(reads), written, load_addr, store_addr)
