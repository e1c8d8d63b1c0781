"""
Assembler and printer for the toy register machine.

The textual format is one instruction per line, ``opcode dst, src1, src2``, with
``name:`` labels, ``;``/``#`` comments and the directives ``.mem``, ``.roi``,
``.section`` and ``.entry``.
"""

import logging
import re
from typing import Dict, List, Optional, Tuple, Union

from src.errors import AsmSyntaxError
from src.schemas.program import (
    NUM_REGISTERS,
    Bank,
    Instruction,
    Opcode,
    Program,
    Reg,
)
from src.utils.bits import to_signed64

logger = logging.getLogger(__name__)

_MNEMONICS: Dict[str, Opcode] = {op.value: op for op in Opcode}
_MNEMONICS["ldi"] = Opcode.CONST

_PRINT_NAMES: Dict[Opcode, str] = {op: op.value for op in Opcode}
_PRINT_NAMES[Opcode.CONST] = "ldi"

_REG_RE = re.compile(r"^([rf])(\d+)$")
_MEM_RE = re.compile(r"^\[\s*(?:([rf]\d+)\s*(?:([+-])\s*(\w+))?|([+-]?\w+))\s*\]$")
_LABEL_RE = re.compile(r"^[A-Za-z_$][\w.$]*$")

# Operand shapes per opcode: "d" destination, "s" source, "i" immediate,
# "m" memory operand, "l" label. Banks: I integer, F float, X either.
_SHAPES: Dict[Opcode, Tuple[str, ...]] = {
    Opcode.CONST: ("dX", "i"),
    Opcode.MOV: ("dX", "sX"),
    Opcode.IADDI: ("dI", "sI", "i"),
    Opcode.FNEG: ("dF", "sF"),
    Opcode.FABS: ("dF", "sF"),
    Opcode.FSQRT: ("dF", "sF"),
    Opcode.FEXP: ("dF", "sF"),
    Opcode.FLOG: ("dF", "sF"),
    Opcode.ITOF: ("dF", "sI"),
    Opcode.FTOI: ("dI", "sF"),
    Opcode.LOAD: ("dX", "m"),
    Opcode.STORE: ("sX", "m"),
    Opcode.JUMP: ("l",),
    Opcode.BRANCH_IF: ("sI", "l"),
    Opcode.SECTION_BEGIN: (),
    Opcode.SECTION_END: (),
    Opcode.HALT: (),
}
for _op in (
    Opcode.IADD, Opcode.ISUB, Opcode.IMUL, Opcode.IDIV, Opcode.IXOR, Opcode.IAND,
    Opcode.IOR, Opcode.ISHL, Opcode.ISHR, Opcode.ICMP_LT, Opcode.ICMP_LE, Opcode.ICMP_EQ,
):
    _SHAPES[_op] = ("dI", "sI", "sI")
for _op in (Opcode.FADD, Opcode.FSUB, Opcode.FMUL, Opcode.FDIV):
    _SHAPES[_op] = ("dF", "sF", "sF")
for _op in (Opcode.FCMP_LT, Opcode.FCMP_LE, Opcode.FCMP_EQ):
    _SHAPES[_op] = ("dI", "sF", "sF")


def _parse_int(token: str) -> int:
    return to_signed64(int(token, 0))


def _parse_value(token: str, bank: Bank) -> Union[int, float]:
    if bank is Bank.INT:
        return _parse_int(token)
    return float(token)


def _format_value(value: Union[int, float], bank: Bank) -> str:
    if bank is Bank.INT:
        return str(int(value))
    return repr(float(value))


class _Line:
    """A source line stripped of comments, with its number for diagnostics."""

    def __init__(self, number: int, raw: str) -> None:
        self.number = number
        self.raw = raw
        text = raw
        for marker in (";", "#"):
            cut = text.find(marker)
            if cut >= 0:
                text = text[:cut]
        self.text = text.rstrip()

    def error(self, message: str, token: Optional[str] = None) -> AsmSyntaxError:
        column = 1
        if token:
            found = self.raw.find(token)
            column = found + 1 if found >= 0 else 1
        else:
            column = len(self.raw) - len(self.raw.lstrip()) + 1
        return AsmSyntaxError(message, self.number, column)


class _Assembler:
    """Two-pass assembler: collect labels and instructions, then resolve references."""

    def __init__(self) -> None:
        self.labels: Dict[str, int] = {}
        self.pending: List[Tuple[_Line, Opcode, List[str]]] = []
        self.memory: Dict[int, Tuple[Union[int, float], Bank]] = {}
        self.roi: Optional[Tuple[_Line, str, str]] = None
        self.sections: List[Tuple[_Line, str, str, str]] = []
        self.entry: Optional[Tuple[_Line, str]] = None

    def feed(self, line: _Line) -> None:
        text = line.text.strip()
        while text:
            head, sep, rest = text.partition(":")
            if sep and _LABEL_RE.match(head.strip()) and not text.startswith("."):
                label = head.strip()
                if label in self.labels:
                    raise line.error(f"duplicate label '{label}'", label)
                self.labels[label] = len(self.pending)
                text = rest.strip()
                continue
            break
        if not text:
            return
        if text.startswith("."):
            self._directive(line, text)
            return
        mnemonic, _, operand_text = text.partition(" ")
        opcode = _MNEMONICS.get(mnemonic.lower())
        if opcode is None:
            raise line.error(f"unknown opcode '{mnemonic}'", mnemonic)
        operands = [tok.strip() for tok in operand_text.split(",")] if operand_text.strip() else []
        self.pending.append((line, opcode, operands))

    def _directive(self, line: _Line, text: str) -> None:
        parts = text.split()
        name = parts[0]
        if name == ".mem":
            if len(parts) < 4:
                raise line.error(".mem needs addr, count and bank", name)
            try:
                addr, count = int(parts[1], 0), int(parts[2], 0)
                bank = Bank(parts[3])
            except ValueError as e:
                raise line.error(f"malformed .mem directive: {e}", name)
            values = parts[4:]
            if len(values) > count:
                raise line.error(".mem lists more values than its count", values[count])
            for offset in range(count):
                word = addr + offset
                if word in self.memory:
                    raise line.error(f"memory word {word} declared twice", name)
                try:
                    value = _parse_value(values[offset], bank) if offset < len(values) else (
                        0 if bank is Bank.INT else 0.0
                    )
                except ValueError:
                    raise line.error(f"invalid {bank.value} value", values[offset])
                self.memory[word] = (value, bank)
        elif name == ".roi":
            if len(parts) != 3:
                raise line.error(".roi needs begin and end", name)
            self.roi = (line, parts[1], parts[2])
        elif name == ".section":
            if len(parts) != 4:
                raise line.error(".section needs id, begin and end", name)
            self.sections.append((line, parts[1], parts[2], parts[3]))
        elif name == ".entry":
            if len(parts) != 2:
                raise line.error(".entry needs a label", name)
            self.entry = (line, parts[1])
        else:
            raise line.error(f"unknown directive '{name}'", name)

    def _resolve(self, line: _Line, token: str) -> int:
        if token in self.labels:
            return self.labels[token]
        try:
            return int(token, 0)
        except ValueError:
            raise line.error(f"undefined label '{token}'", token)

    def _reg(self, line: _Line, token: str, bank_rule: str) -> Reg:
        match = _REG_RE.match(token)
        if not match:
            raise line.error(f"expected register, got '{token}'", token)
        index = int(match.group(2))
        if index >= NUM_REGISTERS:
            raise line.error(f"register index out of range: {token}", token)
        bank = Bank.INT if match.group(1) == "r" else Bank.FLOAT
        if (bank_rule == "I" and bank is not Bank.INT) or (
            bank_rule == "F" and bank is not Bank.FLOAT
        ):
            raise line.error(f"bank mismatch for operand '{token}'", token)
        return Reg(bank=bank, index=index)

    def _instruction(

        self, pc: int, line: _Line, opcode: Opcode, operands: List[str]

    ) -> Instruction:
        shape = _SHAPES[opcode]
        if len(operands) != len(shape):
            raise line.error(
                f"'{opcode.value}' expects {len(shape)} operands, got {len(operands)}"
            )
        dst: Optional[Reg] = None
        srcs: List[Reg] = []
        imm: Optional[Union[int, float]] = None
        offset: Optional[int] = None
        target: Optional[int] = None
        for kind, token in zip(shape, operands):
            if kind[0] == "d":
                dst = self._reg(line, token, kind[1])
            elif kind[0] == "s":
                srcs.append(self._reg(line, token, kind[1]))
            elif kind == "i":
                bank = dst.bank if dst is not None else Bank.INT
                try:
                    imm = _parse_value(token, bank)
                except ValueError:
                    raise line.error(f"invalid immediate '{token}'", token)
            elif kind == "m":
                match = _MEM_RE.match(token)
                if not match:
                    raise line.error(f"malformed memory operand '{token}'", token)
                base, sign, off, absolute = match.groups()
                try:
                    if base is not None:
                        srcs.append(self._reg(line, base, "I"))
                        offset = int(off, 0) if off else 0
                        if sign == "-":
                            offset = -offset
                    else:
                        offset = int(absolute, 0)
                except ValueError:
                    raise line.error(f"malformed memory offset in '{token}'", token)
            elif kind == "l":
                target = self._resolve(line, token)
        if opcode is Opcode.MOV and dst is not None and srcs and dst.bank is not srcs[0].bank:
            raise line.error("mov operands must share a bank", operands[1])
        return Instruction(
            pc=pc, opcode=opcode, dst=dst, srcs=tuple(srcs), imm=imm, offset=offset, target=target
        )

    def finish(self) -> Program:
        instructions = [
            self._instruction(pc, line, opcode, operands)
            for pc, (line, opcode, operands) in enumerate(self.pending)
        ]
        count = len(instructions)
        for inst, (line, _, operands) in zip(instructions, self.pending):
            if inst.target is not None and not 0 <= inst.target < count:
                raise line.error(f"branch target {inst.target} outside program", operands[-1])

        size = max((word + 1 for word in self.memory), default=0)
        memory: List[Union[int, float]] = []
        banks: List[Bank] = []
        for word in range(size):
            value, bank = self.memory.get(word, (0, Bank.INT))
            memory.append(value)
            banks.append(bank)

        if self.roi is not None:
            line, begin, end = self.roi
            roi = (self._resolve(line, begin), self._resolve(line, end))
            if not 0 <= roi[0] <= roi[1] <= count:
                raise line.error(f"roi {roi} outside program bounds")
        else:
            roi = (0, count)

        sections: Dict[str, Tuple[int, int]] = {}
        for line, sec_id, begin, end in self.sections:
            if sec_id in sections:
                raise line.error(f"section '{sec_id}' declared twice", sec_id)
            b, e = self._resolve(line, begin), self._resolve(line, end)
            if not (0 <= b < count and instructions[b].opcode is Opcode.SECTION_BEGIN):
                raise line.error(f"section '{sec_id}' begin is not a section-begin marker", begin)
            if not (0 <= e < count and instructions[e].opcode is Opcode.SECTION_END):
                raise line.error(f"section '{sec_id}' end is not a section-end marker", end)
            if e <= b:
                raise line.error(f"section '{sec_id}' ends before it begins", end)
            sections[sec_id] = (b, e)

        entry = 0
        if self.entry is not None:
            entry = self._resolve(*self.entry)

        return Program(
            instructions=tuple(instructions),
            memory=tuple(memory),
            banks=tuple(banks),
            roi=roi,
            entry=entry,
            sections=sections,
            labels=dict(self.labels),
        )


def parse_program(text: str) -> Program:
    """Parse assembly source into a Program.

    Args:
        text: Assembly source

    Returns:
        The parsed program

    Raises:
        AsmSyntaxError: On syntax errors, undefined labels or out-of-range registers
    """
    assembler = _Assembler()
    for number, raw in enumerate(text.splitlines(), start=1):
        assembler.feed(_Line(number, raw))
    program = assembler.finish()
    logger.debug(
        f"Parsed program: {len(program.instructions)} instructions, "
        f"{program.memory_size} memory words, {len(program.sections)} sections"
    )
    return program


def _format_mem(inst: Instruction) -> str:
    offset = inst.offset or 0
    has_base = len(inst.srcs) == (2 if inst.opcode is Opcode.STORE else 1)
    base = inst.srcs[-1] if has_base else None
    if base is None:
        return f"[{offset}]"
    if offset == 0:
        return f"[{base}]"
    return f"[{base}{'+' if offset > 0 else '-'}{abs(offset)}]"


def format_instruction(inst: Instruction, names: Optional[Dict[int, str]] = None) -> str:
    """Render one instruction in canonical text form."""
    names = names or {}
    mnemonic = _PRINT_NAMES[inst.opcode]
    operands: List[str] = []
    if inst.opcode is Opcode.LOAD:
        operands = [str(inst.dst), _format_mem(inst)]
    elif inst.opcode is Opcode.STORE:
        operands = [str(inst.srcs[0]), _format_mem(inst)]
    else:
        if inst.dst is not None:
            operands.append(str(inst.dst))
        operands.extend(str(reg) for reg in inst.srcs)
        if inst.imm is not None:
            bank = inst.dst.bank if inst.dst is not None else Bank.INT
            operands.append(_format_value(inst.imm, bank))
        if inst.target is not None:
            operands.append(names.get(inst.target, str(inst.target)))
    return f"{mnemonic} {', '.join(operands)}" if operands else mnemonic


def print_program(program: Program) -> str:
    """Render a Program as assembly text that parses back to an equal Program."""
    names: Dict[int, str] = {}
    by_pc: Dict[int, List[str]] = {}
    for label, pc in program.labels.items():
        names.setdefault(pc, label)
        by_pc.setdefault(pc, []).append(label)

    lines: List[str] = []
    word = 0
    while word < program.memory_size:
        bank = program.banks[word]
        run = word
        while run < program.memory_size and program.banks[run] is bank:
            run += 1
        values = " ".join(_format_value(v, bank) for v in program.memory[word:run])
        lines.append(f".mem {word} {run - word} {bank.value} {values}")
        word = run
    lines.append(f".roi {program.roi[0]} {program.roi[1]}")
    if program.entry:
        lines.append(f".entry {program.entry}")
    for sec_id, (begin, end) in program.sections.items():
        lines.append(f".section {sec_id} {begin} {end}")
    for inst in program.instructions:
        for label in by_pc.get(inst.pc, []):
            lines.append(f"{label}:")
        lines.append(f"    {format_instruction(inst, names)}")
    for label in by_pc.get(len(program.instructions), []):
        lines.append(f"{label}:")
    return "\n".join(lines) + "\n"


