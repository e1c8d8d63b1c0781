"""
Toy register-machine ISA: assembler, printer and section layouts.
"""

from src.ir.layout import (
    bind_layout,
    effective_outputs,
    load_layout,
    resolve_output,
    validate_layout,
)
from src.ir.parser import format_instruction, parse_program, print_program

__all__ = [
    "bind_layout",
    "effective_outputs",
    "format_instruction",
    "load_layout",
    "parse_program",
    "print_program",
    "resolve_output",
    "validate_layout",
]
