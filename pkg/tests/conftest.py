"""
Shared fixtures: small inline programs, the benchmark suite and temporary stores.
"""

import textwrap
from pathlib import Path

import pytest

from src.benchmarks import build_suite
from src.campaign import SectionStore
from src.config import settings
from src.interp import run_golden
from src.ir import load_layout, parse_program

# Two sections with untested code before and between them.
# pcs: 0 ldi r1 | 1..6 scale | 7 iaddi r1 | 8..13 shift | 14 halt
PIPELINE_ASM = """
.mem 0 7 float 1.5 2.0
.entry start
.roi start finish
.section scale scale_begin scale_end
.section shift shift_begin shift_end

start:
    ldi r1, 7
scale_begin: section-begin
    load f0, [0]
    load f1, [1]
    fmul f2, f0, f1
    store f2, [3]
scale_end: section-end
    iaddi r1, r1, 1
shift_begin: section-begin
    load f3, [3]
    ldi f4, 0.5
    fadd f5, f3, f4
    store f5, [5]
shift_end: section-end
finish:
    halt
"""

PIPELINE_LAYOUT = {
    "sections": [
        {
            "id": "scale",
            "inputs": [{"name": "x", "addr": 0, "len": 2, "bank": "float"}],
            "outputs": [{"name": "p", "addr": 3, "len": 1, "bank": "float"}],
        },
        {
            "id": "shift",
            "inputs": [{"name": "p", "addr": 3, "len": 1, "bank": "float"}],
            "outputs": [{"name": "q", "addr": 5, "len": 1, "bank": "float"}],
        },
    ],
    "outputs": [{"name": "q", "addr": 5, "len": 1, "bank": "float"}],
    "dataflow": [
        {"from": [0, "p"], "to": [1, "p"]},
        {"from": [1, "q"], "to": ["final", "q"]},
    ],
}

# An integer index selects one of three table words.
# pcs: 0 section-begin | 1 load r1 | 2 load f0 | 3 store | 4 section-end | 5 halt
INDEXED_ASM = """
.mem 0 1 int 1
.mem 1 6 float 0.25 0.5 0.75
.entry start
.roi start finish
.section pick pick_begin pick_end

start:
pick_begin: section-begin
    load r1, [0]
    load f0, [r1+1]
    store f0, [5]
pick_end: section-end
finish:
    halt
"""

INDEXED_LAYOUT = {
    "sections": [
        {
            "id": "pick",
            "inputs": [
                {"name": "idx", "addr": 0, "len": 1, "bank": "int"},
                {"name": "table", "addr": 1, "len": 3, "bank": "float"},
            ],
            "outputs": [{"name": "y", "addr": 5, "len": 1, "bank": "float"}],
        }
    ],
    "outputs": [{"name": "y", "addr": 5, "len": 1, "bank": "float"}],
    "dataflow": [{"from": [0, "y"], "to": ["final", "y"]}],
}

# Counts up to the bound stored at word 0 and stores the count at word 1.
# pcs: 0 section-begin | 1 load | 2 ldi | 3 iaddi | 4 icmp-lt | 5 branch-if | 6 store
#      7 section-end | 8 halt
LOOP_ASM = """
.mem 0 2 int 3
.entry start
.roi start finish
.section count count_begin count_end

start:
count_begin: section-begin
    load r1, [0]
    ldi r2, 0
loop:
    iaddi r2, r2, 1
    icmp-lt r3, r2, r1
    branch-if r3, loop
    store r2, [1]
count_end: section-end
finish:
    halt
"""

LOOP_LAYOUT = {
    "sections": [
        {
            "id": "count",
            "inputs": [{"name": "bound", "addr": 0, "len": 1, "bank": "int"}],
            "outputs": [{"name": "count", "addr": 1, "len": 1, "bank": "int"}],
        }
    ],
    "outputs": [{"name": "count", "addr": 1, "len": 1, "bank": "int"}],
    "dataflow": [{"from": [0, "count"], "to": ["final", "count"]}],
}


def asm(text):
    """Parse an indented assembly snippet."""
    return parse_program(textwrap.dedent(text))


@pytest.fixture
def pipeline_program():
    return asm(PIPELINE_ASM)


@pytest.fixture
def pipeline_layout(pipeline_program):
    return load_layout(PIPELINE_LAYOUT, pipeline_program)


@pytest.fixture
def pipeline_trace(pipeline_program, pipeline_layout):
    return run_golden(pipeline_program, pipeline_layout)


@pytest.fixture
def indexed_trace():
    program = asm(INDEXED_ASM)
    return run_golden(program, load_layout(INDEXED_LAYOUT, program))


@pytest.fixture
def loop_program():
    return asm(LOOP_ASM)


@pytest.fixture
def loop_trace(loop_program):
    return run_golden(loop_program, load_layout(LOOP_LAYOUT, loop_program))


@pytest.fixture(scope="session")
def suite():
    return build_suite()


@pytest.fixture
def store(tmp_path):
    return SectionStore(tmp_path / "store")


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    """Keep FLIPFORGE_STORE from redirecting test stores."""
    monkeypatch.setattr(settings, "store", None)


def tree(root: Path):
    """Relative path → bytes of every file under a reports directory."""
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }
