"""
The shipped benchmark corpus.

Assets live under ``bench/<name>/``: ``prog.asm``, ``layout.json`` and
``config.json`` for the base version, and ``variants/<kind>/prog.asm`` for each
modified version. A variant directory may carry its own ``layout.json`` and
``config.json``; otherwise the base ones apply.
"""

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from src.benchmarks.oracles import ORACLES
from src.config import settings
from src.errors import ConfigError, FlipForgeError, InvalidBenchmarkError
from src.interp import GoldenTrace, run_golden
from src.ir import load_layout, parse_program
from src.schemas.benchmarks import BenchmarkInfo, BenchmarkSuite, GoldenCheck, Variant
from src.schemas.configs import RunConfig
from src.schemas.program import Bank, Program, SectionLayout

logger = logging.getLogger(__name__)

FLOAT_TOLERANCE = 1e-12
OUTPUT_CHANGING_TOLERANCE = 1e-9

ALL_VARIANTS = (Variant.BASE, Variant.SMALL, Variant.LARGE)

BENCHMARKS: Dict[str, BenchmarkInfo] = {
    info.name: info
    for info in (
        BenchmarkInfo(
            name="lu",
            description="Blocked 8x8 LU decomposition, four sections over two iterations",
            variants=ALL_VARIANTS,
        ),
        BenchmarkInfo(
            name="fft",
            description="8-point radix-2 FFT, a bit-reversal section and one section per stage",
            variants=ALL_VARIANTS,
        ),
        BenchmarkInfo(
            name="bscholes",
            description="Black-Scholes pricing of two options, four sections per option",
            variants=ALL_VARIANTS + (Variant.ERRDETECT,),
            output_changing=(Variant.SMALL,),
        ),
        BenchmarkInfo(
            name="hash",
            description="Integer mixing hash, absorb, mix and finalize sections",
            epsilons=(0.0,),
            variants=ALL_VARIANTS,
        ),
        BenchmarkInfo(
            name="masker",
            description="Five-section pipeline ending in a nearest-value lookup",
        ),
        BenchmarkInfo(
            name="affine",
            description="Three power-of-two scalings through absolute addresses",
        ),
    )
}


@dataclass
class LoadedBenchmark:
    """A benchmark version ready for analysis."""

    name: str
    variant: Variant
    program: Program
    layout: SectionLayout
    config: RunConfig

    @property
    def label(self) -> str:
        return self.name if self.variant is Variant.BASE else f"{self.name}/{self.variant.value}"


def build_suite(root: Optional[Union[str, Path]] = None) -> BenchmarkSuite:
    """Locate the benchmark assets and check that every registered version is present.

    Args:
        root: Asset directory (default: ``settings.get_bench_path()``)

    Returns:
        The benchmark suite

    Raises:
        InvalidBenchmarkError: If a registered benchmark or variant has no program
    """
    root = Path(root) if root is not None else settings.get_bench_path()
    suite = BenchmarkSuite(root=root, benchmarks=dict(BENCHMARKS))
    missing = []
    for info in suite.benchmarks.values():
        base = suite.directory(info.name)
        for required in ("prog.asm", "layout.json", "config.json"):
            if not (base / required).is_file():
                missing.append(str(base / required))
        for variant in info.variants:
            if not (suite.directory(info.name, variant) / "prog.asm").is_file():
                missing.append(str(suite.directory(info.name, variant) / "prog.asm"))
    if missing:
        raise InvalidBenchmarkError(f"Benchmark assets missing: {', '.join(missing)}")
    logger.debug(f"Benchmark suite at {root}: {len(suite.benchmarks)} benchmarks")
    return suite


def _variant_file(suite: BenchmarkSuite, name: str, variant: Variant, filename: str) -> Path:
    own = suite.directory(name, variant) / filename
    return own if own.is_file() else suite.directory(name) / filename


def load_variant(
    suite: BenchmarkSuite, name: str, variant: Union[Variant, str] = Variant.BASE, **overrides: Any
) -> LoadedBenchmark:
    """Parse one benchmark version together with its run configuration.

    Program and layout paths in the loaded configuration point at the asset files,
    whatever the configuration file says.

    Args:
        suite: Benchmark suite
        name: Benchmark name
        variant: Version to load
        **overrides: RunConfig fields taking precedence over the configuration file

    Raises:
        ConfigError: If the benchmark does not ship the requested variant
    """
    variant = Variant(variant)
    info = suite.info(name)
    if variant not in info.variants:
        raise ConfigError(f"Benchmark {name} has no {variant.value} variant")
    program_path = suite.directory(name, variant) / "prog.asm"
    layout_path = _variant_file(suite, name, variant, "layout.json")
    config = RunConfig.load(
        str(_variant_file(suite, name, variant, "config.json")),
        **{
            "program": str(program_path),
            "layout": str(layout_path),
            "version": variant.value,
            **overrides,
        },
    )
    program = parse_program(program_path.read_text(encoding="utf-8"))
    layout = load_layout(layout_path, program)
    return LoadedBenchmark(
        name=name, variant=variant, program=program, layout=layout, config=config
    )


def epsilon_sweep(
    suite: BenchmarkSuite, name: str, variant: Union[Variant, str] = Variant.BASE, **overrides: Any
) -> List[LoadedBenchmark]:
    """One copy of a benchmark version per SDC threshold the benchmark is analyzed at.

    Each copy keeps the per-output thresholds of its configuration and replaces the
    default threshold; its version label gains an ``-eps<threshold>`` suffix.
    """
    bench = load_variant(suite, name, variant, **overrides)
    sweep = []
    for eps in suite.info(name).epsilons:
        thresholds = bench.config.thresholds.model_copy(update={"default": eps})
        config = bench.config.model_copy(
            update={"thresholds": thresholds, "version": f"{bench.config.version}-eps{eps:g}"}
        )
        sweep.append(replace(bench, config=config))
    return sweep


def check_coverage(trace: GoldenTrace) -> List[int]:
    """Static roi pcs the golden run never executes."""
    begin, end = trace.program.roi
    return [pc for pc in range(begin, end) if pc not in trace.pc_counts]


def golden_trace(bench: LoadedBenchmark) -> GoldenTrace:
    detector = bench.config.detector if bench.config.detector.enabled else None
    return run_golden(bench.program, bench.layout, detector)


def _compare(
    bench: LoadedBenchmark, trace: GoldenTrace, tolerance: float
) -> Tuple[List[str], float]:
    expected = ORACLES[bench.name](bench.program.memory)
    mismatches: List[str] = []
    worst = 0.0
    for region, values in zip(trace.final_regions, trace.final_outputs):
        reference = expected.get(region.name)
        if reference is None or len(reference) != len(values):
            mismatches.append(f"{bench.label}: no reference for output {region.name}")
            continue
        for index, (got, want) in enumerate(zip(values, reference)):
            word = region.addr + index
            if trace.program.banks[word] is Bank.INT:
                ok = int(got) == int(want)
                error = 0.0 if ok else math.inf
            else:
                error = abs(float(got) - float(want))
                ok = error <= tolerance
            worst = max(worst, error)
            if not ok:
                mismatches.append(
                    f"{bench.label}: output {region.name}[{index}] is {got!r}, expected {want!r}"
                )
    return mismatches, worst


def verify_golden(bench: LoadedBenchmark, info: BenchmarkInfo) -> GoldenCheck:
    """Compare one version's golden outputs with its reference and check roi coverage."""
    try:
        trace = golden_trace(bench)
    except FlipForgeError as e:
        return GoldenCheck(
            benchmark=bench.name, variant=bench.variant, passed=False, message=e.message
        )
    tolerance = (
        OUTPUT_CHANGING_TOLERANCE if bench.variant in info.output_changing else FLOAT_TOLERANCE
    )
    mismatches, worst = _compare(bench, trace, tolerance)
    uncovered = () if bench.variant in info.coverage_exempt else tuple(check_coverage(trace))
    message = None
    if mismatches:
        message = mismatches[0]
    elif uncovered:
        message = f"{bench.label}: roi pcs never executed: {list(uncovered)}"
    return GoldenCheck(
        benchmark=bench.name,
        variant=bench.variant,
        passed=message is None,
        max_error=worst,
        mismatches=mismatches,
        uncovered=uncovered,
        message=message,
    )


def verify_goldens(
    suite: BenchmarkSuite, names: Optional[Iterable[str]] = None
) -> List[GoldenCheck]:
    """Run every version of the named benchmarks (default: all) against its reference.

    Args:
        suite: Benchmark suite
        names: Benchmarks to check

    Returns:
        One check per benchmark version; failed checks name the benchmark and output index
    """
    checks: List[GoldenCheck] = []
    for name in names or suite.benchmarks:
        info = suite.info(name)
        for variant in info.variants:
            check = verify_golden(load_variant(suite, name, variant), info)
            if check.passed:
                logger.info(
                    f"{name}/{variant.value}: golden outputs match, max error {check.max_error:.3g}"
                )
            else:
                logger.warning(f"{name}/{variant.value}: {check.message}")
            checks.append(check)
    return checks
