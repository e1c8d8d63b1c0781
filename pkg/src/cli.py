"""
Command-line interface for flipforge.

Exit codes: 0 on success, 1 for configuration errors and missing files, 2 for
pipeline errors (the failing stage is named on stderr).
"""

import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
from jinja2 import Template
from pydantic import ValidationError

from src.benchmarks import build_suite, epsilon_sweep, verify_goldens
from src.campaign import SectionStore, analyze, load_inputs
from src.config import settings
from src.errors import ConfigError, FlipForgeError, PipelineError
from src.schemas.benchmarks import Variant
from src.schemas.configs import AnalysisMode, PerturbationPattern, RunConfig
from src.schemas.reports import CampaignReport
from src.utils.jsonio import read_json

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_PIPELINE = 2

COMPARE_TEMPLATE = Template(
    """{{ "%-8s"|format("Target") }} {{ "%-8s"|format("Value") }} {{ "%-18s"|format("Cost (diff)") }} Range
{% for row in rows -%}
{{ "%-8s"|format("%.2f"|format(row.target)) }} {{ "%-8s"|format("%.3f"|format(row.value)) }} {{ "%-18s"|format(row.cost) }} {{ row.mark }}
{% endfor %}"""
)


def _fail(code: int, stage: str, message: str) -> None:
    click.echo(f"error [{stage}]: {message}", err=True)
    sys.exit(code)


def _load_report(path: str) -> CampaignReport:
    try:
        return CampaignReport.model_validate(read_json(path))
    except (OSError, ValueError, ValidationError) as e:
        raise ConfigError(f"Cannot read report {path}: {e}")


def _parse_epsilon(values: List[str]) -> Dict[str, Any]:
    """``--epsilon 0.01`` sets the default; ``--epsilon name=0.01`` one output."""
    thresholds: Dict[str, Any] = {}
    for value in values:
        if "=" in value:
            name, eps = value.split("=", 1)
            thresholds.setdefault("epsilon", {})[name.strip()] = float(eps)
        else:
            thresholds["default"] = float(value)
    return thresholds


@click.group()
@click.option("--log-level", default=None, help="Logging level (default from FLIPFORGE_LOG_LEVEL)")
def cli(log_level: Optional[str]) -> None:
    """Compositional error-injection analysis of toy-ISA programs."""
    if log_level:
        logging.getLogger().setLevel(log_level.upper())


@cli.command("analyze")
@click.option("--config", "config_path", type=click.Path(), help="JSON run configuration")
@click.option("--program", help="Assembly source")
@click.option("--layout", help="Layout JSON document")
@click.option("--targets", help="Comma-separated target values, e.g. 0.90,0.95,0.99,1.00")
@click.option("--epsilon", multiple=True, help="Threshold: VALUE for all outputs or NAME=VALUE")
@click.option("--prune/--no-prune", default=None, help="Equivalence-class pruning")
@click.option("--misprediction-rate", type=float, help="Pruning misprediction rate R")
@click.option("--bits", help="Comma-separated bit positions to inject")
@click.option("--phi-max", type=float, help="Maximum sensitivity perturbation")
@click.option("--samples", type=int, help="Sensitivity samples per input region")
@click.option("--pattern", type=click.Choice([p.value for p in PerturbationPattern]))
@click.option("--detector", "detector_path", type=click.Path(), help="Detector JSON document")
@click.option("--mode", type=click.Choice([m.value for m in AnalysisMode]))
@click.option("--adjust-period", type=int, help="P_adj: versions between target adjustments")
@click.option("--cache-dir", help="Section cache directory (FLIPFORGE_STORE wins)")
@click.option("--no-cache", is_flag=True, help="Analyze every section from scratch")
@click.option("--seed", type=int)
@click.option("--jobs", type=int, help="Injection worker processes")
@click.option("--version", "version_label", help="Program version label of the reports tree")
@click.option("--out-dir", help="Reports root (default FLIPFORGE_OUT_DIR)")
def analyze_command(
    config_path: Optional[str],
    program: Optional[str],
    layout: Optional[str],
    targets: Optional[str],
    epsilon: List[str],
    prune: Optional[bool],
    misprediction_rate: Optional[float],
    bits: Optional[str],
    phi_max: Optional[float],
    samples: Optional[int],
    pattern: Optional[str],
    detector_path: Optional[str],
    mode: Optional[str],
    adjust_period: Optional[int],
    cache_dir: Optional[str],
    no_cache: bool,
    seed: Optional[int],
    jobs: Optional[int],
    version_label: Optional[str],
    out_dir: Optional[str],
) -> None:
    """Run the analysis pipeline and write the reports tree."""
    try:
        detector = None
        if detector_path:
            if not Path(detector_path).is_file():
                raise ConfigError(f"Detector file not found: {detector_path}")
            detector = json.loads(Path(detector_path).read_text(encoding="utf-8"))
        prune_cfg = {
            k: v
            for k, v in (("enabled", prune), ("misprediction_rate", misprediction_rate))
            if v is not None
        }
        sensitivity = {
            k: v
            for k, v in (("phi_max", phi_max), ("samples", samples), ("pattern", pattern))
            if v is not None
        }
        config = RunConfig.load(
            config_path,
            program=program,
            layout=layout,
            targets=targets,
            thresholds=_parse_epsilon(list(epsilon)) or None,
            prune=prune_cfg or None,
            sites={"bits": [int(b) for b in bits.split(",")]} if bits else None,
            sensitivity=sensitivity or None,
            detector=detector,
            mode=mode,
            adjust_period=adjust_period,
            cache_dir=cache_dir,
            seed=seed,
            jobs=jobs,
            version=version_label,
        )
        program_obj, layout_obj = load_inputs(config)
    except (ConfigError, ValueError) as e:
        _fail(EXIT_CONFIG, "config", getattr(e, "message", str(e)))
        return
    except PipelineError as e:
        _fail(EXIT_PIPELINE, e.stage, e.message)
        return

    store = None if no_cache else SectionStore(settings.get_store_path(config.cache_dir))
    try:
        report = analyze(
            program_obj, layout_obj, config, store=store, out_dir=out_dir or settings.out_dir
        )
    except PipelineError as e:
        _fail(EXIT_PIPELINE, e.stage, e.message)
        return
    except FlipForgeError as e:
        _fail(EXIT_PIPELINE, "analyze", e.message)
        return

    click.echo(
        f"{config.version}: {len(report.selections)} selections, "
        f"{report.runs_executed} runs executed, {report.runs_reused} reused"
    )


def _universe(report: CampaignReport) -> Tuple[str, int]:
    if report.program_digest is None or report.sites_total is None:
        raise ConfigError(f"Report {report.version} records no site universe")
    return report.program_digest, report.sites_total


def compare_rows(report_a: CampaignReport, report_b: CampaignReport) -> List[Dict[str, Any]]:
    """Per-target rows of report A with its cost difference against report B.

    Raises:
        ConfigError: If the reports do not cover the same site universe or targets
    """
    (digest_a, sites_a), (digest_b, sites_b) = _universe(report_a), _universe(report_b)
    if (digest_a, sites_a) != (digest_b, sites_b):
        raise ConfigError(
            f"Reports cover different site universes: {digest_a[:12]} with {sites_a} sites "
            f"vs {digest_b[:12]} with {sites_b} sites"
        )
    targets_a = [s.target for s in report_a.selections]
    targets_b = [s.target for s in report_b.selections]
    if targets_a != targets_b:
        raise ConfigError(f"Reports cover different targets: {targets_a} vs {targets_b}")
    utility = {u.v_trgt: u for u in report_a.utility}
    rows = []
    for a, b in zip(report_a.selections, report_b.selections):
        u = utility.get(a.target)
        diff = a.normalized_cost - b.normalized_cost
        rows.append(
            {
                "target": a.target,
                "value": u.v_achv if u is not None else a.value,
                "cost": f"{a.normalized_cost:.3f} ({diff:+.3f})",
                "mark": "-" if u is None else ("✓" if u.within_range else "✗"),
            }
        )
    return rows


@cli.command("compare")
@click.argument("report_a", type=click.Path())
@click.argument("report_b", type=click.Path())
def compare_command(report_a: str, report_b: str) -> None:
    """Tabulate value and cost of REPORT_A against REPORT_B per target."""
    try:
        rows = compare_rows(_load_report(report_a), _load_report(report_b))
    except ConfigError as e:
        _fail(EXIT_CONFIG, "compare", e.message)
        return
    click.echo(COMPARE_TEMPLATE.render(rows=rows), nl=False)


def curve_csv(report: CampaignReport) -> str:
    """Rows (target, achieved, cost) of a sweep for external plotting."""
    utility = {u.v_trgt: u for u in report.utility}
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["target", "achieved", "cost"])
    for s in report.selections:
        u = utility.get(s.target)
        achieved = u.v_achv if u is not None else s.value
        writer.writerow([f"{s.target:.4f}", f"{achieved:.6f}", f"{s.normalized_cost:.6f}"])
    return buffer.getvalue()


@cli.command("render-curve")
@click.argument("report", type=click.Path())
@click.option("--output", type=click.Path(), help="CSV file (default stdout)")
def render_curve_command(report: str, output: Optional[str]) -> None:
    """Emit the value/cost curve of REPORT as CSV."""
    try:
        text = curve_csv(_load_report(report))
    except ConfigError as e:
        _fail(EXIT_CONFIG, "render-curve", e.message)
        return
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@cli.group("cache")
def cache_group() -> None:
    """Inspect or clear the section cache."""


@cache_group.command("inspect")
@click.option("--cache-dir", help="Section cache directory (FLIPFORGE_STORE wins)")
def cache_inspect(cache_dir: Optional[str]) -> None:
    """List cache entries."""
    store = SectionStore(settings.get_store_path(cache_dir))
    for row in store.inspect():
        click.echo(
            f"{row['key'][:16]}  {row['section']:<16} sites={row['sites']} runs={row['runs']}"
        )


@cache_group.command("clear")
@click.option("--cache-dir", help="Section cache directory (FLIPFORGE_STORE wins)")
def cache_clear(cache_dir: Optional[str]) -> None:
    """Remove every cache entry."""
    store = SectionStore(settings.get_store_path(cache_dir))
    count = store.clear()
    click.echo(f"removed {count} entries from {store.root}")


@cli.group("bench")
def bench_group() -> None:
    """Shipped benchmark corpus."""


@bench_group.command("list")
def bench_list() -> None:
    """List the benchmarks and their versions."""
    try:
        suite = build_suite()
    except FlipForgeError as e:
        _fail(EXIT_CONFIG, "bench", e.message)
        return
    for info in suite.benchmarks.values():
        variants = ",".join(v.value for v in info.variants)
        click.echo(f"{info.name:<10} {variants:<28} {info.description}")


@bench_group.command("verify")
@click.argument("names", nargs=-1)
def bench_verify(names: List[str]) -> None:
    """Check golden outputs and roi coverage of NAMES (default: every benchmark)."""
    try:
        suite = build_suite()
        checks = verify_goldens(suite, list(names) or None)
    except (FlipForgeError, KeyError) as e:
        _fail(EXIT_CONFIG, "bench", getattr(e, "message", str(e)))
        return
    failed = [check for check in checks if not check.passed]
    for check in checks:
        mark = "ok" if check.passed else "FAIL"
        click.echo(f"{check.benchmark}/{check.variant.value}: {mark}")
    if failed:
        _fail(EXIT_PIPELINE, "bench", failed[0].message or "golden check failed")


@bench_group.command("analyze")
@click.argument("name")
@click.option(
    "--variant", default=Variant.BASE.value, type=click.Choice([v.value for v in Variant])
)
@click.option("--seed", type=int)
@click.option("--no-cache", is_flag=True, help="Analyze every section from scratch")
@click.option("--jobs", type=int, help="Injection worker processes")
@click.option("--cache-dir", help="Section cache directory (FLIPFORGE_STORE wins)")
@click.option("--out-dir", help="Reports root (default FLIPFORGE_OUT_DIR)")
def bench_analyze(
    name: str,
    variant: str,
    seed: Optional[int],
    no_cache: bool,
    jobs: Optional[int],
    cache_dir: Optional[str],
    out_dir: Optional[str],
) -> None:
    """Analyze benchmark NAME once per SDC threshold it ships with."""
    try:
        sweep = epsilon_sweep(
            build_suite(), name, variant, seed=seed, jobs=jobs, cache_dir=cache_dir
        )
    except (FlipForgeError, KeyError) as e:
        _fail(EXIT_CONFIG, "bench", getattr(e, "message", str(e)))
        return
    for bench in sweep:
        store = None if no_cache else SectionStore(settings.get_store_path(bench.config.cache_dir))
        try:
            report = analyze(
                bench.program,
                bench.layout,
                bench.config,
                store=store,
                out_dir=out_dir or settings.out_dir,
            )
        except PipelineError as e:
            _fail(EXIT_PIPELINE, e.stage, e.message)
            return
        except FlipForgeError as e:
            _fail(EXIT_PIPELINE, "analyze", e.message)
            return
        click.echo(
            f"{bench.name}/{bench.config.version}: {len(report.selections)} selections, "
            f"{report.runs_executed} runs executed, {report.runs_reused} reused"
        )
