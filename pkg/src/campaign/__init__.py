"""Pipeline orchestration, the section cache and incremental re-analysis."""

from src.campaign.pipeline import (
    account,
    analyze,
    diff_sections,
    load_inputs,
    program_digest,
    write_reports,
)
from src.campaign.store import SectionStore, section_key

__all__ = [
    "SectionStore",
    "account",
    "analyze",
    "diff_sections",
    "load_inputs",
    "program_digest",
    "section_key",
    "write_reports",
]
