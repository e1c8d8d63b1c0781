"""
Directory store for per-section analysis results.

Each analyzed section instance is saved as ``<key>.json`` where the key is a
SHA-256 digest of everything that determines the instance's golden behavior
and its analysis settings. ``manifest.json`` indexes the entries and
``adjust_state.json`` carries the target-adjustment schedule across versions.
"""

import logging
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from src.config import settings
from src.interp.golden import GoldenTrace, SectionInstance
from src.schemas.configs import RunConfig
from src.schemas.injection import ErrorSite, OutcomeRecord
from src.schemas.program import Bank, Instruction, OperandSlot
from src.schemas.reports import AdjustState, CachedOutcome, SectionCacheEntry
from src.schemas.specs import AffineSdcSpec
from src.utils.bits import Word, same_word, word_bits
from src.utils.digest import sha256_hex
from src.utils.jsonio import read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
ADJUST_STATE = "adjust_state.json"

SiteKey = Tuple[int, OperandSlot, int]


def _relative_instruction(inst: Instruction, base: int) -> Dict[str, Any]:
    data = inst.model_dump(mode="json", exclude={"pc", "target", "imm"})
    data["target"] = None if inst.target is None else inst.target - base
    if isinstance(inst.imm, float):
        data["imm"] = ["float", word_bits(inst.imm, Bank.FLOAT)]
    else:
        data["imm"] = inst.imm
    return data


def _bank_of_register(name: str) -> Bank:
    return Bank.INT if name.startswith("r") else Bank.FLOAT


def section_key(trace: GoldenTrace, inst: SectionInstance, config: RunConfig) -> str:
    """Content digest of one section instance and the settings its results depend on.

    Folds in the section's code with section-relative branch targets, its
    declared and effective regions, the golden input values, the live-in
    registers and memory words, the analysis configurations and the ISA version.
    """
    program = trace.program
    banks = program.banks
    code = program.instructions[inst.begin_pc : inst.end_pc + 1]
    payload = {
        "isa": settings.isa_version,
        "section": inst.section,
        "occurrence": inst.occurrence,
        "code": [_relative_instruction(i, inst.begin_pc) for i in code],
        "inputs": [r.model_dump(mode="json") for r in inst.inputs],
        "outputs": [r.model_dump(mode="json") for r in inst.outputs],
        "golden_inputs": [
            [word_bits(v, banks[w]) for w, v in zip(region.words(), values)]
            for region, values in zip(inst.inputs, inst.golden_inputs)
        ],
        "live_in_regs": {
            name: word_bits(v, _bank_of_register(name)) for name, v in inst.live_in_regs.items()
        },
        "live_in_mem": {str(a): word_bits(v, banks[a]) for a, v in inst.live_in_mem.items()},
        "detector": config.detector.model_dump(mode="json"),
        "prune": config.prune.model_dump(mode="json"),
        "sites": config.sites.model_dump(mode="json"),
        "sensitivity": config.sensitivity.model_dump(mode="json"),
    }
    return sha256_hex(payload)


def cache_entry(
    key: str,
    inst: SectionInstance,
    spec: AffineSdcSpec,
    records: Dict[int, OutcomeRecord],
    runs: int,
) -> SectionCacheEntry:
    """Package an analyzed instance with marker-relative pcs and dynamic indices."""
    by_id = {record.site.id: record.site for record in records.values()}
    outcomes = []
    for record in records.values():
        site = record.site
        pilot: Optional[ErrorSite] = by_id.get(site.pilot) if site.pilot is not None else None
        outcomes.append(
            CachedOutcome(
                dyn=site.dyn - inst.begin_dyn,
                pc=site.pc - inst.begin_pc,
                slot=site.slot,
                reg=site.reg,
                bank=site.bank,
                bit=site.bit,
                prune=site.prune,
                pilot_dyn=None if pilot is None else pilot.dyn - inst.begin_dyn,
                pilot_slot=None if pilot is None else pilot.slot,
                outcome=record.outcome,
                r=record.r,
                inferred=record.inferred,
            )
        )
    return SectionCacheEntry(
        key=key,
        section=inst.section,
        golden_outputs=[list(values) for values in inst.golden_outputs],
        spec=spec,
        sites=len(records),
        runs=runs,
        outcomes=outcomes,
    )


def restore_outcomes(
    entry: SectionCacheEntry, inst: SectionInstance, sites: List[ErrorSite]
) -> Optional[Dict[int, OutcomeRecord]]:
    """Re-attach cached outcomes to freshly enumerated sites, or None if they disagree."""
    cached: Dict[SiteKey, CachedOutcome] = {
        (o.dyn, o.slot, o.bit): o for o in entry.outcomes
    }
    if len(cached) != len(sites):
        return None
    records: Dict[int, OutcomeRecord] = {}
    for site in sites:
        hit = cached.get((site.dyn - inst.begin_dyn, site.slot, site.bit))
        if hit is None or hit.prune is not site.prune or hit.pc != site.pc - inst.begin_pc:
            return None
        records[site.id] = OutcomeRecord(
            site=site, outcome=hit.outcome, r=hit.r, inferred=hit.inferred
        )
    return records


def _same_outputs(stored: List[List[Word]], fresh: List[List[Word]], banks, inst) -> bool:
    if len(stored) != len(fresh):
        return False
    for region, a, b in zip(inst.outputs, stored, fresh):
        if len(a) != len(b):
            return False
        for word, x, y in zip(region.words(), a, b):
            if not same_word(x, y, banks[word]):
                return False
    return True


class SectionStore:
    """
    File-backed store of section cache entries.

    The orchestrating process is the only writer; every file is replaced
    atomically so concurrent readers never observe partial entries.
    """

    def __init__(self, root: Union[str, Path]) -> None:
        """Initialize the store.

        Args:
            root: Store directory (created on first write)
        """
        self.root = Path(root)
        self.manifest_path = self.root / MANIFEST
        self.manifest: Dict[str, Dict[str, Any]] = self._load_manifest()

    def _load_manifest(self) -> Dict[str, Dict[str, Any]]:
        if not self.manifest_path.exists():
            return {}
        try:
            data = read_json(self.manifest_path)
            return dict(data.get("entries", {}))
        except (OSError, ValueError) as e:
            logger.warning(f"Ignoring unreadable manifest {self.manifest_path}: {e}")
            return {}

    def _entry_path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> Optional[SectionCacheEntry]:
        """
        Get a cache entry.

        Returns:
            The entry, or None if it is absent or cannot be read
        """
        path = self._entry_path(key)
        if not path.exists():
            return None
        try:
            return SectionCacheEntry.model_validate(read_json(path))
        except (OSError, ValueError, ValidationError) as e:
            logger.warning(f"Ignoring corrupt cache entry {path.name}: {e}")
            return None

    def lookup(
        self, key: str, inst: SectionInstance, banks
    ) -> Optional[SectionCacheEntry]:
        """Get an entry whose stored golden outputs match the instance's fresh ones."""
        entry = self.get(key)
        if entry is None:
            return None
        if not _same_outputs(entry.golden_outputs, inst.golden_outputs, banks, inst):
            logger.warning(f"Cache entry {key[:12]} for {inst.label} has stale golden outputs")
            return None
        logger.debug(f"Cache hit for {inst.label} ({key[:12]})")
        return entry

    def put(self, entry: SectionCacheEntry) -> None:
        """Save an entry and index it in the manifest."""
        write_json(self._entry_path(entry.key), entry)
        self.manifest[entry.key] = {
            "section": entry.section,
            "sites": entry.sites,
            "runs": entry.runs,
        }
        self._save_manifest()
        logger.debug(f"Cached {entry.section} as {entry.key[:12]}")

    def _save_manifest(self) -> None:
        write_json(
            self.manifest_path,
            {"schema_version": settings.schema_version, "entries": self.manifest},
        )

    def inspect(self) -> List[Dict[str, Any]]:
        """Manifest rows (key, section, sites, runs) sorted by section then key."""
        rows = [{"key": key, **meta} for key, meta in self.manifest.items()]
        return sorted(rows, key=lambda row: (row["section"], row["key"]))

    def clear(self) -> int:
        """Remove the whole store; returns the number of entries dropped."""
        count = len(self.manifest)
        if self.root.exists():
            shutil.rmtree(self.root)
        self.manifest = {}
        logger.info(f"Cleared {count} cache entries from {self.root}")
        return count

    def load_adjust_state(self) -> Optional[AdjustState]:
        path = self.root / ADJUST_STATE
        if not path.exists():
            return None
        try:
            return AdjustState.model_validate(read_json(path))
        except (OSError, ValueError, ValidationError) as e:
            logger.warning(f"Ignoring unreadable adjustment state: {e}")
            return None

    def save_adjust_state(self, state: AdjustState) -> None:
        write_json(self.root / ADJUST_STATE, state)
