"""
Lipschitz-constant estimation by random input perturbation.

Each section instance is re-executed from its golden entry state with one input
region perturbed; the largest observed ratio of output deviation to input
perturbation becomes the amplification coefficient K[output][input].
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from src.errors import SensitivityError
from src.interp.golden import GoldenTrace, SectionInstance
from src.interp.injector import TIMEOUT_FACTOR
from src.interp.machine import Machine, Trap
from src.schemas.configs import PerturbationPattern, SensitivityConfig
from src.schemas.program import Bank, Opcode
from src.schemas.specs import AffineSdcSpec, TotalSdcSpec
from src.utils.bits import magnitude, to_signed64
from src.utils.digest import stable_int

logger = logging.getLogger(__name__)

MAX_DISCARDED_FRACTION = 0.5
_MIXED_CYCLE = (PerturbationPattern.SINGLE, PerturbationPattern.SUBSET, PerturbationPattern.ALL)


def symbol_name(inst: SectionInstance, output: str) -> str:
    """Globally unique symbol of one instance output."""
    return f"phi[{inst.label}:{output}]"


def _draw_rng(cfg: SensitivityConfig, inst: SectionInstance, input_index: int, draw: int):
    """Generator for one draw; streams are keyed by section id, occurrence and draw counter."""
    return np.random.default_rng(
        [cfg.seed & (2**63 - 1), stable_int(inst.section), inst.occurrence, input_index, draw]
    )


def _pattern(cfg: SensitivityConfig, draw: int) -> PerturbationPattern:
    if cfg.pattern is PerturbationPattern.MIXED:
        return _MIXED_CYCLE[draw % len(_MIXED_CYCLE)]
    return cfg.pattern


def _choose(rng, pattern: PerturbationPattern, n: int) -> np.ndarray:
    if pattern is PerturbationPattern.SINGLE:
        return np.array([rng.integers(n)])
    if pattern is PerturbationPattern.ALL:
        return np.arange(n)
    mask = rng.random(n) < 0.5
    if not mask.any():
        mask[rng.integers(n)] = True
    return np.flatnonzero(mask)


class _SectionRunner:
    """Runs one section instance from its golden entry state."""

    def __init__(self, trace: GoldenTrace, inst: SectionInstance) -> None:
        self.machine = Machine(trace.program)
        self.inst = inst
        self.limit = TIMEOUT_FACTOR * inst.steps

    def run(self, patch: List[Tuple[int, object]]) -> Optional[List[float]]:
        """Output deviations per effective region, or None if the run trapped or timed out."""
        state = self.inst.entry.restore()
        for word, value in patch:
            state.mem[word] = value
        try:
            while True:
                effect = self.machine.step(state)
                if effect.opcode is Opcode.SECTION_END or state.halted:
                    break
                if state.steps - self.inst.begin_dyn > self.limit:
                    return None
        except Trap:
            return None
        banks = self.machine.banks
        return [
            max(
                (magnitude(state.mem[w], g, banks[w]) for w, g in zip(region.words(), values)),
                default=0.0,
            )
            for region, values in zip(self.inst.outputs, self.inst.golden_outputs)
        ]


def estimate_spec(
    trace: GoldenTrace, instance: int, cfg: Optional[SensitivityConfig] = None
) -> AffineSdcSpec:
    """Estimate the amplification of every input region onto every output region.

    Args:
        trace: Golden trace holding the instance's entry state
        instance: Section instance index
        cfg: Sampling settings

    Returns:
        The instance's affine SDC specification

    Raises:
        SensitivityError: If more than half of the perturbed runs trap or time out
    """
    cfg = cfg or SensitivityConfig()
    inst = trace.instances[instance]
    runner = _SectionRunner(trace, inst)
    banks = trace.program.banks
    outputs = inst.outputs
    K = np.zeros((len(outputs), len(inst.inputs)))
    kept = discarded = 0

    for m, (region, golden) in enumerate(zip(inst.inputs, inst.golden_inputs)):
        words = list(region.words())
        if not words:
            continue
        for draw in range(cfg.samples):
            rng = _draw_rng(cfg, inst, m, draw)
            chosen = _choose(rng, _pattern(cfg, draw), len(words))
            u = rng.uniform(-1.0, 1.0, size=len(chosen))
            u[u == 0.0] = 1.0

            patch = []
            size = 0.0
            for index, ui in zip(chosen, u):
                word = words[int(index)]
                gold = golden[int(index)]
                if banks[word] is Bank.INT:
                    step = max(1, int(round(abs(ui) * cfg.phi_max)))
                    value = to_signed64(int(gold) + (step if ui > 0 else -step))
                else:
                    value = float(gold) + float(ui) * cfg.phi_max
                patch.append((word, value))
                size = max(size, magnitude(value, gold, banks[word]))
            if size == 0.0:
                continue

            deviations = runner.run(patch)
            if deviations is None:
                discarded += 1
                continue
            kept += 1
            for k, dev in enumerate(deviations):
                ratio = dev / size
                if ratio > K[k, m]:
                    K[k, m] = ratio

    total = kept + discarded
    if total and discarded / total > MAX_DISCARDED_FRACTION:
        raise SensitivityError(
            f"Section {inst.label} is not perturbation-stable: "
            f"{discarded} of {total} perturbed runs trapped or timed out"
        )
    if discarded:
        logger.warning(f"Sensitivity of {inst.label}: discarded {discarded} of {total} samples")

    spec = AffineSdcSpec(
        instance=inst.index,
        section=inst.section,
        inputs=tuple(r.name for r in inst.inputs),
        outputs=tuple(r.name for r in outputs),
        K=tuple(tuple(float(x) for x in row) for row in K),
        samples=kept,
        discarded=discarded,
    )
    logger.debug(f"Estimated K for {inst.label}: {spec.K}")
    return spec


def totalize(spec: AffineSdcSpec, inst: SectionInstance) -> TotalSdcSpec:
    """Attach one fresh symbolic error variable to every output of the instance."""
    return TotalSdcSpec(
        **spec.model_dump(),
        symbols=tuple(symbol_name(inst, output) for output in spec.outputs),
    )
