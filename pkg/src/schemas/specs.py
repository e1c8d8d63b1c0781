"""
SDC propagation specification schemas.

This module provides the per-section affine SDC specifications, their totalized
form with symbolic error variables, and the composed end-to-end specification.
"""

import math
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class AffineSdcSpec(BaseModel):
    """Per-instance amplification bounds: Δ(o_k) ≤ Σ_m K[k][m]·Δ(i_m)."""

    model_config = ConfigDict(frozen=True)

    instance: int = Field(..., ge=0)
    section: str
    inputs: Tuple[str, ...] = Field(..., description="Input region names (columns of K)")
    outputs: Tuple[str, ...] = Field(..., description="Effective output region names (rows of K)")
    K: Tuple[Tuple[float, ...], ...] = Field(..., description="Matrix indexed [output][input]")
    samples: int = Field(0, ge=0, description="Perturbation runs kept")
    discarded: int = Field(0, ge=0, description="Perturbation runs that trapped or timed out")

    @model_validator(mode="after")
    def _check_dimensions(self) -> "AffineSdcSpec":
        if len(self.K) != len(self.outputs):
            raise ValueError("K must have one row per output")
        for row in self.K:
            if len(row) != len(self.inputs):
                raise ValueError("K must have one column per input")
            for coeff in row:
                if math.isnan(coeff) or coeff < 0:
                    raise ValueError("K coefficients must be non-negative")
        return self

    def coefficient(self, output: str, input_region: str) -> float:
        return self.K[self.outputs.index(output)][self.inputs.index(input_region)]


class TotalSdcSpec(AffineSdcSpec):
    """An AffineSdcSpec with one fresh symbolic error variable per output."""

    symbols: Tuple[str, ...]

    @model_validator(mode="after")
    def _one_symbol_per_output(self) -> "TotalSdcSpec":
        if len(self.symbols) != len(self.outputs):
            raise ValueError("exactly one symbol per output")
        return self

    def symbol_of(self, output: str) -> str:
        return self.symbols[self.outputs.index(output)]


class AffineForm(BaseModel):
    """Σ coeff·φ over symbolic error variables, with constant 0.

    The untested section uses the reserved always-infinite form.
    """

    model_config = ConfigDict(frozen=True)

    terms: Dict[str, float] = Field(default_factory=dict)
    always_infinite: bool = False

    def symbols(self) -> List[str]:
        return sorted(self.terms)


class EndToEndSpec(BaseModel):
    """Composed bounds on every final output in terms of all symbols."""

    model_config = ConfigDict(frozen=True)

    outputs: Tuple[str, ...] = Field(..., description="Final output names λ")
    forms: Dict[str, AffineForm]
    instance_symbols: Dict[int, Tuple[str, ...]] = Field(
        default_factory=dict, description="Symbols introduced by each instance, in output order"
    )

    def dump(self) -> Dict[str, List[Dict[str, float]]]:
        """JSON form: {lambda: [{symbol, coeff}...]}."""
        return {
            name: [
                {"symbol": symbol, "coeff": self.forms[name].terms[symbol]}
                for symbol in self.forms[name].symbols()
            ]
            for name in self.outputs
        }
