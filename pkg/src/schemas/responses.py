"""
Diagnostic schemas shared by every pipeline stage.

This module provides the structured error detail carried by exceptions and
returned by validators.
"""

from typing import Any, Dict, Optional

from pydantic import BaseModel, Field


class ErrorDetail(BaseModel):
    """Model for detailed error information."""

    code: str = Field(..., description="Machine-readable error code")
    message: str = Field(..., description="Error message")
    field: Optional[str] = Field(
        None, description="Offending section, region or field, if applicable"
    )
    details: Optional[Dict[str, Any]] = Field(None, description="Additional error details")

    def __str__(self) -> str:
        where = f" ({self.field})" if self.field else ""
        return f"{self.code}{where}: {self.message}"
