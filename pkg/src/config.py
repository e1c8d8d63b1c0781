"""
Configuration settings for flipforge.

This module loads and validates configuration settings from environment variables.
"""

from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Project settings
    project_name: str = "flipforge"
    version: str = "0.1.0"

    # Storage
    store: Optional[str] = Field(
        None, description="Section cache directory (overrides the run configuration)"
    )
    out_dir: str = Field("out", description="Directory for per-version report trees")
    bench_dir: Optional[str] = Field(None, description="Benchmark asset directory")

    # Execution
    jobs: int = Field(1, description="Default number of injection worker processes", ge=1)
    hard_step_cap: int = Field(
        5_000_000, description="Maximum dynamic instructions of a golden run", ge=1
    )
    checkpoint_interval: int = Field(
        64, description="Dynamic instructions between golden-run checkpoints", ge=1
    )

    # Versioning folded into cache keys and report files
    isa_version: str = Field("toy-isa/1", description="ISA semantics version")
    schema_version: int = Field(1, description="Schema version of every JSON output")

    # Logging
    log_level: str = Field("INFO", description="Logging level")

    model_config = SettingsConfigDict(
        env_prefix="FLIPFORGE_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    def get_store_path(self, configured: Optional[str] = None) -> Path:
        """Get the section cache directory.

        The ``FLIPFORGE_STORE`` environment variable wins over the run configuration.
        """
        if self.store:
            return Path(self.store)
        if configured:
            return Path(configured)

        root_dir = Path(__file__).parent.parent
        return root_dir / "store"

    def get_bench_path(self) -> Path:
        """Get the benchmark asset directory (``bench/`` at the repository root by default)."""
        if self.bench_dir:
            return Path(self.bench_dir)
        return Path(__file__).parent.parent / "bench"


# Create a global settings instance
settings = Settings()
