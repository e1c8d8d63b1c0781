#!/usr/bin/env python
"""
Main entry point for flipforge.

This module configures logging and hands over to the command-line interface.
"""

import logging
import sys
from pathlib import Path

# Add the project root to the Python path
ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from src.config import settings  # noqa: E402
from src.cli import cli  # noqa: E402

logger = logging.getLogger(__name__)


def configure_logging(level: str) -> None:
    """Send log records to stderr; stdout is reserved for command output."""
    logging.basicConfig(
        level=level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def run() -> None:
    """Console-script entry point."""
    configure_logging(settings.log_level)
    try:
        cli(prog_name="flipforge")
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)


if __name__ == "__main__":
    run()
