"""
Content digests over canonical JSON serializations.
"""

import json
from typing import Any

from cryptography.hazmat.primitives import hashes


def canonical_bytes(payload: Any) -> bytes:
    """Serialize a JSON-compatible payload deterministically."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=True).encode(
        "utf-8"
    )


def sha256_hex(payload: Any) -> str:
    """SHA-256 hex digest of a payload's canonical serialization."""
    digest = hashes.Hash(hashes.SHA256())
    digest.update(canonical_bytes(payload))
    return digest.finalize().hex()


def stable_int(*parts: Any, bits: int = 63) -> int:
    """Derive a non-negative integer from arbitrary JSON-compatible parts."""
    return int(sha256_hex(list(parts))[: bits // 4], 16)
