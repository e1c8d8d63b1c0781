"""
JSON file helpers: canonical dumps and atomic writes.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Union

from pydantic import BaseModel


def to_jsonable(payload: Any) -> Any:
    """Convert pydantic models (recursively) into plain JSON-compatible data.

    Python-mode dumps keep +inf as a float so that ``json`` writes ``Infinity``.
    """
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="python", by_alias=True)
    if isinstance(payload, dict):
        return {str(k): to_jsonable(v) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [to_jsonable(v) for v in payload]
    return payload


def dumps(payload: Any) -> str:
    """Canonical text form of a payload: sorted keys, two-space indentation."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, default=_default) + "\n"


def _default(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return to_jsonable(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_atomic(path: Union[str, Path], text: str) -> None:
    """Write a file by writing a temporary sibling and renaming it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_json(path: Union[str, Path], payload: Any) -> None:
    write_atomic(path, dumps(payload))


def write_jsonl(path: Union[str, Path], records: Iterable[Any]) -> None:
    """Write one canonical, single-line JSON document per record."""
    lines = [
        json.dumps(to_jsonable(record), sort_keys=True, default=_default) for record in records
    ]
    write_atomic(path, "\n".join(lines) + ("\n" if lines else ""))


def read_json(path: Union[str, Path]) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
