"""JSON helpers shared by the file formats (complex matrices as [re, im] pairs)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np


class SchemaError(ValueError):
    """A JSON document failed schema validation.

    The message names the offending location as a JSON pointer.
    """

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


COMPLEX = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}
MATRIX = {"type": "array", "items": {"type": "array", "items": COMPLEX}, "minItems": 1}


def encode_array(a: np.ndarray) -> list:
    """Nested lists of [re, im] pairs, row-major, any rank >= 1."""
    a = np.asarray(a, dtype=complex)
    stacked = np.stack([a.real, a.imag], axis=-1)
    return stacked.tolist()


def decode_array(obj: Any) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def validate(doc: Any, schema: dict) -> None:
    """Raise :class:`SchemaError` for the first (deepest) violation."""
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (-len(e.absolute_path), str(e.absolute_path)))
    if errors:
        err = errors[0]
        pointer = "".join(f"/{p}" for p in err.absolute_path)
        raise SchemaError(pointer, err.message)


def dump_json(doc: Any, path: str | Path | None = None) -> str:
    # Python's float repr is the shortest string that round-trips exactly.
    text = json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())
