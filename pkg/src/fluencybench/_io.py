"""Small deterministic-output helpers used by every writer in the package.

All artifact files go through atomic_write_* so a crashed run never leaves a
half-written file behind, and all floats that land in delimited interchange
files go through fmt_float so two runs of the same config produce
byte-identical output.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

FLOAT_DECIMALS = 6


def fmt_float(value: float, decimals: int = FLOAT_DECIMALS) -> str:
    """Fixed-point rendering used in CSV/JSON interchange files."""
    return f"{value:.{decimals}f}"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to path via a same-directory temp file and os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_json(path: str | Path, payload: Any, *, indent: int | None = 2) -> None:
    atomic_write_text(path, json.dumps(payload, indent=indent, sort_keys=True) + "\n")


def json_line(payload: Any) -> str:
    """One compact, key-sorted JSON line (no trailing newline)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))
