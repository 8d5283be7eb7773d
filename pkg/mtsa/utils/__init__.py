"""mtsa utils used internally."""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any


def format_number(value: float) -> str:
    """Render a number the shortest way that reads back to the same float.

    Integral values lose their trailing ``.0``, so ``2.0`` renders as ``2``.

    Args:
        value (float): The number.

    Returns:
        str
    """
    value = float(value)
    if math.isfinite(value) and value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write text to path through a temporary file and a rename.

    Readers see either the old content or the new one, never a partial file.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_dumps(data: Any) -> str:
    """Pretty JSON with a stable key order and a trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
