"""Small shared helpers."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Iterator


def round_half_up(x: float) -> int:
    """Round a non-negative value to the nearest integer, halves away from zero.

    Python's built-in round() ties to even, which would turn 2.5% into 2;
    all reported percentages and meter totals use this rule instead.
    """
    if x < 0:
        raise ValueError(f"expected a non-negative value, got {x}")
    return int(math.floor(x + 0.5))


def write_jsonl(path: str | Path, records: Iterable[dict], append: bool = False) -> int:
    """Write records as JSON lines; returns the number of lines written."""
    mode = "a" if append else "w"
    n = 0
    with open(path, mode, encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield one parsed object per non-empty line."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
