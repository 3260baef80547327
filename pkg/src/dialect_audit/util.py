"""Shared helpers: line-delimited record I/O, stable hashing, float formatting."""

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator


class AuditError(Exception):
    """Base class for validation failures (CLI exit code 1)."""


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) for each non-blank line. Raises on bad JSON."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            yield lineno, json.loads(line)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    """Write records one per line with sorted keys (byte-stable output)."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False))
            f.write("\n")


def dump_json(path: str | Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write("\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def fmt(x: float | None) -> str:
    """Fixed float rendering for tables; None renders as the undefined marker."""
    if x is None:
        return "NA"
    return format(float(x), ".12g")
