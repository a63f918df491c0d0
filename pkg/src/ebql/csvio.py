"""Schema-checked CSV output with exact float round-tripping."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .exceptions import SchemaError

# Column types accepted in a schema: ``(name, type)`` pairs.
_TYPES = (int, float, str)


def _format(value, kind, column):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) and not hasattr(value, "__float__"):
            raise SchemaError(f"column {column!r} expects a float, got {value!r}", column)
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if kind is int:
        if isinstance(value, bool):
            return "1" if value else "0"
        try:
            as_int = int(value)
        except (TypeError, ValueError):
            raise SchemaError(f"column {column!r} expects an integer, got {value!r}", column) from None
        if as_int != value:
            raise SchemaError(f"column {column!r} expects an integer, got {value!r}", column)
        return str(as_int)
    if not isinstance(value, str):
        raise SchemaError(f"column {column!r} expects a string, got {value!r}", column)
    if "\x00" in value:
        raise SchemaError(f"column {column!r}: NUL characters cannot be written", column)
    return value


def emit_csv(records: Iterable[Mapping], schema: Sequence[tuple], path) -> Path:
    """Write ``records`` with a header row; the schema fixes column order and types.

    Floats are written with 17 significant digits so ``float()`` recovers them
    exactly.  Missing or extra keys raise :class:`SchemaError`.
    """
    names = [name for name, _ in schema]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column in schema")
    for name, kind in schema:
        if kind not in _TYPES:
            raise SchemaError(f"unsupported type {kind!r} for column {name!r}", name)
    rows = []
    expected = set(names)
    for rec in records:
        keys = set(rec)
        if keys != expected:
            missing = sorted(expected - keys)
            extra = sorted(keys - expected)
            column = (missing or extra)[0]
            raise SchemaError(f"record does not match schema (missing {missing}, unexpected {extra})", column)
        rows.append([_format(rec[name], kind, name) for name, kind in schema])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # The writer quotes fields containing any lineterminator character, so a
    # "\r\n" terminator makes it quote both; each row then ends in a plain "\n".
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in [names] + rows:
            buf.seek(0)
            buf.truncate()
            writer.writerow(row)
            fh.write(buf.getvalue()[:-2] + "\n")
    return path


def read_csv(path, schema: Sequence[tuple]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = [name for name, _ in schema]
        if header != names:
            raise SchemaError(f"header {header} does not match schema {names}")
        return [{name: kind(v) for (name, kind), v in zip(schema, row)} for row in reader]
