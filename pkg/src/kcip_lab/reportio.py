"""Schema-1 CSV files: '# key=value' metadata lines, then a header row.

This format is the interface consumed by the plotting component, so writers
must stay deterministic: no timestamps, floats via repr, '\n' newlines.
"""

from __future__ import annotations

import hashlib
import io

from .errors import ConfigError

SCHEMA_VERSION = "1"


def config_hash(pairs: dict) -> str:
    """Stable short hash of a flat key -> value mapping."""
    blob = "\n".join(f"{k}={pairs[k]}" for k in sorted(pairs))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip repr, numpy included
    return str(value)


def write_report(path, metadata: dict, columns, rows):
    """Write one schema-1 CSV.  metadata['schema'] is forced to SCHEMA_VERSION;
    rows are sequences matching `columns`."""
    meta = {"schema": SCHEMA_VERSION, **metadata}
    buf = io.StringIO()
    for key in meta:
        buf.write(f"# {key}={format_value(meta[key])}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        if len(row) != len(columns):
            raise ConfigError(f"row width {len(row)} != {len(columns)} columns")
        buf.write(",".join(format_value(v) for v in row) + "\n")
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_report(path):
    """Parse a schema-1 CSV back into (metadata, columns, rows-of-strings)."""
    metadata = {}
    columns = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                metadata[key] = value
                continue
            if columns is None:
                columns = line.split(",")
                continue
            rows.append(line.split(","))
    if columns is None:
        raise ConfigError(f"{path}: no column header found")
    if metadata.get("schema") != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema {metadata.get('schema')!r} is not {SCHEMA_VERSION!r}"
        )
    return metadata, columns, rows


def rows_as_floats(columns, rows, wanted):
    """Extract the named columns as float lists; empty cells become None."""
    idx = []
    for name in wanted:
        if name not in columns:
            raise ConfigError(f"missing column {name!r}")
        idx.append(columns.index(name))
    out = []
    for row in rows:
        out.append([float(row[i]) if row[i] != "" else None for i in idx])
    return out
