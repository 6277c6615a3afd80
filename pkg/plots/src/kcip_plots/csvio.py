"""Reader for the schema-1 CSV interface emitted by kcip-lab.

Files carry '# key=value' metadata lines before a header row; this module
is the plotting side of that contract and is deliberately independent of
the simulator package.
"""

SCHEMA_VERSION = "1"


class SchemaError(ValueError):
    """The input file does not follow the schema-1 layout."""


def read_report(path):
    """Parse a report into (metadata, columns, rows-of-strings)."""
    metadata = {}
    columns = None
    rows = []
    try:
        fh = open(path)
    except OSError as exc:
        raise SchemaError(f"cannot open {path!r}: {exc}") from exc
    with fh:
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
    if metadata.get("schema") != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema {metadata.get('schema')!r}, expected {SCHEMA_VERSION!r}"
        )
    if columns is None:
        raise SchemaError(f"{path}: missing column header")
    return metadata, columns, rows


def columns_as_floats(columns, rows, wanted):
    """Extract named columns as float lists; empty cells (censored values)
    become None."""
    indices = []
    for name in wanted:
        if name not in columns:
            raise SchemaError(f"missing column {name!r} (have {columns})")
        indices.append(columns.index(name))
    out = []
    for row in rows:
        out.append([float(row[i]) if row[i] != "" else None for i in indices])
    return out
