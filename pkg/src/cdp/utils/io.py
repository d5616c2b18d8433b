"""Reading and writing node vectors, sample files and result tables.

Floats are written with ``%.17g`` so every value survives a write/read cycle
bit for bit.
"""

import json
import math
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cdp.core.errors import CDPError
from cdp.core.results import TABLE_COLUMNS, EmptyTableError, ResultRow, ResultTable

FLOAT_FORMAT = "%.17g"


class ParseError(CDPError, ValueError):
    """Raised when an input CSV is missing columns or holds non-numeric values."""


def read_vector(path: Path, value_column: str = "count") -> Tuple[List[str], np.ndarray]:
    """Read a ``node,<value_column>`` CSV.

    Returns:
        Node identifiers in file order and their values.

    Raises:
        ParseError: On missing columns, duplicate nodes or non-numeric values.
    """
    try:
        frame = pd.read_csv(path, dtype={"node": str}, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e
    missing = {"node", value_column} - set(frame.columns)
    if missing:
        raise ParseError(f"{path}: missing columns {sorted(missing)}")
    if frame["node"].duplicated().any():
        dupes = frame.loc[frame["node"].duplicated(), "node"].tolist()
        raise ParseError(f"{path}: duplicate nodes {dupes[:5]}")
    values = pd.to_numeric(frame[value_column], errors="coerce")
    bad = frame.loc[values.isna(), "node"].tolist()
    if bad:
        raise ParseError(f"{path}: non-numeric {value_column} for nodes {bad[:5]}")
    return frame["node"].astype(str).tolist(), values.to_numpy(dtype=np.float64)


def write_vector(path: Path, nodes: Sequence[str], values: Any, value_column: str = "count") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"node": list(nodes), value_column: np.asarray(values, dtype=np.float64)})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_samples(path: Path, nodes: Sequence[str], draws: Any) -> Path:
    """One draw per row, one column per node."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(np.atleast_2d(np.asarray(draws, dtype=np.float64)), columns=list(nodes))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=float))
    return path


def _table_format(path: Path, fmt: Optional[str]) -> str:
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt not in ("csv", "json", "dat"):
        raise ValueError(f"unknown table format {fmt!r} for {path}")
    return fmt


def emit_table(t: ResultTable, path: Path, fmt: Optional[str] = None) -> Path:
    """Write ``t`` as CSV, JSON or a gnuplot data file.

    The format follows ``fmt`` or the file suffix. CSV and JSON carry the
    columns ``epsilon, level, mechanism, mean_l1, std_l1`` plus ``n_ok`` and
    ``reason``; the ``.dat`` rendition holds one ``epsilon mean std`` block
    per (mechanism, level), separated by two blank lines for gnuplot's
    ``index``.

    Raises:
        EmptyTableError: If ``t`` has no rows.
        OSError: If the file cannot be written.
    """
    path = Path(path)
    if len(t) == 0:
        raise EmptyTableError("refusing to emit a table with no rows")
    fmt = _table_format(path, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        t.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
    elif fmt == "json":
        payload = {"columns": TABLE_COLUMNS, "rows": [[getattr(r, c) for c in TABLE_COLUMNS] for r in t]}
        path.write_text(json.dumps(payload, indent=2))
    else:
        path.write_text(_gnuplot_blocks(t))
    return path


def _gnuplot_blocks(t: ResultTable) -> str:
    blocks = []
    for mechanism in t.mechanisms:
        for level in t.levels:
            rows = sorted(
                (r for r in t if r.mechanism == mechanism and r.level == level), key=lambda r: r.epsilon
            )
            lines = [f"# mechanism={mechanism} level={level}", "# epsilon mean_l1 std_l1"]
            lines += [f"{r.epsilon:.17g} {r.mean_l1:.17g} {r.std_l1:.17g}" for r in rows]
            blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"


def parse_table(path: Path, fmt: Optional[str] = None) -> ResultTable:
    """Read a table written by ``emit_table`` in CSV or JSON form."""
    path = Path(path)
    fmt = _table_format(path, fmt)
    if fmt == "csv":
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        return ResultTable.from_frame(frame)
    if fmt == "json":
        data = json.loads(path.read_text())
        return ResultTable(
            [ResultRow(*(_json_value(c, v) for c, v in zip(data["columns"], row))) for row in data["rows"]]
        )
    raise ValueError("gnuplot data files are write-only")


def _json_value(column: str, value: Any) -> Any:
    if column in ("mean_l1", "std_l1", "epsilon"):
        return float(value) if value is not None else math.nan
    if column == "n_ok":
        return int(value)
    return str(value)
