"""Benchmark cells and the aggregated result table."""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from cdp.core.errors import CDPError

# Level label of the whole-vector score
ALL_LEVELS = "all"

TABLE_COLUMNS = ["epsilon", "level", "mechanism", "mean_l1", "std_l1", "n_ok", "reason"]


class EmptyTableError(CDPError, ValueError):
    """Raised when a table with no rows is emitted."""


class CellKey(NamedTuple):
    """Address of one release: indices into the config's epsilons and mechanisms."""

    eps_idx: int
    mech_idx: int
    rep: int

    def label(self) -> str:
        return f"{self.eps_idx}:{self.mech_idx}:{self.rep}"

    @classmethod
    def parse(cls, label: str) -> "CellKey":
        e, m, r = (int(part) for part in label.split(":"))
        return cls(e, m, r)


@dataclass
class CellResult:
    """Scores of one release, or the reason it failed.

    Attributes:
        key: Cell address.
        scores: Normalized L1 per level label plus ``all``; NaN on failure.
        reason: Empty on success, ``ErrorType: message`` otherwise.
    """

    key: CellKey
    scores: Dict[str, float] = field(default_factory=dict)
    reason: str = ""

    @property
    def ok(self) -> bool:
        return not self.reason

    def to_dict(self) -> Dict[str, Any]:
        return {"scores": self.scores, "reason": self.reason}

    @classmethod
    def from_dict(cls, key: CellKey, data: Dict[str, Any]) -> "CellResult":
        return cls(key, {k: float(v) for k, v in data["scores"].items()}, data.get("reason", ""))


@dataclass(frozen=True)
class ResultRow:
    """Normalized L1 error of one (epsilon, level, mechanism) over repetitions.

    Attributes:
        epsilon: Privacy budget.
        level: Level label (``"1"`` is the root) or ``all``.
        mechanism: Release mechanism name.
        mean_l1: Mean over successful repetitions; NaN if none succeeded.
        std_l1: Sample standard deviation (0 for one repetition).
        n_ok: Successful repetitions.
        reason: First failure reason, empty if every repetition succeeded.
    """

    epsilon: float
    level: str
    mechanism: str
    mean_l1: float
    std_l1: float
    n_ok: int
    reason: str = ""


@dataclass
class ResultTable:
    """Rows keyed by (epsilon, level, mechanism), each present exactly once."""

    rows: List[ResultRow]

    def __post_init__(self) -> None:
        seen = set()
        for row in self.rows:
            key = (row.epsilon, row.level, row.mechanism)
            if key in seen:
                raise ValueError(f"duplicate table row {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[ResultRow]:
        return iter(self.rows)

    def get(self, epsilon: float, level: str, mechanism: str) -> ResultRow:
        for row in self.rows:
            if row.epsilon == epsilon and row.level == str(level) and row.mechanism == mechanism:
                return row
        raise KeyError((epsilon, level, mechanism))

    def keys(self) -> List[Tuple[float, str, str]]:
        return [(r.epsilon, r.level, r.mechanism) for r in self.rows]

    @property
    def epsilons(self) -> List[float]:
        return sorted({r.epsilon for r in self.rows})

    @property
    def levels(self) -> List[str]:
        return list(dict.fromkeys(r.level for r in self.rows))

    @property
    def mechanisms(self) -> List[str]:
        return list(dict.fromkeys(r.mechanism for r in self.rows))

    @property
    def complete(self) -> bool:
        return all(not r.reason for r in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[getattr(r, c) for c in TABLE_COLUMNS] for r in self.rows], columns=TABLE_COLUMNS
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ResultTable":
        """Rebuild from a frame of strings or typed columns."""
        rows = []
        for rec in frame.to_dict("records"):
            rows.append(
                ResultRow(
                    epsilon=float(rec["epsilon"]),
                    level=str(rec["level"]),
                    mechanism=str(rec["mechanism"]),
                    mean_l1=float(rec["mean_l1"]),
                    std_l1=float(rec["std_l1"]),
                    n_ok=int(rec["n_ok"]),
                    reason=_text(rec.get("reason")),
                )
            )
        return cls(rows)


def _text(value: Any) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return str(value)


def summarize(values: List[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation; ``(nan, nan)`` for no values."""
    if not values:
        return float("nan"), float("nan")
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def first_reason(cells: List[CellResult]) -> Optional[str]:
    for cell in cells:
        if not cell.ok:
            return cell.reason
    return None
