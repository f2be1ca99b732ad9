"""Deterministic JSON and CSV report files."""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 15


def _json_safe(obj):
    """Convert to JSON-serializable form: numpy values to python, non-finite floats to strings."""
    if obj is None:
        return None
    if isinstance(obj, BaseModel):
        return _json_safe(obj.model_dump(by_alias=True))
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.{FLOAT_DIGITS}g}")
    if isinstance(obj, str):
        return obj
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(x) for x in obj]
    return str(obj)


def dumps(obj: Any) -> str:
    return json.dumps(_json_safe(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _cell(v) -> str:
    v = _json_safe(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{FLOAT_DIGITS}g}"
    return str(v)


def write_csv(path: Path, rows: Iterable[Any], columns: Sequence[str]) -> Path:
    """One row per item; pydantic rows are dumped first, missing keys become empty cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            data = row.model_dump() if isinstance(row, BaseModel) else dict(row)
            writer.writerow([_cell(data.get(col)) for col in columns])
    logger.info("wrote %s", path)
    return path
