"""
CSV Serialization Utilities
Deterministic, locale-independent CSV/text output for reports.

Floats are written with Python's shortest round-trip repr (full precision, '.' decimal
separator); rows end in '\n' on every platform so re-runs are byte-identical.
"""

import logging
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

from wavepinn.errors import FileError

logger = logging.getLogger(__name__)


def clean_value(value: Any) -> Any:
    """Convert numpy scalars to Python types; non-finite floats become 'nan'/'inf'/'-inf'."""
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def clean_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Copy of `frame` with numeric columns cast to float64/int64."""
    cleaned = frame.copy()
    for column in cleaned.columns:
        if pd.api.types.is_integer_dtype(cleaned[column]):
            cleaned[column] = cleaned[column].astype("int64")
        elif pd.api.types.is_float_dtype(cleaned[column]):
            cleaned[column] = cleaned[column].astype("float64")
    return cleaned


def format_float(value: float) -> str:
    """Full-precision text of one number, as written to reports."""
    value = clean_value(value)
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        clean_frame(frame).to_csv(path, index=False, lineterminator="\n", na_rep="nan", encoding="utf-8")
    except OSError as e:
        raise FileError(path, f"cannot write CSV ({e})")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_text(path, lines: Iterable[str]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
    except OSError as e:
        raise FileError(path, f"cannot write file ({e})")
    return path
