"""
Report Service

Builds the report tables and writes them with deterministic file names:
rel_curve.csv, loss_curve.csv, error_grid.csv, summary.txt.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from wavepinn.services.geometry_service import EvaluationSet
from wavepinn.services.trainer_service import REL_COLUMNS, TrainHistory
from wavepinn.utils.csv_serialization import format_float, write_csv, write_text

logger = logging.getLogger(__name__)

REL_CURVE = "rel_curve.csv"
LOSS_CURVE = "loss_curve.csv"
ERROR_GRID = "error_grid.csv"
SUMMARY = "summary.txt"


def error_grid_frame(test_set: EvaluationSet, pred: np.ndarray) -> pd.DataFrame:
    """Point-wise table x1, x2[, x3], t, exact, pred, abs_err."""
    dim = test_set.x.shape[1]
    data = {f"x{i + 1}": test_set.x[:, i] for i in range(dim)}
    data["t"] = test_set.t
    exact = test_set.exact if test_set.exact is not None else np.full(len(test_set), np.nan)
    data["exact"] = exact
    data["pred"] = np.asarray(pred, dtype=float)
    data["abs_err"] = np.abs(data["pred"] - exact)
    return pd.DataFrame(data)


def joined_rel_frame(histories: Mapping[str, TrainHistory]) -> pd.DataFrame:
    """epoch plus one REL column per run label, outer-joined on epoch."""
    frames = []
    for label, history in histories.items():
        frame = history.rel_frame().set_index("epoch").rename(columns={"rel": label})
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["epoch"])
    joined = pd.concat(frames, axis=1, join="outer").sort_index()
    joined.index.name = "epoch"
    return joined.reset_index()


def summary_lines(title: str, final_rels: Mapping[str, Optional[float]], extra: Sequence[str] = ()) -> List[str]:
    lines = [title]
    lines.extend(extra)
    width = max([len(label) for label in final_rels] + [5])
    lines.append(f"{'model'.ljust(width)}  final_rel")
    for label, rel in final_rels.items():
        lines.append(f"{label.ljust(width)}  {format_float(rel) if rel is not None else 'n/a'}")
    return lines


def write_reports(
    out_dir,
    history: Optional[TrainHistory] = None,
    error_grid: Optional[pd.DataFrame] = None,
    summary: Optional[Sequence[str]] = None,
    rel_curve: Optional[pd.DataFrame] = None,
) -> List[Path]:
    """Write whichever reports are given; an empty REL history still gets its header."""
    out_dir = Path(out_dir)
    written = []
    if rel_curve is None and history is not None:
        rel_curve = history.rel_frame()
    if rel_curve is not None:
        if len(rel_curve.columns) == 0:
            rel_curve = pd.DataFrame(columns=REL_COLUMNS)
        written.append(write_csv(rel_curve, out_dir / REL_CURVE))
    if history is not None:
        written.append(write_csv(history.loss_frame(), out_dir / LOSS_CURVE))
    if error_grid is not None:
        written.append(write_csv(error_grid, out_dir / ERROR_GRID))
    if summary is not None:
        written.append(write_text(out_dir / SUMMARY, summary))
    logger.info(f"Reports written to {out_dir}: {', '.join(p.name for p in written)}")
    return written
