"""CSV ingestion for real datasets.

Input files are UTF-8, comma-delimited, with a mandatory header row and
numeric cells in decimal or scientific notation.  Rows with missing
entries (empty cells or NA/NaN/null markers) are rejected with a count;
any other unparseable cell is a hard error naming its row and column.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import DegeneracyWarning, IngestError
from ..numkernel import as_data_matrix

__all__ = ["TabularDataset", "load_csv"]

_MISSING = {"", "na", "nan", "null"}


@dataclass
class TabularDataset:
    """Numeric table split into predictors and a response column."""

    names: list[str]
    x: np.ndarray
    y: np.ndarray
    response: str


def load_csv(
    path,
    response_column: str,
    variance_filter_top_k: int | None = None,
    standardize: bool = False,
) -> TabularDataset:
    """Read a numeric CSV into predictors X and response y.

    ``variance_filter_top_k`` keeps only the k predictor columns with the
    highest sample variance (ties go to the earlier column) before any
    standardization.  ``standardize`` rescales the retained predictors to
    zero mean and unit sample standard deviation.  Row numbers in error
    messages are physical file lines (the header is row 1).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if response_column not in header:
            raise IngestError(
                f"{path}: response column {response_column!r} not in header"
            )
        rows = []
        dropped = 0
        for line_no, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise IngestError(
                    f"{path}: row {line_no} has {len(raw)} cells, expected {len(header)}"
                )
            if any(cell.strip().lower() in _MISSING for cell in raw):
                dropped += 1
                continue
            parsed = []
            for cell, name in zip(raw, header):
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestError(
                        f"{path}: unparseable cell at row {line_no}, column {name!r}: "
                        f"{cell.strip()!r}"
                    ) from None
                if not math.isfinite(value):
                    raise IngestError(
                        f"{path}: non-finite value at row {line_no}, column {name!r}"
                    )
                parsed.append(value)
            rows.append(parsed)

    if dropped:
        warnings.warn(
            f"{path}: rejected {dropped} row(s) with missing entries",
            DegeneracyWarning,
            stacklevel=2,
        )
    if len(rows) < 3:
        raise IngestError(f"{path}: need at least 3 complete rows, got {len(rows)}")

    table = np.asarray(rows, dtype=np.float64)
    resp_idx = header.index(response_column)
    y = table[:, resp_idx]
    pred_idx = [i for i in range(len(header)) if i != resp_idx]
    names = [header[i] for i in pred_idx]
    x = table[:, pred_idx]

    if variance_filter_top_k is not None:
        k = int(variance_filter_top_k)
        if k < 1:
            raise IngestError("variance filter must keep at least one column")
        if k < x.shape[1]:
            variances = x.var(axis=0, ddof=1)
            order = np.lexsort((np.arange(x.shape[1]), -variances))[:k]
            keep = np.sort(order)  # preserve original column order
            x = x[:, keep]
            names = [names[i] for i in keep]

    if standardize:
        sd = x.std(axis=0, ddof=1)
        dead = sd == 0
        if np.any(dead):
            warnings.warn(
                f"{int(dead.sum())} zero-variance column(s) left centered only",
                DegeneracyWarning,
                stacklevel=2,
            )
            sd = np.where(dead, 1.0, sd)
        x = (x - x.mean(axis=0)) / sd

    return TabularDataset(
        names=names, x=as_data_matrix(x, "predictors"), y=y, response=response_column
    )
