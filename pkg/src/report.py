"""
SleepFS Report Module
Results table, results JSON, importance bar chart and the dataset CSV writer
"""

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import pandas as pd

from .data import Dataset
from .errors import ChartError, DataIoError, EmptyReport, ParamError
from .evaluation import CvSummary, format_cv, format_fixed

CHART_WIDTH = 800
ROW_HEIGHT = 40
LABEL_WIDTH = 200
VALUE_WIDTH = 80
BAR_AREA = CHART_WIDTH - LABEL_WIDTH - VALUE_WIDTH
BAR_COLOUR = "#4C72B0"


class TableFormat(Enum):
    MARKDOWN = "markdown"
    CSV = "csv"


@dataclass(frozen=True)
class ExperimentResult:
    """One (selector ensemble, regressor) cell of the results table"""
    selector_label: str
    regressor_label: str
    cv: CvSummary
    test_rmse: float
    r_squared: float
    selected_feature_names: Tuple[str, ...]
    importances: Optional[Dict[str, float]] = None

    def __post_init__(self):
        if not self.selector_label or not self.regressor_label:
            raise ParamError("result labels must be non-empty")
        if not self.test_rmse >= 0:
            raise ParamError(f"test RMSE must be >= 0, got {self.test_rmse}")


# ========== Table ==========

TABLE_HEADER = ("Feature Selection", "Regressor", "CV RMSE", "Test RMSE", "R-squared")


def _table_rows(results: Sequence[ExperimentResult]) -> List[Tuple[str, ...]]:
    groups: Dict[str, List[ExperimentResult]] = {}
    for result in results:
        groups.setdefault(result.selector_label, []).append(result)
    rows = []
    for label, members in groups.items():
        for result in members:
            rows.append((label, result.regressor_label, format_cv(result.cv),
                         format_fixed(result.test_rmse), format_fixed(result.r_squared)))
    return rows


def render_table(results: Sequence[ExperimentResult], fmt: TableFormat = TableFormat.MARKDOWN) -> str:
    """
    Render results one row per cell, grouped by selector ensemble in first-seen order

    Markdown prints the ensemble label on the first row of its group only.

    Raises:
        EmptyReport: If results is empty
    """
    if not results:
        raise EmptyReport("no results to render")
    rows = _table_rows(results)
    if fmt is TableFormat.CSV:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TABLE_HEADER)
        writer.writerows(rows)
        return buffer.getvalue()

    lines = ["| " + " | ".join(TABLE_HEADER) + " |",
             "|" + "|".join(["---"] * len(TABLE_HEADER)) + "|"]
    previous = None
    for row in rows:
        label = row[0] if row[0] != previous else ""
        previous = row[0]
        cells = [cell.replace("|", "\\|") for cell in (label, *row[1:])]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


# ========== Chart ==========

class SvgCanvas:
    """Minimal static SVG 1.1 writer"""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts: List[str] = []

    def rect(self, x: float, y: float, width: float, height: float, fill: str) -> None:
        self.parts.append(
            f'<rect x="{x:.3f}" y="{y:.3f}" width="{width:.3f}" height="{height:.3f}" fill="{fill}"/>'
        )

    def text(self, x: float, y: float, content: str, anchor: str = "start") -> None:
        self.parts.append(
            f'<text x="{x:.3f}" y="{y:.3f}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="14">{escape(content)}</text>'
        )

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
            f'<svg version="1.1" xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def bar_lengths(importances: Mapping[str, float]) -> List[Tuple[str, float, float]]:
    """(name, value, bar length in px) sorted by value descending, ties in input order"""
    items = list(importances.items())
    ranked = sorted(range(len(items)), key=lambda i: (-items[i][1], i))
    largest = max(value for _, value in items)
    scale = BAR_AREA / largest if largest > 0 else 0.0
    return [(items[i][0], items[i][1], items[i][1] * scale) for i in ranked]


def render_importance_chart(importances: Mapping[str, float], path: Optional[str] = None) -> str:
    """
    Horizontal importance bar chart, longest bar first

    Canvas is 800 x 40*d; the largest importance spans the whole bar area and
    every other bar is proportional to it.

    Args:
        importances: Feature name -> importance (finite, >= 0)
        path: Where to write the SVG; skipped when None

    Returns:
        str: The SVG document

    Raises:
        ChartError: If importances is empty, negative or not finite
    """
    if not importances:
        raise ChartError("no importances to draw")
    for name, value in importances.items():
        if not math.isfinite(value) or value < 0:
            raise ChartError(f"importance of {name!r} must be finite and >= 0, got {value}")

    canvas = SvgCanvas(CHART_WIDTH, ROW_HEIGHT * len(importances))
    for row, (name, value, length) in enumerate(bar_lengths(importances)):
        top = row * ROW_HEIGHT
        canvas.text(LABEL_WIDTH - 10, top + 25, name, anchor="end")
        canvas.rect(LABEL_WIDTH, top + 8, length, ROW_HEIGHT - 16, BAR_COLOUR)
        canvas.text(LABEL_WIDTH + length + 8, top + 25, format_fixed(value))
    document = canvas.render()

    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(document)
        except OSError as e:
            raise DataIoError(f"failed to write chart {path}: {e}") from e
    return document


# ========== Results JSON ==========

def result_to_dict(result: ExperimentResult) -> Dict[str, Any]:
    return {
        "selector": result.selector_label,
        "regressor": result.regressor_label,
        "cv_rmse_mean": result.cv.mean,
        "cv_rmse_std": result.cv.std,
        "fold_rmse": list(result.cv.fold_rmse),
        "test_rmse": result.test_rmse,
        "r_squared": result.r_squared,
        "selected_features": list(result.selected_feature_names),
        "importances": dict(result.importances) if result.importances is not None else None,
    }


def results_document(results: Sequence[ExperimentResult], metadata: Mapping[str, Any]) -> Dict[str, Any]:
    return {
        "metadata": {
            "seed": int(metadata["seed"]),
            "config_digest": str(metadata["config_digest"]),
            "timestamp": str(metadata["timestamp"]),
        },
        "results": [result_to_dict(r) for r in results],
    }


def write_results_json(results: Sequence[ExperimentResult], metadata: Mapping[str, Any], path: str) -> None:
    """
    Write results with sorted keys and shortest round-trip floats

    Raises:
        DataIoError: If the file cannot be written
    """
    document = results_document(results, metadata)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(document, f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
    except OSError as e:
        raise DataIoError(f"failed to write results {path}: {e}") from e


def read_results_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise DataIoError(f"failed to read results {path}: {e}") from e


# ========== Dataset CSV ==========

def write_dataset_csv(ds: Dataset, path: str) -> None:
    """
    Write a dataset in the load_csv input format, target last

    Raises:
        DataIoError: If the file cannot be written
    """
    frame = pd.DataFrame(ds.features, columns=list(ds.feature_names))
    frame[ds.target_name] = ds.target
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise DataIoError(f"failed to write dataset {path}: {e}") from e
