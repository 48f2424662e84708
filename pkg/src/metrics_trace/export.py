"""
CSV and JSON interchange for traces and summaries.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Literal, Optional

import pandas as pd

from src.metrics_trace.summary import RunSummary
from src.metrics_trace.trace import CSV_COLUMNS, Trace, TraceError

logger = logging.getLogger(__name__)

TraceFormat = Literal["csv", "json"]


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc


def export_trace(trace: Trace, summary: Optional[RunSummary], path: Path | str, fmt: TraceFormat = "csv") -> Path:
    """
    Write ``trace`` to ``path``.

    CSV holds exactly the trace columns with a header row; JSON holds
    ``{"summary": ..., "events": [...]}``.
    """
    path = Path(path)
    if fmt == "csv":
        _write_text(path, trace.to_frame().to_csv(index=False, lineterminator="\n"))
    elif fmt == "json":
        document = {
            "summary": summary.model_dump(mode="json") if summary is not None else None,
            "events": [event.as_row() for event in trace],
        }
        _write_text(path, json.dumps(document, indent=2) + "\n")
    else:
        raise ValueError(f"unknown trace format '{fmt}'")
    logger.info(f"trace with {len(trace)} events written to {path}")
    return path


def export_summary(summary: RunSummary, path: Path | str) -> Path:
    path = Path(path)
    _write_text(path, json.dumps(summary.model_dump(mode="json"), indent=2) + "\n")
    return path


def import_trace(path: Path | str) -> tuple[Trace, Optional[RunSummary]]:
    """Read a trace written by ``export_trace``; the summary is ``None`` for CSV."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trace file not found: {path}")

    if path.suffix == ".csv":
        frame = pd.read_csv(
            path,
            dtype={"detail": str, "kind": str},
            keep_default_na=False,
            float_precision="round_trip",
        )
        return Trace.from_frame(frame), None

    if path.suffix == ".json":
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise TraceError(f"{path} is not valid JSON: {exc}") from exc
        frame = pd.DataFrame(document.get("events", []), columns=CSV_COLUMNS)
        summary = document.get("summary")
        return Trace.from_frame(frame), RunSummary(**summary) if summary else None

    raise ValueError(f"unsupported trace file extension '{path.suffix}' ({path})")
