from src.metrics_trace.export import export_summary, export_trace, import_trace
from src.metrics_trace.summary import RunSummary, summarize
from src.metrics_trace.trace import (
    CSV_COLUMNS,
    PROLOGUE,
    Trace,
    TraceError,
    TraceEvent,
    TraceKind,
    audit_trace,
    compute_detail,
    layers_detail,
    parse_compute_detail,
)

__all__ = [
    "CSV_COLUMNS",
    "PROLOGUE",
    "RunSummary",
    "Trace",
    "TraceError",
    "TraceEvent",
    "TraceKind",
    "audit_trace",
    "compute_detail",
    "export_summary",
    "export_trace",
    "import_trace",
    "layers_detail",
    "parse_compute_detail",
    "summarize",
]
