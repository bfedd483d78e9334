"""Turn benchmark result CSVs into per-length plots and summary tables.

This package is a standalone consumer of the delimited results format
(header ``task,variant,attention,run,split,length,metric,value``); it
does not depend on the code that produced the files.
"""

from .csvdata import METRICS, ResultRow, SchemaError, read_rows
from .plots import PlotSpec, RenderSummary, render_per_length
from .tables import render_aggregate_table

__all__ = [
    "METRICS",
    "PlotSpec",
    "RenderSummary",
    "ResultRow",
    "SchemaError",
    "read_rows",
    "render_aggregate_table",
    "render_per_length",
]
