"""Chart rendering for feegame sweep CSVs."""

from .render import KIND_COLUMNS, FigureJob, RenderResult, SchemaError, load_table, render

__version__ = "0.1.0"

__all__ = [
    "KIND_COLUMNS",
    "FigureJob",
    "RenderResult",
    "SchemaError",
    "load_table",
    "render",
]
