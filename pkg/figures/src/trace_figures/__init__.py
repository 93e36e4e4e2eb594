"""Offline rendering of multi-panel figures from simulation trace CSVs.

This package knows nothing about the simulator internals: its only input
contract is the trace CSV (header row of column names, one numeric row
per sample) and a YAML figure specification.
"""

from .spec import FigureSpec, SpecError, load_spec
from .render import RenderResult, load_trace, render

__all__ = [
    "FigureSpec",
    "SpecError",
    "load_spec",
    "RenderResult",
    "load_trace",
    "render",
]
