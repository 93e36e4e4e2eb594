"""Figure specifications: layout, panels, and series definitions.

A series is either a plain CSV column or the difference of two columns
(used to reconstruct reference curves from value and error columns).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml


class SpecError(ValueError):
    """Figure specification failed validation."""


@dataclass(frozen=True)
class Series:
    column: str = ""
    diff: tuple = ()
    label: str = ""

    def required_columns(self):
        return self.diff if self.diff else (self.column,)

    def display_label(self):
        if self.label:
            return self.label
        if self.diff:
            return f"{self.diff[0]} - {self.diff[1]}"
        return self.column


@dataclass(frozen=True)
class Panel:
    title: str
    series: tuple
    trace: int = 0
    x: str = ""
    ylabel: str = ""
    xlabel: str = ""
    yscale: str = "linear"


@dataclass(frozen=True)
class FigureSpec:
    title: str
    output: str
    rows: int
    cols: int
    x_column: str
    panels: tuple


def _parse_series(raw, path):
    if isinstance(raw, str):
        return Series(column=raw)
    if isinstance(raw, dict):
        if "diff" in raw:
            diff = raw["diff"]
            if not (isinstance(diff, list) and len(diff) == 2):
                raise SpecError(f"{path}: diff needs exactly two column names")
            return Series(diff=tuple(diff), label=raw.get("label", ""))
        if "column" in raw:
            return Series(column=raw["column"], label=raw.get("label", ""))
    raise SpecError(f"{path}: series must be a column name or a diff entry")


def load_spec(path) -> FigureSpec:
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict) or "panels" not in raw:
        raise SpecError(f"{path}: expected a mapping with a 'panels' list")
    layout = raw.get("layout", {})
    panels = []
    for i, p in enumerate(raw["panels"]):
        where = f"{path}:panels[{i}]"
        if not isinstance(p, dict):
            raise SpecError(f"{where}: expected a mapping")
        series_raw = p.get("series", p.get("columns"))
        if not series_raw:
            raise SpecError(f"{where}: needs a 'series' (or 'columns') list")
        series = tuple(
            _parse_series(s, f"{where}.series[{j}]") for j, s in enumerate(series_raw)
        )
        panels.append(Panel(
            title=str(p.get("title", "")),
            series=series,
            trace=int(p.get("trace", 0)),
            x=str(p.get("x", "")),
            ylabel=str(p.get("ylabel", "")),
            xlabel=str(p.get("xlabel", "")),
            yscale=str(p.get("yscale", "linear")),
        ))
    rows = int(layout.get("rows", 1))
    cols = int(layout.get("cols", len(panels)))
    if rows * cols < len(panels):
        raise SpecError(f"{path}: layout {rows}x{cols} too small for {len(panels)} panels")
    return FigureSpec(
        title=str(raw.get("title", "")),
        output=str(raw.get("output", Path(path).stem + ".png")),
        rows=rows,
        cols=cols,
        x_column=str(raw.get("x_column", "t_s")),
        panels=tuple(panels),
    )
