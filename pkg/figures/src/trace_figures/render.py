"""Panel rendering from trace CSVs.

All validation happens before any file is created, so a failing render
never leaves partial output behind, and re-rendering identical inputs is
byte-for-byte idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .spec import FigureSpec, SpecError


@dataclass(frozen=True)
class Trace:
    path: str
    columns: tuple
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


@dataclass(frozen=True)
class RenderResult:
    figure_path: Path
    panel_count: int


def load_trace(path) -> Trace:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
    if not header:
        raise SpecError(f"{path}: empty trace file")
    columns = tuple(header.split(","))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        raise SpecError(f"{path}: trace has a header but no data rows")
    if data.shape[1] != len(columns):
        raise SpecError(f"{path}: row width does not match the header")
    return Trace(path=str(path), columns=columns, data=data)


def _validate(spec: FigureSpec, traces):
    for i, panel in enumerate(spec.panels):
        if panel.trace >= len(traces):
            raise SpecError(
                f"panel {i} ({panel.title!r}) references trace {panel.trace} "
                f"but only {len(traces)} trace(s) were given"
            )
        trace = traces[panel.trace]
        x_name = panel.x or spec.x_column
        needed = [x_name]
        for s in panel.series:
            needed.extend(s.required_columns())
        for name in needed:
            if name not in trace.columns:
                raise SpecError(
                    f"panel {i} ({panel.title!r}): column {name!r} not in "
                    f"{trace.path}; available: {', '.join(trace.columns)}"
                )


def render(spec: FigureSpec, traces, out_dir) -> RenderResult:
    """Render one figure; returns the output path and panel count."""
    if not traces:
        raise SpecError("at least one trace is required")
    _validate(spec, traces)

    fig, axes = plt.subplots(
        spec.rows, spec.cols,
        figsize=(4.2 * spec.cols, 3.0 * spec.rows),
        squeeze=False,
    )
    for i, panel in enumerate(spec.panels):
        ax = axes[i // spec.cols][i % spec.cols]
        trace = traces[panel.trace]
        x_name = panel.x or spec.x_column
        x = trace.column(x_name)
        for s in panel.series:
            if s.diff:
                y = trace.column(s.diff[0]) - trace.column(s.diff[1])
            else:
                y = trace.column(s.column)
            ax.plot(x, y, linewidth=1.0, label=s.display_label())
        ax.set_title(panel.title, fontsize=9)
        ax.set_xlabel(panel.xlabel or x_name, fontsize=8)
        if panel.ylabel:
            ax.set_ylabel(panel.ylabel, fontsize=8)
        if panel.yscale == "log":
            ax.set_yscale("log")
        if len(panel.series) > 1:
            ax.legend(fontsize=7)
        ax.tick_params(labelsize=7)
        ax.grid(True, alpha=0.3)
    for j in range(len(spec.panels), spec.rows * spec.cols):
        axes[j // spec.cols][j % spec.cols].axis("off")
    if spec.title:
        fig.suptitle(spec.title, fontsize=11)
    fig.tight_layout()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / spec.output
    fig.savefig(out_path, dpi=130, metadata={"Software": "trace-figures"})
    plt.close(fig)
    return RenderResult(figure_path=out_path, panel_count=len(spec.panels))
