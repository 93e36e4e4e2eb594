"""Command line: render one figure specification against trace CSVs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import load_trace, render
from .spec import SpecError, load_spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="trace-figures")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("render", help="render a figure spec from trace CSVs")
    p.add_argument("--spec", required=True, help="figure specification YAML")
    p.add_argument("--trace", action="append", required=True,
                   help="trace CSV (repeatable; panels reference them by index)")
    p.add_argument("--out", default="figures_out", help="output directory")
    args = parser.parse_args(argv)

    try:
        spec = load_spec(args.spec)
        traces = [load_trace(t) for t in args.trace]
        result = render(spec, traces, Path(args.out))
    except (SpecError, OSError) as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.figure_path} ({result.panel_count} panels)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
