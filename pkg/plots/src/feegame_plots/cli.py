"""render-figures: batch-render every sweep CSV found in a directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .render import KIND_COLUMNS, FigureJob, SchemaError, render


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render-figures",
        description="Render feegame sweep CSVs (<kind>.csv) to PNG and SVG charts.",
    )
    parser.add_argument("--in", dest="in_dir", required=True, help="directory with sweep CSVs")
    parser.add_argument("--out", dest="out_dir", required=True, help="directory for images")
    args = parser.parse_args(argv)

    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        print(f"error: {in_dir} is not a directory", file=sys.stderr)
        return 1

    found = [(kind, in_dir / f"{kind}.csv") for kind in KIND_COLUMNS if (in_dir / f"{kind}.csv").exists()]
    if not found:
        print(f"error: no sweep CSVs in {in_dir} (expected <kind>.csv)", file=sys.stderr)
        return 1

    failures = 0
    for kind, csv_path in found:
        job = FigureJob(csv_path=csv_path, figure_kind=kind, output_path=out_dir / kind)
        try:
            result = render(job)
        except SchemaError as exc:
            print(f"error: {exc}", file=sys.stderr)
            failures += 1
            continue
        print(f"rendered {kind}: {result.png_path} {result.svg_path}")
    return 1 if failures else 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
