"""Command-line entry point: ``reportgen render`` and ``reportgen table``."""

from __future__ import annotations

import argparse
import sys

from .csvdata import METRICS, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reportgen",
        description="Render plots and tables from benchmark result CSVs.")
    sub = parser.add_subparsers(dest="command", required=True)

    render = sub.add_parser(
        "render", help="draw per-input-length metric curves to an image file")
    render.add_argument("--csv", required=True, help="results CSV to read")
    render.add_argument("--metric", default="full_seq", choices=METRICS)
    render.add_argument("--out", required=True, help="image file to write")
    render.add_argument("--tasks", default=None,
                        help="comma-separated task filter (default: all)")
    render.add_argument("--splits", default=None,
                        help="comma-separated split filter (default: all)")
    render.add_argument("--format", default=None, dest="image_format",
                        help="image format (default: from --out extension, else svg)")

    table = sub.add_parser(
        "table", help="print the aggregate accuracy table")
    table.add_argument("--csv", required=True, help="results CSV to read")
    table.add_argument("--out", default=None,
                       help="also write the table text to this file")
    return parser


def _split_list(raw: str | None) -> tuple[str, ...] | None:
    if raw is None:
        return None
    items = tuple(part.strip() for part in raw.split(",") if part.strip())
    if not items:
        raise SchemaError(f"empty list argument {raw!r}")
    return items


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            from .plots import PlotSpec, render_per_length

            spec = PlotSpec(out_path=args.out, metric=args.metric,
                            tasks=_split_list(args.tasks),
                            splits=_split_list(args.splits),
                            image_format=args.image_format)
            summary = render_per_length(args.csv, spec)
            print(f"wrote {summary.out_path} "
                  f"({len(summary.tasks)} panels: {', '.join(summary.tasks)})")
        else:
            from .tables import render_aggregate_table

            text = render_aggregate_table(args.csv, args.out)
            sys.stdout.write(text)
            if args.out:
                print(f"wrote {args.out}")
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
