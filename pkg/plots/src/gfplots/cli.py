"""Standalone plot command: one figure per invocation."""

from __future__ import annotations

import argparse
import sys

from gfplots import KINDS, PlotSpec, SchemaMismatch, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot", description="Render a metric CSV into a figure")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--input", required=True, help="metric CSV path")
    parser.add_argument("--output", required=True, help="image path (png)")
    parser.add_argument("--seed", type=int, default=0, help="projection seed (scatter2d)")
    parser.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        input_path=args.input,
        kind=args.kind,
        output_path=args.output,
        title=args.title,
        rng_seed=args.seed,
    )
    try:
        sidecar = render(spec)
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.output} and {sidecar}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
