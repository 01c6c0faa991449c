"""Command-line entry point: ``render_figures <figure-spec.json> --out DIR``."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpecError, render_spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render giantatom CSV outputs into PNG and SVG figures.")
    parser.add_argument("spec", help="figure specification JSON file")
    parser.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)
    try:
        written = render_spec(args.spec, args.out)
    except FigureSpecError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
