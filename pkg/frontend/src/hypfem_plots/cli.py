"""Command line entry point: ``plot <kind> <csv> [--zoom ...] -o out.png``."""

from __future__ import annotations

import argparse
import sys

from .csvdata import PlotDataError
from .render import PlotSpec, plot_convergence, plot_field, plot_profile


def _parse_zoom(text):
    toks = [t for t in text.split(",") if t.strip()]
    if len(toks) != 4:
        raise PlotDataError(f"--zoom expects x0,x1,y0,y1, got {text!r}")
    try:
        return tuple(float(t) for t in toks)
    except ValueError:
        raise PlotDataError(f"--zoom expects numbers, got {text!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render hypfem CSV outputs as images.",
    )
    parser.add_argument("kind", choices=("field2d", "profile1d", "convergence"),
                        help="figure kind")
    parser.add_argument("csv", help="input CSV file")
    parser.add_argument("--zoom", default=None, metavar="X0,X1,Y0,Y1",
                        help="axis window")
    parser.add_argument("-o", "--output", default="out.png",
                        help="output image path (default out.png)")
    args = parser.parse_args(argv)

    try:
        zoom = _parse_zoom(args.zoom) if args.zoom else None
        spec = PlotSpec(kind=args.kind, csv_path=args.csv,
                        output_path=args.output, zoom=zoom)
        if args.kind == "field2d":
            plot_field(spec)
        elif args.kind == "profile1d":
            plot_profile(spec)
        else:
            _, table = plot_convergence(spec)
            print(table)
    except PlotDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
