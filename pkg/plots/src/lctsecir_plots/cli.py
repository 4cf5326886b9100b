"""Command ``plot <kind> <inputs...> -o out.png``.

Exit codes: 0 success, 1 usage error (unknown kind, bad flags), 2 input or
schema error.
"""
from __future__ import annotations

import argparse
import sys

from . import figures, readers


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="plot",
        description="Render figures from lctsecir CSV/JSON artifacts.")
    parser.add_argument("kind", choices=sorted(figures.KINDS),
                        help="figure family")
    parser.add_argument("inputs", nargs="+", help="input CSV/JSON file(s)")
    parser.add_argument("-o", "--output", required=True,
                        help="output image path (.png, .pdf, .svg)")
    parser.add_argument("--marker-day", type=float, default=2.0,
                        help="vertical marker position for changepoint/"
                             "reldiff figures (days)")
    parser.add_argument("--no-marker", action="store_true",
                        help="suppress the change-point marker")
    parser.add_argument("--logy", action="store_true",
                        help="log-scale y axis where applicable")
    parser.add_argument("--compartment", default="E",
                        help="compartment letter for the subcompartments "
                             "figure (default E)")
    parser.add_argument("--three-d", action="store_true",
                        help="3D surface instead of a heatmap for the "
                             "subcompartments figure")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    options = {}
    if args.kind in ("changepoint", "reldiff"):
        options["marker_day"] = None if args.no_marker else args.marker_day
    if args.kind in ("changepoint", "compartments"):
        options["logy"] = args.logy
    if args.kind == "subcompartments":
        options["compartment"] = args.compartment
        options["three_d"] = args.three_d
    try:
        figures.render(args.kind, args.inputs, args.output, **options)
    except (readers.InputError, readers.SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
