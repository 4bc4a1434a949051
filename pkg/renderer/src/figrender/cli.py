"""Command line front end: render --kind <k> --inputs <csv...> --out <file>."""

import argparse
import sys

from .figures import KINDS, DataError, render
from .schema import SchemaError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render",
        description="Draw one figure from training-study CSV artifacts.")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="which figure to draw")
    parser.add_argument("--inputs", required=True, nargs="+", metavar="CSV",
                        help="input CSV files; several files of one layout "
                             "are summarized with a min-max band")
    parser.add_argument("--out", required=True,
                        help="output image path (.png, .svg, or .pdf)")
    parser.add_argument("--logy", action="store_true",
                        help="log-scale the y axis")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        render(args.kind, args.inputs, args.out, logy=args.logy)
    except (SchemaError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
