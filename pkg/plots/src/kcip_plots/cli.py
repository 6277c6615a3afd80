"""plots: render kcip-lab CSV reports into figures.

    plots render --kind triple-scaling --in report.csv --out figure.png

PNG and SVG outputs are supported; identical inputs produce byte-identical
images.
"""

from __future__ import annotations

import argparse
import sys

from .csvio import SchemaError
from .figures import KINDS, FigureSpec, PlotError, render


def make_parser():
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("render")
    rp.add_argument("--kind", required=True, choices=KINDS)
    rp.add_argument("--in", dest="inputs", action="append", required=True,
                    help="input CSV (repeatable)")
    rp.add_argument("--out", required=True, help="output image (.png or .svg)")
    rp.add_argument("--fit-min", type=float, help="lower x bound for slope fits")
    rp.add_argument("--fit-max", type=float, help="upper x bound for slope fits")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=args.inputs,
        output=args.out,
        fit_min=args.fit_min,
        fit_max=args.fit_max,
    )
    try:
        summary = render(spec)
    except (PlotError, SchemaError) as exc:
        print(f"plots: {exc}", file=sys.stderr)
        return 2
    if "slope" in summary:
        print(f"{summary['output']} slope={summary['slope']:.6f}")
    else:
        print(summary["output"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
