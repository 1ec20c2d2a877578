"""Command line: trionw-figures <kind> --in <files> --out <image>."""

import argparse
import sys

from .data import SchemaMismatch
from .render import KINDS, FigureSpec, render


def build_parser():
    p = argparse.ArgumentParser(prog="trionw-figures", description=__doc__)
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--in", dest="inputs", required=True,
                   help="comma-separated input file(s)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--xlim", help="x-axis range lo,hi")
    p.add_argument("--ylim", help="y-axis range lo,hi")
    p.add_argument("--cmap", default="inferno")
    p.add_argument("--title")
    return p


def _pair(text):
    lo, hi = (float(t) for t in text.split(","))
    return lo, hi


def run(argv=None):
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=[s for s in args.inputs.split(",") if s],
        out_path=args.out,
        xlim=_pair(args.xlim) if args.xlim else None,
        ylim=_pair(args.ylim) if args.ylim else None,
        cmap=args.cmap,
        title=args.title,
    )
    try:
        render(spec)
    except SchemaMismatch as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
