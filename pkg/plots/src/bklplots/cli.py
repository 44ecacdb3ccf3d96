"""Figure CLI: ``bkl-plot <kind> --in FILE --out FILE.png``.

Consumes the solver CLI's artifacts unchanged; the run manifest (for
decision-time markers and the heatmap centre) is auto-discovered next to
the input file and can be overridden with ``--manifest``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bkl-plot",
                                     description="Render figures from solver artifacts.")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="source", required=True, help="input CSV artifact")
    parser.add_argument("--out", dest="output", required=True, help="output image path")
    parser.add_argument("--manifest", help="run manifest (default: next to the input)")
    parser.add_argument("--center", type=float,
                        help="heatmap centre value (default: manifest initial utility)")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    style = {"dpi": args.dpi}
    if args.center is not None:
        style["center"] = args.center
    try:
        spec = FigureSpec(kind=args.kind, source=Path(args.source),
                          output=Path(args.output),
                          manifest=Path(args.manifest) if args.manifest else None,
                          style=style)
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
