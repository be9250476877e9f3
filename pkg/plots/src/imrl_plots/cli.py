"""plot CLI: `plot curves --in <dir>... --out fig.png` and
`plot bars --report report.json --out fig.png`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bars import render_bars
from .curves import SchemaError, render_curves


def _arm_from_dir(d: Path):
    csvs = sorted(d.rglob("eval.csv"))
    if not csvs:
        raise SchemaError(f"{d}: no eval.csv found")
    return d.name, csvs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot",
                                     description="figures from run artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p_curves = sub.add_parser("curves", help="learning-curve overlay with std bands")
    p_curves.add_argument("--in", dest="dirs", nargs="+", required=True,
                          help="one directory per arm; seed eval.csv files found recursively")
    p_curves.add_argument("--out", required=True)
    p_curves.add_argument("--smooth", type=int, default=1,
                          help="moving-average window (stated in the legend)")

    p_bars = sub.add_parser("bars", help="steps-to-match bars from a compare report")
    p_bars.add_argument("--report", required=True)
    p_bars.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "curves":
            arms = [_arm_from_dir(Path(d)) for d in args.dirs]
            render_curves(arms, args.out, smooth_window=args.smooth)
        else:
            render_bars(args.report, args.out)
    except (SchemaError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
