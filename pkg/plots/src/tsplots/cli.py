"""Render tscore output files as PNG figures.

Subcommands: heatmap (score grid CSV), auc-box (results JSON-lines),
sweep (latent sweep CSV). Exit codes: 0 success, 1 usage error, 2 bad
input (schema mismatch names the missing column).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import SchemaError
from .render import render_auc_box, render_heatmap, render_sweep


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="tsplots", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("heatmap", help="score-grid panels from a grid CSV", formatter_class=fmt)
    p.add_argument("--in", dest="in_path", required=True, help="grid CSV input")
    p.add_argument("--out", required=True, help="PNG output")
    p.add_argument("--title", default=None, help="figure title")
    p.add_argument("--raw", action="store_true", help="plot log scores without exp-normalizing")

    p = sub.add_parser("auc-box", help="AUC box plots from results JSON-lines", formatter_class=fmt)
    p.add_argument("--in", dest="in_path", required=True, help="results JSONL input")
    p.add_argument("--out", required=True, help="PNG output")
    p.add_argument("--title", default=None, help="figure title")

    p = sub.add_parser("sweep", help="AUC vs latent dimension from a sweep CSV", formatter_class=fmt)
    p.add_argument("--in", dest="in_path", required=True, help="sweep CSV input")
    p.add_argument("--out", required=True, help="PNG output")
    p.add_argument("--title", default=None, help="figure title")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    if not Path(args.in_path).is_file():
        print(f"tsplots: error: no such file: {args.in_path}", file=sys.stderr)
        return 1
    try:
        if args.command == "heatmap":
            render_heatmap(args.in_path, args.out, title=args.title, raw=args.raw)
        elif args.command == "auc-box":
            render_auc_box(args.in_path, args.out, title=args.title)
        else:
            render_sweep(args.in_path, args.out, title=args.title)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"tsplots: error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
