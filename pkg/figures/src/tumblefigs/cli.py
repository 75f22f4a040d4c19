"""Entry points: fig_landscape, fig_convergence, fig_eigmap, fig_illcond.

Each takes --in (CSV from the reconstruction toolkit) and --out (image
path; format from the extension). fig_illcond expects the summary CSV and
finds the per-position history files next to it (<stem>_pos<i><suffix>).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import FigureDataError, load_table
from .render import (
    render_convergence,
    render_eigmap,
    render_illcond,
    render_landscape,
)


def _parse(description, argv):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--in", dest="input", required=True, help="input CSV")
    parser.add_argument("--out", dest="output", required=True, help="output image")
    return parser.parse_args(argv)


def _run(render, args_in, args_out) -> int:
    try:
        fig = render()
    except FigureDataError as exc:
        print(f"figure input error: {exc}", file=sys.stderr)
        return 1
    fig.savefig(args_out, dpi=150)
    return 0


def main_landscape(argv=None) -> int:
    args = _parse("Render marginal loss surfaces.", argv)
    return _run(lambda: render_landscape(load_table(args.input)), args.input, args.output)


def main_convergence(argv=None) -> int:
    args = _parse("Render a descent history (log-scaled loss).", argv)
    return _run(
        lambda: render_convergence(load_table(args.input)), args.input, args.output
    )


def main_eigmap(argv=None) -> int:
    args = _parse("Render a minimal-eigenvalue heat map.", argv)
    return _run(lambda: render_eigmap(load_table(args.input)), args.input, args.output)


def _illcond_tables(summary_path):
    summary = load_table(summary_path)
    stem = Path(summary_path)
    histories = []
    for pos in summary.get("position", []):
        hist_path = stem.with_name(f"{stem.stem}_pos{int(pos)}{stem.suffix}")
        if not hist_path.exists():
            raise FigureDataError(f"missing history file {hist_path}")
        histories.append(load_table(hist_path))
    return summary, histories


def main_illcond(argv=None) -> int:
    args = _parse("Render the detector-degeneracy panel.", argv)
    return _run(
        lambda: render_illcond(*_illcond_tables(args.input)), args.input, args.output
    )
