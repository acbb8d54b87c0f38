"""mfl-plot --spec <path>: render one figure from a plot spec file.

Exit codes: 0 success, 2 bad spec, 1 render failure.
"""
from __future__ import annotations

import argparse
import sys

from .render import render
from .spec import PlotSpecError, load_plot_spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfl-plot", description=__doc__)
    parser.add_argument("--spec", required=True)
    args = parser.parse_args(argv)
    try:
        spec = load_plot_spec(args.spec)
    except PlotSpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    try:
        out = render(spec)
    except (ValueError, OSError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
