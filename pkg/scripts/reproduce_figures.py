"""Regenerate the figure tables (fig2..fig6 CSVs) into a directory.

    python3 scripts/reproduce_figures.py out/ [--workers 4] [--check]
"""
import argparse
import sys

from mimcool.cli import main


def parse():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", help="output directory")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--check", action="store_true", help="compare against existing tables")
    return ap.parse_args()


if __name__ == "__main__":
    a = parse()
    argv = ["figures", "--out", a.out, "--workers", str(a.workers)]
    if a.check:
        argv.append("--check")
    sys.exit(main(argv))
