#!/usr/bin/env python3
"""Reproduce the mesh-independence study: one Newton run per mesh width,
iteration counts, final residues and EOC columns written to CSV."""

import sys

from obstaclecontrol.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
    args = ["sweep", "--preset", "paper", "--out", out]
    if "--large" in sys.argv:
        args.append("--large")
    sys.exit(main(args))
