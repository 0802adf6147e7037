#!/usr/bin/env python3
"""Solve the reference configuration on the h = 1/64 mesh and export the
desired state, final state, control and multiplier to a legacy VTK file."""

import sys

from obstaclecontrol.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "fields_h64.vtk"
    sys.exit(main(["export", "--preset", "paper", "--n", "64", "--out", out]))
