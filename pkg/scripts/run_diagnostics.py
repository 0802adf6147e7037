#!/usr/bin/env python3
"""Run the full diagnostics suite (convexity, monotonicity, contraction,
semismoothness, Lipschitz scaling) and write the JSON report."""

import sys

from obstaclecontrol.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "checks.json"
    sys.exit(main(["check", "--out", out]))
