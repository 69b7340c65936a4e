#!/usr/bin/env python3
"""Measure spectrum, local decay and the space-time wave norm in one go.

    python3 scripts/run_dispersion.py [--output out/dispersion] [--set ...]
"""

import sys

from anelastic_lab.cli import main

if __name__ == "__main__":
    extra = sys.argv[1:]
    for command in ("spectrum", "decay", "strichartz"):
        code = main([command, *extra])
        if code != 0:
            sys.exit(code)
    sys.exit(0)
