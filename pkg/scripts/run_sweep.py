#!/usr/bin/env python3
"""Run the canonical epsilon sweep and write the convergence report.

Equivalent to `anelastic-lab sweep`; kept as a script so the headline
experiment is one command from a fresh checkout:

    python3 scripts/run_sweep.py [--eps 0.4,0.2,0.1] [--output out/sweep]
"""

import sys

from anelastic_lab.cli import main

if __name__ == "__main__":
    sys.exit(main(["sweep", *sys.argv[1:]]))
