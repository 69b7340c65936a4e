#!/usr/bin/env python3
"""Run the relative-energy inequality audit pipeline at the configured eps.

    python3 scripts/run_rei_audit.py [--output out/rei] [--set params.eps=0.2]
"""

import sys

from anelastic_lab.cli import main

if __name__ == "__main__":
    sys.exit(main(["audit-rei", *sys.argv[1:]]))
