#!/usr/bin/env python3
"""Main entry point for the PF-ODE sampling lab CLI."""

import sys

from pfode_lab.cli import main

if __name__ == "__main__":
    sys.exit(main())
