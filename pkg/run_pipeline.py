#!/usr/bin/env python3
"""Run the synthetic end-to-end experiment (same flags as `voxdet pipeline`)."""
import os
import sys

# Add project root to path
sys.path.insert(0, os.path.dirname(__file__))

from voxdet.cli import main

if __name__ == "__main__":
    sys.exit(main(["pipeline"] + sys.argv[1:]))
