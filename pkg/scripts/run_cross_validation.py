#!/usr/bin/env python3
"""Solver-vs-game cross validation at desk scale.

Solves the grid for the transport-linear datum, builds greedy strategies for
both players from the solved values, and checks 1e5-episode Monte Carlo
means against the grid at three start points.  Takes a minute or two.
"""

import sys
from pathlib import Path

from kplab.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(main(["cross-validate",
                   "--config", str(ROOT / "configs" / "cross_validate_affine.cfg")]
                  + sys.argv[1:]))
