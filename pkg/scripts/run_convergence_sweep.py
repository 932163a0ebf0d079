#!/usr/bin/env python3
"""Shrinking-step convergence study with the quadratic exact solution.

Solves the fixed-point problem at eps in {0.4, 0.2, 0.1} and reports the
sup-norm error on an interior compact set; exits nonzero unless the error
decreases strictly.
"""

import sys
from pathlib import Path

from kplab.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(main(["sweep", "--config", str(ROOT / "configs" / "sweep_quadratic.cfg")]
                  + sys.argv[1:]))
