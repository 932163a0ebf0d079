#!/usr/bin/env python3
"""Mean-value limit check for the velocity-quadratic profile.

Verifies, for each averaging variant, that the extrapolated residual/eps^2
matches the pointwise operator value; writes CSV under out/mv_check.
"""

import sys
from pathlib import Path

from kplab.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(main(["mv-check", "--config", str(ROOT / "configs" / "mv_check_x_squared.cfg")]
                  + sys.argv[1:]))
