"""Poisson sweep: -div grad u = 1 on (0,1)^d for d in 2, 4, 8, 16.

Writes one CSV trace and JSON summary per d plus residual, rank and ops
figures into runs/poisson.  Extra arguments are passed to `htsolve poisson`.

    python3 scripts/run_poisson.py --eps 1e-2 --relative
"""

import sys

from htsolve.cli import main

if __name__ == "__main__":
    sys.exit(main(["poisson", *sys.argv[1:]]))
