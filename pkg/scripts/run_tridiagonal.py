"""Tridiagonal diffusion for d in 2, 3, 4 on the level-4 sine universe.

The Laplacian is run on the same backend so ranks_compare.svg shows both
rank curves against the error bound.  Output goes to runs/tridiagonal.
"""

import sys

from htsolve.cli import main

if __name__ == "__main__":
    sys.exit(main(["tridiag", *sys.argv[1:]]))
