"""Check the exponential sum for 1/sqrt(t) on [1, 1e8] for several delta."""

import json
import sys

from htsolve.experiments import certify_expsum


def main(deltas=(0.5, 0.1, 0.01)):
    ok = True
    for delta in deltas:
        rep = certify_expsum(delta, T=1e8, grid=1000)
        print(json.dumps(rep))
        ok &= rep["ok"]
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main(tuple(float(x) for x in sys.argv[1:]) or (0.5, 0.1, 0.01)))
