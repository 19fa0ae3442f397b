import numpy as np
import pytest

from htsolve import htucker as ht


def random_sparse_tensor(rng, d, rank, max_supp=8, max_index=16):
    sup = []
    for _ in range(d):
        m = int(rng.integers(1, max_supp + 1))
        sup.append(np.sort(rng.choice(np.arange(1, max_index + 1), size=m, replace=False)))
    return ht.random_tensor(rng, d, rank, sup)


def dense_of(v, box=None):
    if box is None:
        box = [np.arange(1, 17)] * v.d
    return ht.full_on_box(v, box)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def record_criterion(key, ok, detail=""):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("abc")), str(k))):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
